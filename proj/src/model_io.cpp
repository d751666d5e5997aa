#include "controlpe/model_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "byteio.hpp"
#include "controlpe/error.hpp"
#include "controlpe/hash.hpp"

namespace controlpe {

using nlohmann::json;
namespace {

constexpr char kMagic[4] = {'C', 'P', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
              {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
              {"d_head", c.d_head},         {"max_seq_len", c.max_seq_len},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_head = j.at("d_head").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_model(const TransformerWeights& weights, const Vocab& vocab, const std::string& path) {
  if (vocab.size() != weights.config.vocab_size)
    fail(Err::shape_mismatch, "save_model: vocab size " + std::to_string(vocab.size()) +
                                  " != config vocab_size " +
                                  std::to_string(weights.config.vocab_size));
  json header;
  header["config"] = config_to_json(weights.config);
  header["vocab"] = vocab.tokens;
  json manifest = json::array();
  weights.for_each_tensor([&](const std::string& name, const MatF& m) {
    manifest.push_back(json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  header["tensors"] = manifest;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Err::io, "save_model: cannot open '" + path + "'");
  out.write(kMagic, 4);
  byteio::put_u32le(out, kVersion);
  byteio::put_u64le(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  Fnv1a64 hash;
  weights.for_each_tensor([&](const std::string&, const MatF& m) {
    const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(float);
    hash.update(m.data(), bytes);
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(bytes));
  });
  byteio::put_u64le(out, hash.digest());
  out.flush();
  if (!out) fail(Err::io, "save_model: write to '" + path + "' failed");
}

LoadedModel load_model(const std::string& path) {
  const auto buf = byteio::read_file(path);
  if (buf.size() < 16) fail(Err::truncated, "load_model: file too small");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    fail(Err::bad_magic, "load_model: '" + path + "' is not a model container");
  const std::uint32_t version = byteio::get_u32le(buf.data() + 4);
  if (version != kVersion)
    fail(Err::bad_version, "load_model: unsupported version " + std::to_string(version));
  const std::uint64_t header_len = byteio::get_u64le(buf.data() + 8);
  if (16 + header_len > buf.size()) fail(Err::truncated, "load_model: header exceeds file");

  json header;
  try {
    header = json::parse(buf.begin() + 16, buf.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    fail(Err::bad_header, std::string("load_model: bad header: ") + e.what());
  }

  LoadedModel m;
  try {
    m.weights.config = config_from_json(header.at("config"));
    m.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    fail(Err::bad_header, std::string("load_model: bad header: ") + e.what());
  }
  m.weights.config.validate();
  if (m.vocab.size() != m.weights.config.vocab_size)
    fail(Err::bad_header, "load_model: vocab list does not match config vocab_size");
  allocate_weights(m.weights);

  const json& manifest = header.at("tensors");
  std::size_t expected = 0;
  m.weights.for_each_tensor([&](const std::string&, const MatF&) { ++expected; });
  if (!manifest.is_array() || manifest.size() != expected)
    fail(Err::bad_header, "load_model: manifest does not match model structure");

  std::size_t off = 16 + static_cast<std::size_t>(header_len);
  std::size_t idx = 0;
  Fnv1a64 hash;
  m.weights.for_each_tensor([&](const std::string& name, MatF& t) {
    const json& e = manifest[idx++];
    if (e.at("name").get<std::string>() != name ||
        e.at("rows").get<Index>() != t.rows() || e.at("cols").get<Index>() != t.cols())
      fail(Err::bad_header, "load_model: manifest entry mismatch at '" + name + "'");
    const std::size_t bytes = static_cast<std::size_t>(t.size()) * sizeof(float);
    if (off + bytes > buf.size()) fail(Err::truncated, "load_model: payload truncated at '" + name + "'");
    std::memcpy(t.data(), buf.data() + off, bytes);
    hash.update(buf.data() + off, bytes);
    off += bytes;
  });
  if (off + 8 > buf.size()) fail(Err::truncated, "load_model: missing payload hash");
  const std::uint64_t stored = byteio::get_u64le(buf.data() + off);
  if (stored != hash.digest())
    fail(Err::hash_mismatch, "load_model: payload hash mismatch (stored " + hash_hex(stored) +
                                 ", computed " + hash_hex(hash.digest()) + ")");
  if (off + 8 != buf.size()) fail(Err::bad_header, "load_model: trailing bytes after hash");
  m.weights.for_each_tensor([&](const std::string& name, const MatF& t) {
    if (!t.allFinite()) fail(Err::non_finite, "load_model: non-finite values in '" + name + "'");
  });
  return m;
}

}  // namespace controlpe
