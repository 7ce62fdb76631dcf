#pragma once

// Checkpoint layout (all integers unsigned little-endian):
//
//   magic      8 bytes  "CONDSIM\0"
//   version    u32      1
//   n_meta     u32
//   n_meta x { u32 key_len, key bytes, u32 value_len, value bytes }
//   n_params   u32
//   n_params x { u32 name_len, name bytes, u64 rows, u64 cols,
//                rows*cols float64 little-endian, column-major }
//
// Meta keys: input_dim, embed_dim, hidden_layers, n_embeddings, encoder,
// temperature, seed, plus free-form entries (variant, best_epoch, ...).

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "condsim/datagen.hpp"
#include "condsim/model.hpp"

namespace condsim {

inline constexpr char kCheckpointMagic[8] = {'C', 'O', 'N', 'D', 'S', 'I', 'M', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::map<std::string, std::string> meta;  // extra entries beyond the model config
};

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_str(std::string& out, const std::string& s) {
  put_le(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw DataError("checkpoint is truncated");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::map<std::string, std::string> model_meta(const Model& m) {
  const ModelConfig& c = m.config;
  return {{"input_dim", std::to_string(c.input_dim)},
          {"embed_dim", std::to_string(c.embed_dim)},
          {"hidden_layers", std::to_string(c.hidden_layers)},
          {"n_embeddings", std::to_string(c.n_embeddings)},
          {"encoder", encoder_name(c.encoder)},
          {"temperature", format_double(c.temperature)},
          {"seed", std::to_string(m.params.seed())}};
}

inline std::string encode_checkpoint(const Checkpoint& ck) {
  using namespace detail;
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le(out, kCheckpointVersion);
  auto meta = model_meta(ck.model);
  for (const auto& [k, v] : ck.meta) meta.emplace(k, v);
  put_le(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(out, k);
    put_str(out, v);
  }
  const auto& ps = ck.model.params.params();
  put_le(out, static_cast<std::uint32_t>(ps.size()));
  for (const auto& p : ps) {
    put_str(out, p.name);
    put_le(out, static_cast<std::uint64_t>(p.value.rows()));
    put_le(out, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put_f64(out, p.value.data()[i]);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::Reader rd(bytes);
  if (rd.raw(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic))
    throw DataError("not a condsim checkpoint");
  const auto version = rd.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  std::map<std::string, std::string> meta;
  const auto n_meta = rd.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = rd.str();
    meta[k] = rd.str();
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError(std::string("checkpoint lacks '") + key + "'");
    return it->second;
  };
  ModelConfig cfg;
  try {
    cfg.input_dim = std::stoi(need("input_dim"));
    cfg.embed_dim = std::stoi(need("embed_dim"));
    cfg.hidden_layers = std::stoi(need("hidden_layers"));
    cfg.n_embeddings = std::stoi(need("n_embeddings"));
    cfg.temperature = std::stod(need("temperature"));
  } catch (const std::logic_error&) {
    throw DataError("checkpoint has malformed model metadata");
  }
  cfg.encoder = parse_encoder(need("encoder"));
  const std::uint64_t seed = std::stoull(need("seed"));

  Checkpoint ck;
  ck.model = init_model(cfg, seed);
  const auto n_params = rd.get<std::uint32_t>();
  if (n_params != ck.model.params.size()) throw DataError("checkpoint parameter count mismatch");
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string name = rd.str();
    const auto rows = rd.get<std::uint64_t>();
    const auto cols = rd.get<std::uint64_t>();
    if (!ck.model.params.contains(name)) throw DataError("unknown checkpoint parameter " + name);
    Mat& v = ck.model.params.value(name);
    if (static_cast<std::uint64_t>(v.rows()) != rows || static_cast<std::uint64_t>(v.cols()) != cols)
      throw DataError("checkpoint parameter " + name + " has the wrong shape");
    for (Eigen::Index j = 0; j < v.size(); ++j) v.data()[j] = rd.f64();
  }
  if (!rd.done()) throw DataError("trailing bytes in checkpoint");
  for (const char* k : {"input_dim", "embed_dim", "hidden_layers", "n_embeddings", "encoder",
                        "temperature", "seed"})
    meta.erase(k);
  ck.meta = std::move(meta);
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace condsim
