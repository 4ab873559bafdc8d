#pragma once

// Binary parameter checkpoints.
//
// Layout, all integers little-endian:
//   magic    8 bytes  "GANLMCKP"
//   version  u8       kCheckpointVersion
//   count    u32      number of components
//   manifest, per component:
//     name str, kind str, u32 config entries, (key str, value str)*, u32 tensor count
//   tensors, per component in manifest order, per tensor in declaration order:
//     name str, u32 rank, u64 dims[rank], f64 values[prod(dims)]
// where str is u32 byte length followed by the bytes.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ganlm/encoder.hpp"
#include "ganlm/errors.hpp"
#include "ganlm/optim.hpp"
#include "ganlm/ssgan.hpp"

namespace ganlm {

inline constexpr char kCheckpointMagic[8] = {'G', 'A', 'N', 'L', 'M', 'C', 'K', 'P'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointComponent {
  std::string name;
  std::string kind;  // "encoder", "mlp" or "meta"
  std::vector<std::pair<std::string, std::string>> config;
  ParamSet params;

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : config)
      if (k == key) return v;
    throw FormatError("component '" + name + "' lacks config key '" + key + "'");
  }
  std::size_t get_size(const std::string& key) const {
    const auto& v = get(key);
    try {
      std::size_t used = 0;
      const auto n = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw FormatError("component '" + name + "' key '" + key + "' is not an integer: " + v);
    }
  }
  double get_double(const std::string& key) const {
    const auto& v = get(key);
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw FormatError("component '" + name + "' key '" + key + "' is not a number: " + v);
    }
  }
};

struct Checkpoint {
  std::vector<CheckpointComponent> components;

  bool has(const std::string& name) const {
    for (const auto& c : components)
      if (c.name == name) return true;
    return false;
  }
  const CheckpointComponent& at(const std::string& name) const {
    for (const auto& c : components)
      if (c.name == name) return c;
    throw FormatError("checkpoint has no component '" + name + "'");
  }
  void remove(const std::string& name) {
    std::erase_if(components, [&](const auto& c) { return c.name == name; });
  }
};

namespace ckpt_detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class U>
void put_uint(std::ostream& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_str(std::ostream& out, const std::string& s) {
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class U>
U get_uint(std::istream& in) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int c = in.get();
    if (c == EOF) throw FormatError("checkpoint truncated");
    v |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline std::string get_str(std::istream& in) {
  const auto n = get_uint<std::uint32_t>(in);
  if (n > (1u << 20)) throw FormatError("checkpoint string length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (static_cast<std::uint32_t>(in.gcount()) != n) throw FormatError("checkpoint truncated");
  return s;
}

}  // namespace ckpt_detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  using namespace ckpt_detail;
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  out.put(static_cast<char>(kCheckpointVersion));
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(ck.components.size()));
  for (const auto& c : ck.components) {
    put_str(out, c.name);
    put_str(out, c.kind);
    put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(c.config.size()));
    for (const auto& [k, v] : c.config) {
      put_str(out, k);
      put_str(out, v);
    }
    put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.size()));
  }
  for (const auto& c : ck.components) {
    for (const auto& p : c.params) {
      const Tensor& t = p.var.value();
      put_str(out, p.name);
      put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
      for (auto d : t.shape()) put_uint<std::uint64_t>(out, d);
      for (double v : t.values()) put_uint<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  if (!out) throw DataError("checkpoint write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  using namespace ckpt_detail;
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || !std::equal(magic, magic + sizeof magic, kCheckpointMagic))
    throw FormatError("not a checkpoint (bad magic)");
  const int version = in.get();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get_uint<std::uint32_t>(in);
  if (count > 64) throw FormatError("checkpoint claims " + std::to_string(count) + " components");
  Checkpoint ck;
  std::vector<std::uint32_t> tensor_counts;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointComponent c;
    c.name = get_str(in);
    c.kind = get_str(in);
    const auto n_cfg = get_uint<std::uint32_t>(in);
    for (std::uint32_t j = 0; j < n_cfg; ++j) {
      auto k = get_str(in);
      c.config.emplace_back(std::move(k), get_str(in));
    }
    tensor_counts.push_back(get_uint<std::uint32_t>(in));
    ck.components.push_back(std::move(c));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < tensor_counts[i]; ++j) {
      auto name = get_str(in);
      const auto rank = get_uint<std::uint32_t>(in);
      if (rank > 8) throw FormatError("tensor '" + name + "' has rank " + std::to_string(rank));
      Shape shape;
      std::uint64_t n = 1;
      for (std::uint32_t r = 0; r < rank; ++r) {
        shape.push_back(static_cast<std::size_t>(get_uint<std::uint64_t>(in)));
        n *= shape.back();
        if (n > (std::uint64_t{1} << 32)) throw FormatError("tensor '" + name + "' is implausibly large");
      }
      std::vector<double> values(static_cast<std::size_t>(n));
      for (auto& v : values) v = std::bit_cast<double>(get_uint<std::uint64_t>(in));
      ck.components[i].params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
  }
  if (in.peek() != EOF) throw FormatError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

// ---------------------------------------------------------------------------
// Conversions between model parts and components.

inline CheckpointComponent to_component(const EncoderParams& enc) {
  using ckpt_detail::num;
  const auto& c = enc.config();
  return {"encoder",
          "encoder",
          {{"vocab_size", std::to_string(c.vocab_size)},
           {"model_dim", std::to_string(c.model_dim)},
           {"n_layers", std::to_string(c.n_layers)},
           {"n_heads", std::to_string(c.n_heads)},
           {"ffn_dim", std::to_string(c.ffn_dim)},
           {"max_len", std::to_string(c.max_len)},
           {"dropout", num(c.dropout)}},
          enc.params().clone()};
}

inline EncoderParams encoder_from(const CheckpointComponent& c) {
  if (c.kind != "encoder") throw FormatError("component '" + c.name + "' is not an encoder");
  EncoderConfig cfg;
  cfg.vocab_size = c.get_size("vocab_size");
  cfg.model_dim = c.get_size("model_dim");
  cfg.n_layers = c.get_size("n_layers");
  cfg.n_heads = c.get_size("n_heads");
  cfg.ffn_dim = c.get_size("ffn_dim");
  cfg.max_len = c.get_size("max_len");
  cfg.dropout = c.get_double("dropout");
  return EncoderParams(cfg, c.params.clone());
}

inline CheckpointComponent to_component(const std::string& name, const Mlp& mlp) {
  using ckpt_detail::num;
  const auto& c = mlp.config();
  return {name,
          "mlp",
          {{"in", std::to_string(c.in)},
           {"hidden", std::to_string(c.hidden)},
           {"out", std::to_string(c.out)},
           {"slope", num(c.slope)},
           {"dropout", num(c.dropout)}},
          mlp.params().clone()};
}

inline Mlp mlp_from(const CheckpointComponent& c) {
  if (c.kind != "mlp") throw FormatError("component '" + c.name + "' is not an MLP");
  MlpConfig cfg{c.get_size("in"), c.get_size("hidden"), c.get_size("out"), c.get_double("slope"),
                c.get_double("dropout")};
  return Mlp(cfg, c.params.clone());
}

// Run metadata travels as a tensor-free component.
inline CheckpointComponent meta_component(std::vector<std::pair<std::string, std::string>> entries) {
  return {"meta", "meta", std::move(entries), {}};
}

}  // namespace ganlm
