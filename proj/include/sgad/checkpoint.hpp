#pragma once

// Single-file model container:
//
//   "SGADCKPT"                       8 bytes magic
//   u32 version                      currently 1
//   u32 n, n bytes                   config echo (key = value text)
//   u32 count                        number of tensors
//   count x { u32 name_len, name, u32 ndim, u32 dims[ndim], f32 data[] }
//   u32 crc32                        over every preceding byte
//
// All integers and floats little-endian.

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "sgad/kv.hpp"
#include "sgad/model.hpp"

namespace sgad {

inline constexpr std::array<char, 8> kCheckpointMagic = {'S', 'G', 'A', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  enum class Kind { Io, Format, Version, Truncated, Corrupt, ShapeMismatch };
  CheckpointError(Kind kind, const std::string& msg) : Error(kind_name(kind) + std::string(": ") + msg), kind_(kind) {}
  Kind kind() const { return kind_; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Io: return "io";
      case Kind::Format: return "format";
      case Kind::Version: return "version";
      case Kind::Truncated: return "truncated";
      case Kind::Corrupt: return "corrupt";
      case Kind::ShapeMismatch: return "shape";
    }
    return "?";
  }

 private:
  Kind kind_;
};

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> data;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
    raw(&v, 4);
  }
  void f32s(const std::vector<float>& vs) {
    for (float f : vs) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      u32(bits);
    }
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
  std::vector<char> bytes;

  static std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
  }
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& b, std::size_t end) : bytes_(b), end_(end) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    if constexpr (std::endian::native == std::endian::big) v = ByteWriter::byteswap32(v);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> f32s(std::size_t n) {
    need(n * 4);
    std::vector<float> out(n);
    for (auto& f : out) {
      const std::uint32_t bits = u32();
      std::memcpy(&f, &bits, 4);
    }
    return out;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw CheckpointError(CheckpointError::Kind::Truncated, "unexpected end of file");
  }

 private:
  const std::vector<char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const char* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

}  // namespace detail

struct CheckpointContents {
  KeyValues config;
  std::vector<NamedTensor> tensors;
};

inline std::vector<char> encode_checkpoint(const CheckpointContents& c) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.u32(kCheckpointVersion);
  w.str(format_kv(c.config));
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u32(d);
    w.f32s(t.data);
  }
  w.u32(detail::crc32_of(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

inline CheckpointContents decode_checkpoint(const std::vector<char>& bytes) {
  using K = CheckpointError::Kind;
  if (bytes.size() < kCheckpointMagic.size()) {
    if (std::equal(bytes.begin(), bytes.end(), kCheckpointMagic.begin())) throw CheckpointError(K::Truncated, "file too short");
    throw CheckpointError(K::Format, "bad magic bytes");
  }
  if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
    throw CheckpointError(K::Format, "bad magic bytes");
  detail::ByteReader rd(bytes, bytes.size());
  rd.skip(kCheckpointMagic.size());

  const std::uint32_t version = rd.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(K::Version, "unsupported version " + std::to_string(version));
  CheckpointContents c;
  try {
    c.config = parse_kv(rd.str());
  } catch (const ConfigError& e) {
    throw CheckpointError(K::Corrupt, std::string("config echo: ") + e.what());
  }
  const std::uint32_t count = rd.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = rd.str();
    const std::uint32_t ndim = rd.u32();
    if (ndim > 8) throw CheckpointError(K::Corrupt, "implausible rank for " + t.name);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(rd.u32());
      n *= t.shape.back();
    }
    t.data = rd.f32s(n);
    c.tensors.push_back(std::move(t));
  }
  const std::size_t payload_end = rd.pos();
  const std::uint32_t stored = rd.u32();
  if (rd.pos() != bytes.size()) throw CheckpointError(K::Corrupt, "trailing bytes after checksum");
  if (stored != detail::crc32_of(bytes.data(), payload_end)) throw CheckpointError(K::Corrupt, "checksum mismatch");
  return c;
}

inline void write_file_bytes(const std::vector<char>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "write failed: " + path.string());
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open: " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Config echo of a model: architecture, input transform and training progress.
inline KeyValues model_config_kv(const ModelState& m) {
  return {
      {"model.side", std::to_string(m.config.side)},
      {"model.channels", std::to_string(m.config.channels)},
      {"model.latent_dim", std::to_string(m.config.latent_dim)},
      {"model.base_width", std::to_string(m.config.base_width)},
      {"model.seed", std::to_string(m.config.seed)},
      {"transform.mean", format_float(m.transform.mean)},
      {"transform.stddev", format_float(m.transform.stddev)},
      {"transform.lo", format_float(m.transform.lo)},
      {"transform.hi", format_float(m.transform.hi)},
      {"train.epoch", std::to_string(m.epoch)},
      {"opt.gen.step", std::to_string(m.gen_opt.step)},
      {"opt.disc.step", std::to_string(m.disc_opt.step)},
  };
}

inline CheckpointContents to_checkpoint(const ModelState& m) {
  CheckpointContents c;
  c.config = model_config_kv(m);
  auto shape_of = [](const std::vector<int>& s) { return std::vector<std::uint32_t>(s.begin(), s.end()); };
  for (const auto* net : m.all_nets()) {
    for (const auto* p : net->params()) c.tensors.push_back({p->name, shape_of(p->shape), p->value});
    auto names = net->buffer_names();
    auto bufs = const_cast<nn::Sequential<float>*>(net)->buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i)
      c.tensors.push_back({names[i], {static_cast<std::uint32_t>(bufs[i]->size())}, *bufs[i]});
  }
  auto add_moments = [&](const char* group, const AdamMoments& opt, const std::vector<const nn::Sequential<float>*>& nets) {
    std::size_t slot = 0;
    for (const auto* net : nets)
      for (const auto* p : net->params()) {
        c.tensors.push_back({std::string("opt.") + group + ".m." + p->name, shape_of(p->shape), opt.m[slot]});
        c.tensors.push_back({std::string("opt.") + group + ".v." + p->name, shape_of(p->shape), opt.v[slot]});
        ++slot;
      }
  };
  add_moments("gen", m.gen_opt, m.generator_nets());
  add_moments("disc", m.disc_opt, m.discriminator_nets());
  return c;
}

inline ModelState from_checkpoint(const CheckpointContents& c) {
  using K = CheckpointError::Kind;
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = c.config.find(key);
    if (it == c.config.end()) throw CheckpointError(K::Corrupt, "config echo lacks " + key);
    return it->second;
  };
  ModelConfig cfg;
  try {
    cfg.side = parse_number<int>("model.side", get("model.side"));
    cfg.channels = parse_number<int>("model.channels", get("model.channels"));
    cfg.latent_dim = parse_number<int>("model.latent_dim", get("model.latent_dim"));
    cfg.base_width = parse_number<int>("model.base_width", get("model.base_width"));
    cfg.seed = parse_number<std::uint64_t>("model.seed", get("model.seed"));
  } catch (const ConfigError& e) {
    throw CheckpointError(K::Corrupt, e.what());
  }
  ModelState m;
  try {
    m = build_model<float>(cfg);
  } catch (const InvalidArgument& e) {
    throw CheckpointError(K::ShapeMismatch, e.what());
  }
  try {
    m.transform.mean = parse_number<float>("transform.mean", get("transform.mean"));
    m.transform.stddev = parse_number<float>("transform.stddev", get("transform.stddev"));
    m.transform.lo = parse_number<float>("transform.lo", get("transform.lo"));
    m.transform.hi = parse_number<float>("transform.hi", get("transform.hi"));
    m.epoch = parse_number<std::int64_t>("train.epoch", get("train.epoch"));
  } catch (const ConfigError& e) {
    throw CheckpointError(K::Corrupt, e.what());
  }

  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : c.tensors) by_name[t.name] = &t;
  auto take = [&](const std::string& name, std::size_t expect_size, const std::vector<int>* shape) -> const NamedTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(K::ShapeMismatch, "missing tensor " + name);
    const NamedTensor& t = *it->second;
    bool ok = t.data.size() == expect_size;
    if (ok && shape) ok = std::equal(shape->begin(), shape->end(), t.shape.begin(), t.shape.end(),
                                     [](int a, std::uint32_t b) { return static_cast<std::uint32_t>(a) == b; });
    if (!ok) throw CheckpointError(K::ShapeMismatch, "tensor " + name + " does not match the configured architecture");
    return t;
  };
  for (auto* net : m.all_nets()) {
    for (auto* p : net->params()) p->value = take(p->name, p->size(), &p->shape).data;
    auto names = net->buffer_names();
    auto bufs = net->buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i) *bufs[i] = take(names[i], bufs[i]->size(), nullptr).data;
  }
  auto load_moments = [&](const char* group, AdamMoments& opt, const std::vector<nn::Sequential<float>*>& nets,
                          const std::string& step_key) {
    opt.m.clear();
    opt.v.clear();
    for (auto* net : nets)
      for (auto* p : net->params()) {
        opt.m.push_back(take(std::string("opt.") + group + ".m." + p->name, p->size(), &p->shape).data);
        opt.v.push_back(take(std::string("opt.") + group + ".v." + p->name, p->size(), &p->shape).data);
      }
    try {
      opt.step = parse_number<std::int64_t>(step_key, get(step_key));
    } catch (const ConfigError& e) {
      throw CheckpointError(K::Corrupt, e.what());
    }
  };
  load_moments("gen", m.gen_opt, m.generator_nets(), "opt.gen.step");
  load_moments("disc", m.disc_opt, m.discriminator_nets(), "opt.disc.step");
  return m;
}

inline void save_checkpoint(const ModelState& m, const std::filesystem::path& path) {
  write_file_bytes(encode_checkpoint(to_checkpoint(m)), path);
}

inline ModelState load_checkpoint(const std::filesystem::path& path) {
  return from_checkpoint(decode_checkpoint(read_file_bytes(path)));
}

// Loads and additionally requires the stored architecture to equal `expected`.
inline ModelState load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  ModelState m = load_checkpoint(path);
  if (!(m.config == expected))
    throw CheckpointError(CheckpointError::Kind::ShapeMismatch, "checkpoint architecture differs from configuration");
  return m;
}

}  // namespace sgad
