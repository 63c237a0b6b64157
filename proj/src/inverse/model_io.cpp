#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include <zlib.h>

#include "unifi/error.hpp"
#include "unifi/inverse.hpp"

namespace unifi {
namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'F', 'I', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;
// Upper bound that keeps a corrupted count from allocating wildly.
constexpr std::uint64_t kMaxParams = 1ull << 28;

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_integral_v<T> || std::is_floating_point_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    static_assert(sizeof(T) == sizeof(U));
    U u;
    std::memcpy(&u, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  void raw(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
  std::string bytes;
};

class Reader {
 public:
  Reader(const std::string& b, std::size_t end) : bytes_(b), end_(end) {}
  template <class T>
  T get(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    if (pos_ + sizeof(U) > end_) throw FormatError(pos_, std::string("truncated while reading ") + what);
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    T v;
    std::memcpy(&v, &u, sizeof(T));
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(p), chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void save_model(std::ostream& os, const InverseModel& m) {
  m.config.validate();
  const Network net(m.config.shape());
  if (static_cast<std::size_t>(m.params.size()) != net.n_params()) {
    throw DataError("save_model: parameter count does not match the configuration");
  }
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  const ModelConfig& c = m.config;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.state_hidden));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.traj_hidden));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.context));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.n_heads_attn));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.attn_dim));
  w.put<std::uint8_t>(c.architecture == Architecture::SelfAttention ? 0 : 1);
  w.put<std::uint64_t>(c.seed);
  for (bool b : c.feature_mask) w.put<std::uint8_t>(b ? 1 : 0);
  w.put<double>(c.hop_s);
  for (double v : m.normalizer.mean) w.put<double>(v);
  for (double v : m.normalizer.std) w.put<double>(v);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.params.size()));
  for (Eigen::Index i = 0; i < m.params.size(); ++i) w.put<double>(m.params(i));
  w.put<std::uint32_t>(crc_of(w.bytes.data(), w.bytes.size()));
  os.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
  if (!os) throw DataError("save_model: stream write failed");
}

InverseModel load_model(std::istream& is) {
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (is.bad()) throw DataError("load_model: stream read failed");
  if (bytes.size() < sizeof kMagic + 8) throw FormatError(bytes.size(), "truncated model file");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError(0, "not a model file (bad magic)");
  const std::size_t body = bytes.size() - 4;
  {
    Reader r(bytes, body);
    for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<std::uint8_t>("magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion) {
      throw FormatError(sizeof kMagic, "unsupported model format version " + std::to_string(version));
    }
  }
  std::uint32_t stored = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[body + i])) << (8 * i);
  }
  if (stored != crc_of(bytes.data(), body)) throw FormatError(body, "checksum mismatch (file corrupted or truncated)");

  Reader r(bytes, body);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<std::uint8_t>("magic");
  r.get<std::uint32_t>("version");
  InverseModel m;
  ModelConfig& c = m.config;
  c.state_hidden = r.get<std::uint32_t>("state_hidden");
  c.traj_hidden = r.get<std::uint32_t>("traj_hidden");
  c.context = r.get<std::uint32_t>("context");
  c.n_heads_attn = r.get<std::uint32_t>("n_heads");
  c.attn_dim = r.get<std::uint32_t>("attn_dim");
  const std::size_t arch_at = r.pos();
  const auto arch = r.get<std::uint8_t>("architecture");
  if (arch > 1) throw FormatError(arch_at, "unknown architecture code " + std::to_string(arch));
  c.architecture = arch == 0 ? Architecture::SelfAttention : Architecture::Recurrent;
  c.seed = r.get<std::uint64_t>("seed");
  for (auto& b : c.feature_mask) {
    const std::size_t at = r.pos();
    const auto v = r.get<std::uint8_t>("feature mask");
    if (v > 1) throw FormatError(at, "feature mask entry must be 0 or 1");
    b = v == 1;
  }
  c.hop_s = r.get<double>("hop_s");
  for (auto& v : m.normalizer.mean) v = r.get<double>("normalizer mean");
  for (auto& v : m.normalizer.std) v = r.get<double>("normalizer std");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(sizeof kMagic + 4, std::string("invalid config block: ") + e.what());
  }
  const std::size_t count_at = r.pos();
  const auto n = r.get<std::uint64_t>("parameter count");
  const Network net(c.shape());
  if (n != net.n_params() || n > kMaxParams) {
    throw FormatError(count_at, "parameter count " + std::to_string(n) + " does not match the configuration (" +
                                    std::to_string(net.n_params()) + ")");
  }
  m.params.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.params.size(); ++i) m.params(i) = r.get<double>("parameters");
  if (r.pos() != body) throw FormatError(r.pos(), "unexpected trailing bytes before the checksum");
  return m;
}

void save_model(const std::filesystem::path& path, const InverseModel& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  save_model(os, m);
}

InverseModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "' for reading");
  try {
    return load_model(is);
  } catch (const FormatError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace unifi
