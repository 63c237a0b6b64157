#include "unifi/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include <json.hpp>

#include "unifi/error.hpp"

namespace unifi {
namespace {

using json = nlohmann::json;

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON at byte ") + std::to_string(e.byte) + ": " + e.what());
  } catch (const json::out_of_range& e) {
    throw ParseError(line_no, std::string("number out of range: ") + e.what());
  }
}

void require_keys(const json& j, std::initializer_list<std::string_view> keys, std::size_t line_no,
                  const std::string& what) {
  if (!j.is_object()) throw ParseError(line_no, what + " must be a JSON object");
  if (j.size() != keys.size()) throw ParseError(line_no, what + " has unexpected keys");
  for (auto k : keys) {
    if (!j.contains(k)) throw ParseError(line_no, what + " lacks key '" + std::string(k) + "'");
  }
}

double finite_number(const json& j, std::size_t line_no, const std::string& what) {
  if (!j.is_number()) throw ParseError(line_no, what + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(line_no, what + " must be finite");
  return v;
}

std::size_t positive_int(const json& j, std::size_t line_no, const std::string& what) {
  if (!j.is_number_integer()) throw ParseError(line_no, what + " must be an integer");
  const auto v = j.get<long long>();
  if (v < 1 || v > 1'000'000) throw ParseError(line_no, what + " out of range");
  return static_cast<std::size_t>(v);
}

}  // namespace

namespace detail {

void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

void append_number_or_null(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "null";
  } else {
    append_number(out, v);
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  return os;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "' for reading");
  return is;
}

}  // namespace detail

void write_csi_trace(std::ostream& os, std::span<const CsiFrame> frames) {
  if (frames.empty()) return;
  const auto n_sub = frames.front().h.rows();
  const auto n_rx = frames.front().h.cols();
  os << "{\"n_sub\":" << n_sub << ",\"n_rx\":" << n_rx << "}\n";
  std::string line;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    if (f.h.rows() != n_sub || f.h.cols() != n_rx) {
      throw DataError("write_csi_trace: frame " + std::to_string(k) + " changes shape");
    }
    line.clear();
    line += "{\"ts\":";
    detail::append_number(line, f.ts);
    line += ",\"csi\":[";
    for (Eigen::Index i = 0; i < n_sub; ++i) {
      for (Eigen::Index a = 0; a < n_rx; ++a) {
        if (i != 0 || a != 0) line += ',';
        line += '[';
        detail::append_number(line, f.h(i, a).real());
        line += ',';
        detail::append_number(line, f.h(i, a).imag());
        line += ']';
      }
    }
    line += "]}\n";
    os << line;
  }
  if (!os) throw DataError("write_csi_trace: stream write failed");
}

std::vector<CsiFrame> read_csi_trace(std::istream& is) {
  std::vector<CsiFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  std::size_t n_sub = 0;
  std::size_t n_rx = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const json j = parse_line(line, line_no);
    if (line_no == 1) {
      require_keys(j, {"n_sub", "n_rx"}, line_no, "header");
      n_sub = positive_int(j["n_sub"], line_no, "n_sub");
      n_rx = positive_int(j["n_rx"], line_no, "n_rx");
      continue;
    }
    const std::size_t record = line_no - 2;
    const std::string rec = "record " + std::to_string(record);
    require_keys(j, {"ts", "csi"}, line_no, rec);
    CsiFrame f;
    f.ts = finite_number(j["ts"], line_no, rec + " ts");
    const json& csi = j["csi"];
    if (!csi.is_array() || csi.size() != n_sub * n_rx) {
      throw ParseError(line_no, rec + ": expected " + std::to_string(n_sub * n_rx) + " [re, im] pairs, got " +
                                    (csi.is_array() ? std::to_string(csi.size()) : std::string("non-array")));
    }
    f.h.resize(static_cast<Eigen::Index>(n_sub), static_cast<Eigen::Index>(n_rx));
    for (std::size_t e = 0; e < csi.size(); ++e) {
      const json& pair = csi[e];
      if (!pair.is_array() || pair.size() != 2) throw ParseError(line_no, rec + ": entry " + std::to_string(e) + " is not [re, im]");
      const double re = finite_number(pair[0], line_no, rec + " re");
      const double im = finite_number(pair[1], line_no, rec + " im");
      f.h(static_cast<Eigen::Index>(e / n_rx), static_cast<Eigen::Index>(e % n_rx)) = {re, im};
    }
    if (!frames.empty() && f.ts < frames.back().ts) {
      throw ParseError(line_no, rec + ": timestamp decreases");
    }
    frames.push_back(std::move(f));
  }
  if (is.bad()) throw DataError("read_csi_trace: stream read failed");
  return frames;
}

void write_csi_trace(const std::filesystem::path& path, std::span<const CsiFrame> frames) {
  auto os = detail::open_for_write(path);
  write_csi_trace(os, frames);
}

std::vector<CsiFrame> read_csi_trace(const std::filesystem::path& path) {
  auto is = detail::open_for_read(path);
  try {
    return read_csi_trace(is);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

void write_feature_sequence(std::ostream& os, std::span<const FeatureFrame> frames) {
  std::string line;
  for (const auto& f : frames) {
    line.clear();
    line += "{\"ts\":";
    detail::append_number(line, f.ts);
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      line += ",\"";
      line += slot_key(static_cast<Slot>(s));
      line += "\":";
      detail::append_number_or_null(line, f.v[s]);
    }
    line += "}\n";
    os << line;
  }
  if (!os) throw DataError("write_feature_sequence: stream write failed");
}

std::vector<FeatureFrame> read_feature_sequence(std::istream& is) {
  std::vector<FeatureFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const json j = parse_line(line, line_no);
    const std::string rec = "record " + std::to_string(line_no - 1);
    require_keys(j, {"ts", "corr_s", "dser_s", "plcr", "corr_l", "dser_l"}, line_no, rec);
    FeatureFrame f;
    f.ts = finite_number(j["ts"], line_no, rec + " ts");
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      const json& v = j[std::string(slot_key(static_cast<Slot>(s)))];
      f.v[s] = v.is_null() ? kSentinel : finite_number(v, line_no, rec + " " + std::string(slot_key(static_cast<Slot>(s))));
    }
    if (!frames.empty() && f.ts < frames.back().ts) throw ParseError(line_no, rec + ": timestamp decreases");
    frames.push_back(f);
  }
  if (is.bad()) throw DataError("read_feature_sequence: stream read failed");
  return frames;
}

void write_feature_sequence(const std::filesystem::path& path, std::span<const FeatureFrame> frames) {
  auto os = detail::open_for_write(path);
  write_feature_sequence(os, frames);
}

std::vector<FeatureFrame> read_feature_sequence(const std::filesystem::path& path) {
  auto is = detail::open_for_read(path);
  try {
    return read_feature_sequence(is);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

namespace {

template <class T>
void append_int_array(std::string& line, const std::vector<T>& v) {
  line += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) line += ',';
    line += std::to_string(static_cast<int>(v[i]));
  }
  line += ']';
}

void append_double_array(std::string& line, const std::vector<double>& v) {
  line += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) line += ',';
    detail::append_number(line, v[i]);
  }
  line += ']';
}

const json& array_of_size(const json& j, const char* key, std::size_t n, std::size_t line_no, const std::string& rec) {
  const json& a = j[key];
  if (!a.is_array()) throw ParseError(line_no, rec + ": '" + key + "' must be an array");
  if (n != static_cast<std::size_t>(-1) && a.size() != n) {
    throw ParseError(line_no, rec + ": '" + key + "' has " + std::to_string(a.size()) + " entries, expected " +
                                  std::to_string(n));
  }
  return a;
}

int bounded_int(const json& j, int hi, std::size_t line_no, const std::string& what) {
  if (!j.is_number_integer()) throw ParseError(line_no, what + " must be an integer");
  const auto v = j.get<long long>();
  if (v < 0 || v > hi) throw ParseError(line_no, what + " out of range");
  return static_cast<int>(v);
}

}  // namespace

void write_dataset(std::ostream& os, std::span<const LabeledSequence> sequences) {
  std::string line;
  for (const auto& seq : sequences) {
    seq.validate();
    line.clear();
    line += "{\"id\":" + std::to_string(seq.id) + ",\"f_s\":";
    detail::append_number(line, seq.f_s);
    line += ",\"sim\":";
    append_int_array(line, seq.sim);
    line += ",\"real\":";
    append_int_array(line, seq.real);
    line += ",\"pos\":[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) line += ',';
      line += '[';
      detail::append_number(line, seq.traj.pos[i].x());
      line += ',';
      detail::append_number(line, seq.traj.pos[i].y());
      line += ']';
    }
    line += "],\"feat\":[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) line += ',';
      line += '[';
      for (std::size_t s = 0; s < kNumSlots; ++s) {
        if (s) line += ',';
        detail::append_number_or_null(line, seq.features[i].v[s]);
      }
      line += ']';
    }
    line += "],\"speed\":";
    append_double_array(line, seq.traj.speed);
    line += ",\"heading\":";
    append_double_array(line, seq.traj.heading);
    line += "}\n";
    os << line;
  }
  if (!os) throw DataError("write_dataset: stream write failed");
}

std::vector<LabeledSequence> read_dataset(std::istream& is) {
  std::vector<LabeledSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const json j = parse_line(line, line_no);
    const std::string rec = "record " + std::to_string(line_no - 1);
    const bool has_kin = j.is_object() && (j.contains("speed") || j.contains("heading"));
    if (has_kin) {
      require_keys(j, {"id", "f_s", "sim", "real", "pos", "feat", "speed", "heading"}, line_no, rec);
    } else {
      require_keys(j, {"id", "f_s", "sim", "real", "pos", "feat"}, line_no, rec);
    }
    LabeledSequence seq;
    if (!j["id"].is_number_unsigned()) throw ParseError(line_no, rec + ": id must be a non-negative integer");
    seq.id = j["id"].get<std::uint64_t>();
    seq.f_s = finite_number(j["f_s"], line_no, rec + " f_s");
    if (!(seq.f_s > 0.0)) throw ParseError(line_no, rec + ": f_s must be positive");
    seq.traj.f_s = seq.f_s;

    const json& sim = array_of_size(j, "sim", static_cast<std::size_t>(-1), line_no, rec);
    const std::size_t n = sim.size();
    const json& real = array_of_size(j, "real", n, line_no, rec);
    const json& pos = array_of_size(j, "pos", n, line_no, rec);
    const json& feat = array_of_size(j, "feat", n, line_no, rec);
    seq.sim.reserve(n);
    seq.real.reserve(n);
    seq.traj.reserve(n);
    seq.features.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string at = rec + " step " + std::to_string(i);
      seq.sim.push_back(static_cast<SimEvent>(bounded_int(sim[i], kNumSimEvents - 1, line_no, at + " sim")));
      seq.real.push_back(static_cast<RealEvent>(bounded_int(real[i], kNumRealEvents - 1, line_no, at + " real")));
      const json& p = pos[i];
      if (!p.is_array() || p.size() != 2) throw ParseError(line_no, at + ": pos must be [x, y]");
      seq.traj.pos.emplace_back(finite_number(p[0], line_no, at + " x"), finite_number(p[1], line_no, at + " y"));
      seq.traj.inside.push_back(seq.real.back() == RealEvent::Absence ? 0 : 1);
      const json& f = feat[i];
      if (!f.is_array() || f.size() != kNumSlots) throw ParseError(line_no, at + ": feat must hold 5 values");
      seq.features[i].ts = static_cast<double>(i) / seq.f_s;
      for (std::size_t s = 0; s < kNumSlots; ++s) {
        seq.features[i].v[s] = f[s].is_null() ? kSentinel : finite_number(f[s], line_no, at + " feat");
      }
    }
    if (has_kin) {
      const json& speed = array_of_size(j, "speed", n, line_no, rec);
      const json& heading = array_of_size(j, "heading", n, line_no, rec);
      for (std::size_t i = 0; i < n; ++i) {
        seq.traj.speed.push_back(finite_number(speed[i], line_no, rec + " speed"));
        seq.traj.heading.push_back(finite_number(heading[i], line_no, rec + " heading"));
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const Point2 d = i + 1 < n ? Point2(seq.traj.pos[i + 1] - seq.traj.pos[i]) : Point2(0.0, 0.0);
        seq.traj.speed.push_back(d.norm() * seq.f_s);
        seq.traj.heading.push_back(d.norm() > 0.0 ? std::atan2(d.y(), d.x()) : (i ? seq.traj.heading.back() : 0.0));
      }
    }
    out.push_back(std::move(seq));
  }
  if (is.bad()) throw DataError("read_dataset: stream read failed");
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledSequence> sequences) {
  auto os = detail::open_for_write(path);
  write_dataset(os, sequences);
}

std::vector<LabeledSequence> read_dataset(const std::filesystem::path& path) {
  auto is = detail::open_for_read(path);
  try {
    return read_dataset(is);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

}  // namespace unifi
