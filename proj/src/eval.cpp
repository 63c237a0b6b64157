#include "unifi/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "unifi/csi.hpp"
#include "unifi/error.hpp"
#include "unifi/features.hpp"
#include "unifi/io.hpp"
#include "unifi/rng.hpp"

namespace unifi {

void ConfusionMatrix::merge(const ConfusionMatrix& o) {
  for (std::size_t i = 0; i < kNumRealEvents; ++i) {
    for (std::size_t j = 0; j < kNumRealEvents; ++j) counts[i][j] += o.counts[i][j];
  }
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kNumRealEvents; ++i) n += counts[i][i];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  if (n == 0) throw EvaluationError("confusion matrix is empty");
  return static_cast<double>(trace()) / static_cast<double>(n);
}

double ConfusionMatrix::precision(RealEvent e) const {
  const auto c = static_cast<std::size_t>(index_of(e));
  std::size_t col = 0;
  for (std::size_t i = 0; i < kNumRealEvents; ++i) col += counts[i][c];
  if (col == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(counts[c][c]) / static_cast<double>(col);
}

double ConfusionMatrix::recall(RealEvent e) const {
  const auto r = static_cast<std::size_t>(index_of(e));
  const std::size_t row = std::accumulate(counts[r].begin(), counts[r].end(), std::size_t{0});
  if (row == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(counts[r][r]) / static_cast<double>(row);
}

ConfusionMatrix score_events(std::span<const RealEvent> truth, std::span<const RealEvent> pred) {
  if (truth.size() != pred.size()) {
    throw EvaluationError("score_events: " + std::to_string(truth.size()) + " truth labels vs " +
                          std::to_string(pred.size()) + " predictions");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], pred[i]);
  return m;
}

ErrorCdf::ErrorCdf(std::vector<double> errors) : sorted_(std::move(errors)) {
  std::sort(sorted_.begin(), sorted_.end());
}

void ErrorCdf::merge(const ErrorCdf& o) {
  std::vector<double> out(sorted_.size() + o.sorted_.size());
  std::merge(sorted_.begin(), sorted_.end(), o.sorted_.begin(), o.sorted_.end(), out.begin());
  sorted_ = std::move(out);
}

double ErrorCdf::percentile(double q) const {
  if (sorted_.empty()) throw EvaluationError("error CDF is empty");
  if (!(q >= 0.0 && q <= 1.0)) throw EvaluationError("percentile must lie in [0, 1]");
  const double rank = q * static_cast<double>(sorted_.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted_.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted_[lo] + frac * (sorted_[hi] - sorted_[lo]);
}

double ErrorCdf::mean() const {
  if (sorted_.empty()) throw EvaluationError("error CDF is empty");
  return std::accumulate(sorted_.begin(), sorted_.end(), 0.0) / static_cast<double>(sorted_.size());
}

std::vector<std::pair<double, double>> ErrorCdf::rows() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted_.size());
  const double n = static_cast<double>(sorted_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) out.emplace_back(sorted_[i], static_cast<double>(i + 1) / n);
  return out;
}

ErrorCdf score_tracking(std::span<const Point2> truth, std::span<const Point2> pred,
                        std::span<const std::uint8_t> mask) {
  if (truth.size() != pred.size() || truth.size() != mask.size()) {
    throw EvaluationError("score_tracking: series lengths differ");
  }
  std::vector<double> err;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (mask[i]) err.push_back((truth[i] - pred[i]).norm());
  }
  if (err.empty()) throw EvaluationError("score_tracking: mask selects no frame");
  return ErrorCdf(std::move(err));
}

ExperimentReport evaluate(const InverseModel& model, std::span<const FrameSequence> test) {
  using clock = std::chrono::steady_clock;
  ExperimentReport rep;
  std::vector<double> errors;
  double seconds = 0.0;
  for (const auto& f : test) {
    if (!f.labeled()) throw EvaluationError("evaluate: test sequence without labels");
    InferenceSession session(model);
    for (std::size_t k = 0; k < f.size(); ++k) {
      std::array<double, kNumSlots> raw{};
      for (std::size_t s = 0; s < kNumSlots; ++s) {
        raw[s] = f.x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
      }
      if (!f.valid[k]) raw[0] = kSentinel;
      const auto t0 = clock::now();
      const auto p = session.push(f.ts[k], raw);
      seconds += std::chrono::duration<double>(clock::now() - t0).count();
      ++rep.latency_samples;
      if (!p) continue;
      rep.confusion.add(f.label[k], p->event);
      if (f.label[k] != RealEvent::Absence && p->pos) {
        errors.push_back((*p->pos - Point2(f.pos.col(static_cast<Eigen::Index>(k)))).norm());
      }
    }
  }
  rep.errors = ErrorCdf(std::move(errors));
  rep.mean_latency_s = rep.latency_samples ? seconds / static_cast<double>(rep.latency_samples) : 0.0;
  return rep;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

std::filesystem::path with_suffix(const std::filesystem::path& out, const char* suffix) {
  return std::filesystem::path(out.string() + suffix);
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::filesystem::path& out) {
  if (report.confusion.total() == 0) {
    throw EvaluationError("report '" + report.name + "' has no evaluated frames; nothing to emit");
  }
  ojson summary = ojson::object();
  summary["name"] = report.name;
  summary["seed"] = report.seed;
  summary["fingerprint"] = report.fingerprint;
  summary["frames"] = report.confusion.total();
  summary["accuracy"] = report.accuracy();
  for (RealEvent e : kAllRealEvents) {
    summary["precision." + std::string(to_string(e))] = number_or_null(report.confusion.precision(e));
  }
  for (RealEvent e : kAllRealEvents) {
    summary["recall." + std::string(to_string(e))] = number_or_null(report.confusion.recall(e));
  }
  summary["tracked_frames"] = report.errors.size();
  const bool tracked = !report.errors.empty();
  summary["median_error_m"] = tracked ? ojson(report.errors.median()) : ojson(nullptr);
  summary["p90_error_m"] = tracked ? ojson(report.errors.p90()) : ojson(nullptr);
  summary["mean_error_m"] = tracked ? ojson(report.errors.mean()) : ojson(nullptr);
  summary["mean_latency_s"] = report.mean_latency_s;
  summary["latency_samples"] = report.latency_samples;
  for (const auto& [k, v] : report.extra) summary[k] = number_or_null(v);

  {
    auto os = detail::open_for_write(with_suffix(out, ".jsonl"));
    for (auto it = summary.begin(); it != summary.end(); ++it) {
      os << ojson{{"key", it.key()}, {"value", it.value()}}.dump() << '\n';
    }
    os << ojson{{"summary", summary}}.dump() << '\n';
    if (!os) throw DataError(with_suffix(out, ".jsonl").string() + ": write failed");
  }
  {
    auto os = detail::open_for_write(with_suffix(out, ".cdf.tsv"));
    std::string line = "error_m\tcdf\n";
    os << line;
    for (const auto& [x, p] : report.errors.rows()) {
      line.clear();
      detail::append_number(line, x);
      line += '\t';
      detail::append_number(line, p);
      line += '\n';
      os << line;
    }
    if (!os) throw DataError(with_suffix(out, ".cdf.tsv").string() + ": write failed");
  }
  {
    auto os = detail::open_for_write(with_suffix(out, ".confusion.tsv"));
    os << "truth\\pred";
    for (RealEvent e : kAllRealEvents) os << '\t' << to_string(e);
    os << '\n';
    for (RealEvent t : kAllRealEvents) {
      os << to_string(t);
      for (RealEvent p : kAllRealEvents) os << '\t' << report.confusion.counts[index_of(t)][index_of(p)];
      os << '\n';
    }
    if (!os) throw DataError(with_suffix(out, ".confusion.tsv").string() + ": write failed");
  }
}

std::vector<FrameSequence> simulate_frames(const SimulationConfig& cfg, std::size_t n, std::uint64_t master_seed,
                                           double hop_s) {
  std::vector<FrameSequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(to_frames(generate_sequence(cfg, master_seed, i), hop_s));
  return out;
}

std::vector<FeatureSubset> default_ablation_subsets() {
  return {
      {"corr_s", {true, false, false, false, false}},
      {"corr_s+dser_s", {true, true, false, false, false}},
      {"all", {true, true, true, true, true}},
  };
}

std::vector<AblationRow> run_ablation(std::span<const FrameSequence> train_set, std::span<const FrameSequence> test,
                                      std::span<const FeatureSubset> subsets, const ModelConfig& mcfg,
                                      const TrainConfig& tcfg) {
  if (subsets.empty()) throw ConfigError("ablation: no feature subsets");
  std::vector<AblationRow> rows;
  for (const auto& sub : subsets) {
    AblationRow row{sub, std::nullopt, std::nullopt, {}};
    try {
      ModelConfig m = mcfg;
      m.feature_mask = sub.mask;
      auto result = train(train_set, m, tcfg);
      ExperimentReport rep = evaluate(result.model, test);
      rep.name = sub.name;
      rep.seed = tcfg.seed;
      rows.push_back({sub, std::move(rep), std::move(result.model), {}});
      continue;
    } catch (const TrainingError& e) {
      row.error = e.what();
    } catch (const EvaluationError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RateRow> run_rate_sweep(const ExperimentConfig& cfg, std::span<const double> rates,
                                    const std::function<void(const std::string&)>& progress) {
  std::vector<RateRow> rows;
  for (double rate : rates) {
    if (!(rate > 0.0)) throw ConfigError("rate sweep: rates must be positive");
    SimulationConfig sim = cfg.sim;
    sim.f_s = rate;
    if (progress) progress("rate " + std::to_string(rate) + " Hz: simulating");
    const auto train_set = simulate_frames(sim, cfg.n_sequences, cfg.seed, cfg.model.hop_s);
    const auto test = simulate_frames(sim, cfg.n_test, derive_seed(cfg.seed, 0x7e57), cfg.model.hop_s);
    if (progress) progress("rate " + std::to_string(rate) + " Hz: training");
    const auto result = train(train_set, cfg.model, cfg.train);
    RateRow row{rate, evaluate(result.model, test)};
    row.report.name = "rate_" + std::to_string(static_cast<long long>(std::llround(rate)));
    row.report.seed = cfg.seed;
    row.report.fingerprint = fingerprint(cfg);
    row.report.extra.emplace_back("rate_hz", rate);
    rows.push_back(std::move(row));
  }
  return rows;
}

RateTrend rate_trend(std::span<const RateRow> rows, double tolerance) {
  RateTrend t;
  t.tolerance = tolerance;
  t.monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].report.errors.mean() > rows[i - 1].report.errors.mean() + tolerance) t.monotone = false;
  }
  t.plateau = rows.size() < 2 ||
              std::abs(rows.back().report.errors.mean() - rows[rows.size() - 2].report.errors.mean()) <= tolerance;
  return t;
}

CrossCheckResult cross_check(const ExperimentConfig& cfg, std::size_t n, std::uint64_t master_seed,
                             std::optional<double> min_segment_s) {
  const WindowConfig& win = cfg.sim.synth.windows;
  const double min_s = min_segment_s.value_or(1.0);
  CrossCheckResult res;
  for (std::size_t i = 0; i < n; ++i) {
    const LabeledSequence seq = generate_sequence(cfg.sim, master_seed, i);
    RadioConfig radio = cfg.effective_radio();
    radio.sample_rate = seq.f_s;
    radio.noise_seed = derive_seed(master_seed, 0xc5100 + i);
    std::vector<std::uint8_t> occupied(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) occupied[t] = seq.real[t] != RealEvent::Absence;
    const auto csi = synthesize_csi(seq.traj, radio, occupied);
    const auto extracted = extract_sequence(csi, win, radio);
    const std::size_t hop = window_samples(win.hop_s, seq.f_s);
    std::array<std::size_t, kNumSlots> len{};
    for (std::size_t s = 0; s < kNumSlots; ++s) len[s] = window_samples(win.window_of(static_cast<Slot>(s)), seq.f_s);

    std::size_t a = 0;
    while (a < seq.size()) {
      std::size_t b = a;
      while (b + 1 < seq.size() && seq.real[b + 1] == seq.real[a]) ++b;
      const RealEvent e = seq.real[a];
      if (static_cast<double>(b + 1 - a) < min_s * seq.f_s) {
        ++res.skipped_short;
        a = b + 1;
        continue;
      }
      bool any = false, direct_ok = true, extracted_ok = true;
      for (std::size_t s = 0; s < kNumSlots; ++s) {
        const RangeCell& cell = cfg.sim.table.lookup(e, static_cast<Slot>(s));
        if (!std::holds_alternative<Interval>(cell)) continue;
        const Interval iv = std::get<Interval>(cell);
        const bool magnitude = static_cast<Slot>(s) == Slot::Plcr;
        double sum_d = 0.0, sum_x = 0.0;
        std::size_t n_d = 0, n_x = 0;
        for (std::size_t k = (a + hop - 1) / hop; k < extracted.size(); ++k) {
          const std::size_t end = k * hop;
          if (end > b) break;
          if (end + 1 < a + len[s]) continue;  // window reaches into the previous segment
          const double x = extracted[k].v[s];
          const double d = seq.features[end].v[s];
          if (std::isfinite(x)) {
            sum_x += magnitude ? std::abs(x) : x;
            ++n_x;
          }
          if (std::isfinite(d)) {
            sum_d += magnitude ? std::abs(d) : d;
            ++n_d;
          }
        }
        if (n_x == 0 || n_d == 0) continue;
        any = true;
        const bool in_x = iv.contains(sum_x / static_cast<double>(n_x));
        const bool in_d = iv.contains(sum_d / static_cast<double>(n_d));
        auto& pc = res.per_cell[static_cast<std::size_t>(index_of(e))][s];
        ++pc.first;
        pc.second += in_x;
        extracted_ok = extracted_ok && in_x;
        direct_ok = direct_ok && in_d;
      }
      if (any) {
        ++res.segments;
        res.direct_within += direct_ok;
        res.extracted_within += extracted_ok;
      }
      a = b + 1;
    }
  }
  return res;
}

}  // namespace unifi
