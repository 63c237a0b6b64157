#pragma once

// Metrics, reports and experiment drivers: confusion matrices, error CDFs,
// feature ablation, packet-rate sweep and the forward-model cross-check.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unifi/config.hpp"
#include "unifi/domain.hpp"
#include "unifi/inverse.hpp"

namespace unifi {

struct ConfusionMatrix {
  /// counts[truth][predicted]
  std::array<std::array<std::size_t, kNumRealEvents>, kNumRealEvents> counts{};

  void add(RealEvent truth, RealEvent pred) { ++counts[index_of(truth)][index_of(pred)]; }
  void merge(const ConfusionMatrix& o);
  std::size_t total() const;
  std::size_t trace() const;
  /// trace / total; throws EvaluationError when empty.
  double accuracy() const;
  /// NaN when the class was never predicted / never present.
  double precision(RealEvent e) const;
  double recall(RealEvent e) const;
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws EvaluationError on a length mismatch.
ConfusionMatrix score_events(std::span<const RealEvent> truth, std::span<const RealEvent> pred);

/// Sorted localization errors in meters.
class ErrorCdf {
 public:
  ErrorCdf() = default;
  explicit ErrorCdf(std::vector<double> errors);

  void merge(const ErrorCdf& o);
  std::size_t size() const { return sorted_.size(); }
  bool empty() const { return sorted_.empty(); }
  const std::vector<double>& sorted() const { return sorted_; }

  /// Linear interpolation between order statistics at rank q * (n - 1),
  /// q in [0, 1]. Throws EvaluationError when empty.
  double percentile(double q) const;
  double median() const { return percentile(0.5); }
  double p90() const { return percentile(0.9); }
  double mean() const;
  /// (error, cumulative fraction) rows with fraction (i + 1) / n.
  std::vector<std::pair<double, double>> rows() const;

 private:
  std::vector<double> sorted_;
};

/// Errors on frames where mask is set. Throws EvaluationError on a length
/// mismatch or an empty mask.
ErrorCdf score_tracking(std::span<const Point2> truth, std::span<const Point2> pred,
                        std::span<const std::uint8_t> mask);

struct ExperimentReport {
  std::string name;
  ConfusionMatrix confusion;
  ErrorCdf errors;
  double mean_latency_s = 0.0;
  std::size_t latency_samples = 0;
  std::string fingerprint;
  std::uint64_t seed = 0;
  /// Extra scalar results in insertion order.
  std::vector<std::pair<std::string, double>> extra;

  double accuracy() const { return confusion.accuracy(); }
};

/// Runs the model over labeled frame sequences. Event scores use every
/// predicted frame; localization uses frames where truth and prediction are
/// both present. Latency is wall time per InferenceSession step.
ExperimentReport evaluate(const InverseModel& model, std::span<const FrameSequence> test);

/// Writes `<out>.jsonl` (key/value records then a summary record),
/// `<out>.cdf.tsv` and `<out>.confusion.tsv`. Throws EvaluationError for a
/// report without evaluated frames.
void emit_report(const ExperimentReport& report, const std::filesystem::path& out);

/// Frames of sequences at a model hop; datasets are consumed one sequence at
/// a time so high packet rates do not hold raw steps in memory.
std::vector<FrameSequence> simulate_frames(const SimulationConfig& cfg, std::size_t n, std::uint64_t master_seed,
                                           double hop_s);

struct FeatureSubset {
  std::string name;
  std::array<bool, kNumSlots> mask{};
};

/// {corr_s}, {corr_s, dser_s} and all five slots.
std::vector<FeatureSubset> default_ablation_subsets();

struct AblationRow {
  FeatureSubset subset;
  std::optional<ExperimentReport> report;
  std::optional<InverseModel> model;
  std::string error;  // set when training failed
};

/// One model per subset on identical splits and seeds; a failing subset is
/// recorded and the others still run.
std::vector<AblationRow> run_ablation(std::span<const FrameSequence> train, std::span<const FrameSequence> test,
                                      std::span<const FeatureSubset> subsets, const ModelConfig& mcfg,
                                      const TrainConfig& tcfg);

struct RateRow {
  double rate = 0.0;
  ExperimentReport report;
};

/// Full simulate -> train -> evaluate pipeline per packet rate.
std::vector<RateRow> run_rate_sweep(const ExperimentConfig& cfg, std::span<const double> rates,
                                    const std::function<void(const std::string&)>& progress = {});

struct RateTrend {
  bool monotone = false;   // each step non-increasing within the tolerance
  bool plateau = false;    // |e(last) - e(previous)| <= tolerance
  double tolerance = 0.05;
};
RateTrend rate_trend(std::span<const RateRow> rows, double tolerance = 0.05);

struct CrossCheckResult {
  std::size_t segments = 0;          // segments with at least one usable frame
  std::size_t skipped_short = 0;
  std::size_t direct_within = 0;     // shortcut features inside the cells
  std::size_t extracted_within = 0;  // CSI-extracted features inside the cells
  /// Per event and slot: segments checked and segments whose mean fell inside.
  std::array<std::array<std::pair<std::size_t, std::size_t>, kNumSlots>, kNumRealEvents> per_cell{};
  double direct_fraction() const { return segments ? static_cast<double>(direct_within) / segments : 0.0; }
  double extracted_fraction() const { return segments ? static_cast<double>(extracted_within) / segments : 0.0; }
};

/// Simulates `n` sequences, synthesizes CSI along each trajectory and
/// extracts features. For every real-event segment and interval cell, the
/// mean over frames whose window lies inside the segment is tested against
/// the cell; PLCR cells list magnitudes and are tested on |PLCR|. A segment
/// counts when all of its checked cells hold. Label runs shorter than
/// `min_segment_s` (default 1 s) are speed-threshold transients at the ends of
/// walks and are skipped.
CrossCheckResult cross_check(const ExperimentConfig& cfg, std::size_t n, std::uint64_t master_seed,
                             std::optional<double> min_segment_s = std::nullopt);

}  // namespace unifi
