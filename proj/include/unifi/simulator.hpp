#pragma once

// Modeling track: Markov behavioral primitives -> kinematic trajectories ->
// real-event labels -> per-step synthetic features.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unifi/domain.hpp"
#include "unifi/features.hpp"
#include "unifi/trajectory.hpp"

namespace unifi {

/// Segment-level first-order Markov chain over SimEvent (row-stochastic).
class TransitionMatrix {
 public:
  using Rows = std::array<std::array<double, kNumSimEvents>, kNumSimEvents>;

  TransitionMatrix();  // identity
  /// Throws ConfigError unless every row is non-negative and sums to 1 +- 1e-9.
  explicit TransitionMatrix(const Rows& rows);

  const Rows& rows() const { return rows_; }
  double operator()(SimEvent from, SimEvent to) const {
    return rows_[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
  }
  /// Stationary distribution by power iteration on the lazy chain (M + I) / 2,
  /// converged to 1e-10 in L1.
  std::array<double, kNumSimEvents> stationary() const;

  static TransitionMatrix uniform();

  bool operator==(const TransitionMatrix&) const = default;

 private:
  Rows rows_;
};

struct EventModel {
  TransitionMatrix transitions;
  /// Mean segment dwell per SimEvent, seconds (geometric in steps).
  std::array<double, kNumSimEvents> mean_dwell_s{5.0, 5.0, 3.0, 8.0, 4.0};

  void validate() const;
};

EventModel default_event_model();

struct Segment {
  SimEvent event;
  std::size_t length;
};

struct RoomSpec {
  Rect boundary{0.0, 0.0, 4.0, 3.5};
  Point2 door{4.0, 2.6};
  Point2 tx{0.0, 0.0};
  Point2 rx{4.0, 0.0};

  /// Throws ConfigError when the door is off the perimeter or tx == rx.
  void validate() const;
  /// Unit normal of the door's wall pointing out of the room.
  Point2 door_outward_normal() const;
};

struct KinematicParams {
  Interval a_range{0.6, 1.4};
  Interval vmax_range{0.8, 1.3};
  /// Expected heading changes per second while walking; the per-step
  /// probability is turn_rate_hz / f_s.
  double turn_rate_hz = 0.5;
  double max_turn_rad = 0.6;
  Interval local_motion_plcr_range{0.0, 0.3};
  double walk_speed_threshold = 0.2;
  double local_extent_threshold = 0.3;
  /// Distance outside the door where an initially absent person starts.
  double hallway_length = 1.5;
  /// How far into the room an entering person walks past the door.
  Interval entry_depth{0.8, 2.0};

  void validate() const;
  /// Upper bound on the speed of local motion jitter.
  double local_motion_max_speed() const;
};

struct FeatureSynthParams {
  double ar_coeff = 0.9;
  /// Per-step noise on the geometric PLCR model, m/s.
  double plcr_noise_std = 0.3;
  /// Slots are NaN until their window would have filled.
  bool warmup_sentinel = true;
  WindowConfig windows{};

  void validate() const;
};

struct SimulationConfig {
  EventModel events = default_event_model();
  RoomSpec room{};
  KinematicParams kin{};
  FeatureRangeTable table = default_range_table();
  FeatureSynthParams synth{};
  double f_s = 100.0;
  /// Sequence duration in seconds, drawn uniformly.
  Interval length_s{20.0, 40.0};

  void validate() const;
};

struct LabeledSequence {
  std::uint64_t id = 0;
  double f_s = 100.0;
  std::vector<SimEvent> sim;
  std::vector<RealEvent> real;
  Trajectory traj;
  std::vector<FeatureFrame> features;

  std::size_t size() const { return sim.size(); }
  /// Throws DataError when the four series disagree in length or labels.
  void validate() const;
  bool operator==(const LabeledSequence& o) const;
};

std::vector<Segment> sample_segments(const EventModel& model, std::size_t length, double f_s, std::uint64_t seed);
std::vector<SimEvent> sample_sim_events(const EventModel& model, std::size_t length, double f_s, std::uint64_t seed);

/// Trapezoidal speed profile: accelerate at `accel` up to `vmax`, cruise,
/// decelerate to zero at `duration`; a triangle when vmax is unreachable.
class SpeedProfile {
 public:
  SpeedProfile(double accel, double vmax, double duration);
  double speed(double t) const;
  /// Distance covered over [0, t].
  double distance(double t) const;
  double peak() const { return peak_; }

  /// Cruise speed that covers `dist` in `duration`, or nullopt if impossible.
  static std::optional<double> vmax_for_distance(double accel, double duration, double dist);

 private:
  double accel_;
  double peak_;
  double duration_;
  double ramp_;
};

Trajectory expand_kinematics(std::span<const SimEvent> sim, const RoomSpec& room, const KinematicParams& kin,
                             double f_s, std::uint64_t seed);

std::vector<RealEvent> map_to_real_events(std::span<const SimEvent> sim, const Trajectory& traj,
                                          const KinematicParams& kin);

std::vector<FeatureFrame> synthesize_features(std::span<const RealEvent> real, const Trajectory& traj,
                                              const FeatureRangeTable& table, const RoomSpec& room, double f_s,
                                              std::uint64_t seed, const FeatureSynthParams& params = {});

/// Full modeling track for sequence `index` under `master_seed`.
LabeledSequence generate_sequence(const SimulationConfig& cfg, std::uint64_t master_seed, std::uint64_t index);
/// Same with a fixed number of steps.
LabeledSequence generate_sequence(const SimulationConfig& cfg, std::uint64_t master_seed, std::uint64_t index,
                                  std::size_t length);

struct ClassBalance {
  std::array<std::size_t, kNumRealEvents> counts{};
  std::size_t total = 0;

  void add(std::span<const RealEvent> labels);
  double fraction(RealEvent e) const;
  std::string report() const;
};

struct Dataset {
  std::vector<LabeledSequence> sequences;
  ClassBalance balance;
};

Dataset generate_dataset(std::size_t n_sequences, const SimulationConfig& cfg, std::uint64_t master_seed);

}  // namespace unifi
