#pragma once

// Shared vocabulary: event sets, feature sets, tasks and the per-event
// feature range table that drives the forward model.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace unifi {

/// Observable human states. Indices are fixed for confusion-matrix rows.
enum class RealEvent : std::uint8_t { Absence = 0, Stillness = 1, LocalMotion = 2, Walking = 3 };
inline constexpr std::size_t kNumRealEvents = 4;
inline constexpr std::array<RealEvent, kNumRealEvents> kAllRealEvents = {
    RealEvent::Absence, RealEvent::Stillness, RealEvent::LocalMotion, RealEvent::Walking};

/// Behavioral primitives driven by the Markov chain.
enum class SimEvent : std::uint8_t {
  LeaveThroughDoor = 0,
  EnterRoom = 1,
  WalkWithinRoom = 2,
  RemainStill = 3,
  LocalMotion = 4,
};
inline constexpr std::size_t kNumSimEvents = 5;

std::string_view to_string(RealEvent e);
std::string_view to_string(SimEvent e);
/// Throws ConfigError on an unknown name or an out-of-range index.
RealEvent real_event_from_string(std::string_view name);
SimEvent sim_event_from_string(std::string_view name);
RealEvent real_event_from_index(int index);
SimEvent sim_event_from_index(int index);

constexpr int index_of(RealEvent e) { return static_cast<int>(e); }
constexpr int index_of(SimEvent e) { return static_cast<int>(e); }

enum class Descriptor : std::uint8_t { SubcarrierCorr = 0, Dser = 1, Plcr = 2 };

std::string_view to_string(Descriptor d);
Descriptor descriptor_from_string(std::string_view name);

/// A descriptor evaluated over a window of `window_s` seconds.
struct FeatureKind {
  Descriptor descriptor = Descriptor::SubcarrierCorr;
  double window_s = 0.5;

  auto operator<=>(const FeatureKind&) const = default;
};

std::string to_string(const FeatureKind& f);

/// Slot order of a feature frame; matches the canonical feature set.
enum class Slot : std::uint8_t { CorrShort = 0, DserShort = 1, Plcr = 2, CorrLong = 3, DserLong = 4 };
inline constexpr std::size_t kNumSlots = 5;

/// Short record key of a slot ("corr_s", "dser_s", "plcr", "corr_l", "dser_l").
std::string_view slot_key(Slot s);
/// Throws ConfigError on an unknown key.
Slot slot_from_key(std::string_view key);

/// The five canonical features, in slot order.
const std::array<FeatureKind, kNumSlots>& canonical_features();
/// Slot index of a feature, or nullopt when it is not canonical.
std::optional<std::size_t> slot_of(const FeatureKind& f);

/// A single sensing task q with its event subset S(q) and feature subset F(q).
struct TaskSpec {
  std::string name;
  std::set<RealEvent> events;
  std::set<FeatureKind> features;
  bool has_position = false;

  /// Throws ConfigError when the subsets violate the task invariants.
  void validate() const;
};

/// Union-composed multi-task description: S(Q), F(Q) and the member tasks.
struct TaskSetSpec {
  std::vector<TaskSpec> tasks;
  std::set<RealEvent> events;
  std::set<FeatureKind> features;
  bool has_position = false;

  /// Equality of the composed sets; task order is irrelevant.
  bool same_sets(const TaskSetSpec& other) const {
    return events == other.events && features == other.features &&
           has_position == other.has_position;
  }
};

TaskSetSpec compose_task_sets(std::span<const TaskSpec> tasks);
/// Composes an already-composed set with further tasks.
TaskSetSpec compose_task_sets(const TaskSetSpec& base, std::span<const TaskSpec> more);

/// Tracking, presence detection and state recognition.
std::vector<TaskSpec> default_tasks();

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Marker for a cell whose value comes from the geometric range-rate model.
struct GeometricModel {
  bool operator==(const GeometricModel&) const = default;
};

using RangeCell = std::variant<Interval, GeometricModel>;

/// Empirical per-event feature ranges (4 events x 5 canonical features).
class FeatureRangeTable {
 public:
  FeatureRangeTable() = default;

  const RangeCell& lookup(RealEvent e, Slot s) const;
  /// Throws ConfigError for a non-canonical feature.
  const RangeCell& lookup(RealEvent e, const FeatureKind& f) const;
  void set(RealEvent e, Slot s, RangeCell cell);

  /// Checks every cell is populated with lo <= hi and that geometric cells
  /// only appear in the PLCR column.
  void validate() const;
  std::size_t geometric_cell_count() const;

  bool operator==(const FeatureRangeTable&) const = default;

 private:
  std::array<std::array<std::optional<RangeCell>, kNumSlots>, kNumRealEvents> cells_{};
};

FeatureRangeTable default_range_table();

}  // namespace unifi
