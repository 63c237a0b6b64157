#include "unifi/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unifi/error.hpp"

namespace unifi {
namespace {

constexpr std::array<std::string_view, kNumRealEvents> kRealNames = {
    "absence", "stillness", "local_motion", "walking"};
constexpr std::array<std::string_view, kNumSimEvents> kSimNames = {
    "leave_through_door", "enter_room", "walk_within_room", "remain_still", "local_motion"};
constexpr std::array<std::string_view, 3> kDescriptorNames = {"corr", "dser", "plcr"};
constexpr std::array<std::string_view, kNumSlots> kSlotKeys = {"corr_s", "dser_s", "plcr", "corr_l", "dser_l"};

}  // namespace

std::string_view to_string(RealEvent e) { return kRealNames.at(static_cast<std::size_t>(e)); }
std::string_view to_string(SimEvent e) { return kSimNames.at(static_cast<std::size_t>(e)); }
std::string_view to_string(Descriptor d) { return kDescriptorNames.at(static_cast<std::size_t>(d)); }

RealEvent real_event_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kRealNames.size(); ++i) {
    if (kRealNames[i] == name) return static_cast<RealEvent>(i);
  }
  throw ConfigError("unknown real event '" + std::string(name) + "'");
}

SimEvent sim_event_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kSimNames.size(); ++i) {
    if (kSimNames[i] == name) return static_cast<SimEvent>(i);
  }
  throw ConfigError("unknown simulated event '" + std::string(name) + "'");
}

RealEvent real_event_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumRealEvents)) {
    throw DataError("real event index out of range: " + std::to_string(index));
  }
  return static_cast<RealEvent>(index);
}

SimEvent sim_event_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumSimEvents)) {
    throw DataError("simulated event index out of range: " + std::to_string(index));
  }
  return static_cast<SimEvent>(index);
}

Descriptor descriptor_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kDescriptorNames.size(); ++i) {
    if (kDescriptorNames[i] == name) return static_cast<Descriptor>(i);
  }
  throw ConfigError("unknown feature descriptor '" + std::string(name) + "'");
}

std::string_view slot_key(Slot s) { return kSlotKeys[static_cast<std::size_t>(s)]; }

Slot slot_from_key(std::string_view key) {
  for (std::size_t i = 0; i < kSlotKeys.size(); ++i) {
    if (kSlotKeys[i] == key) return static_cast<Slot>(i);
  }
  throw ConfigError("unknown feature slot '" + std::string(key) + "'");
}

std::string to_string(const FeatureKind& f) {
  std::ostringstream os;
  os << to_string(f.descriptor) << '@' << f.window_s << 's';
  return os.str();
}

const std::array<FeatureKind, kNumSlots>& canonical_features() {
  static const std::array<FeatureKind, kNumSlots> kCanonical = {{
      {Descriptor::SubcarrierCorr, 0.5},
      {Descriptor::Dser, 0.5},
      {Descriptor::Plcr, 0.1},
      {Descriptor::SubcarrierCorr, 2.0},
      {Descriptor::Dser, 2.0},
  }};
  return kCanonical;
}

std::optional<std::size_t> slot_of(const FeatureKind& f) {
  const auto& all = canonical_features();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] == f) return i;
  }
  return std::nullopt;
}

void TaskSpec::validate() const {
  if (name.empty()) throw ConfigError("task with empty name");
  if (events.empty()) throw ConfigError("task '" + name + "' has an empty event subset");
  for (const auto& f : features) {
    if (!(f.window_s > 0.0)) throw ConfigError("task '" + name + "': window must be positive");
    if (!slot_of(f)) {
      throw ConfigError("task '" + name + "': feature " + to_string(f) + " is not in the canonical set");
    }
  }
}

TaskSetSpec compose_task_sets(std::span<const TaskSpec> tasks) {
  if (tasks.empty()) throw ConfigError("cannot compose an empty task list");
  return compose_task_sets(TaskSetSpec{}, tasks);
}

TaskSetSpec compose_task_sets(const TaskSetSpec& base, std::span<const TaskSpec> more) {
  TaskSetSpec out = base;
  for (const auto& t : more) {
    t.validate();
    out.events.insert(t.events.begin(), t.events.end());
    out.features.insert(t.features.begin(), t.features.end());
    out.has_position = out.has_position || t.has_position;
    const bool seen = std::any_of(out.tasks.begin(), out.tasks.end(),
                                  [&](const TaskSpec& x) { return x.name == t.name; });
    if (!seen) out.tasks.push_back(t);
  }
  if (out.tasks.empty()) throw ConfigError("cannot compose an empty task list");
  return out;
}

std::vector<TaskSpec> default_tasks() {
  const auto& f = canonical_features();
  const std::set<RealEvent> all(kAllRealEvents.begin(), kAllRealEvents.end());
  const auto slot = [&](Slot s) { return f[static_cast<std::size_t>(s)]; };
  return {
      TaskSpec{"tracking", all, {slot(Slot::Plcr), slot(Slot::CorrShort), slot(Slot::DserShort)}, true},
      TaskSpec{"presence", all, {slot(Slot::CorrShort), slot(Slot::CorrLong), slot(Slot::DserLong)}, false},
      TaskSpec{"state_recognition", all, std::set<FeatureKind>(f.begin(), f.end()), false},
  };
}

const RangeCell& FeatureRangeTable::lookup(RealEvent e, Slot s) const {
  const auto& cell = cells_.at(static_cast<std::size_t>(e)).at(static_cast<std::size_t>(s));
  if (!cell) throw ConfigError("range table cell is not populated");
  return *cell;
}

const RangeCell& FeatureRangeTable::lookup(RealEvent e, const FeatureKind& f) const {
  const auto s = slot_of(f);
  if (!s) throw ConfigError("feature " + to_string(f) + " is not in the canonical set");
  return lookup(e, static_cast<Slot>(*s));
}

void FeatureRangeTable::set(RealEvent e, Slot s, RangeCell cell) {
  cells_.at(static_cast<std::size_t>(e)).at(static_cast<std::size_t>(s)) = std::move(cell);
}

void FeatureRangeTable::validate() const {
  for (std::size_t e = 0; e < kNumRealEvents; ++e) {
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      const auto& cell = cells_[e][s];
      const std::string where = std::string(to_string(static_cast<RealEvent>(e))) + "/" +
                                to_string(canonical_features()[s]);
      if (!cell) throw ConfigError("range table cell " + where + " is missing");
      if (const auto* iv = std::get_if<Interval>(&*cell)) {
        if (!std::isfinite(iv->lo) || !std::isfinite(iv->hi) || iv->lo > iv->hi) {
          throw ConfigError("range table cell " + where + " needs finite lo <= hi");
        }
      } else if (static_cast<Slot>(s) != Slot::Plcr) {
        throw ConfigError("range table cell " + where + ": the geometric model only produces PLCR");
      }
    }
  }
}

std::size_t FeatureRangeTable::geometric_cell_count() const {
  std::size_t n = 0;
  for (const auto& row : cells_) {
    for (const auto& cell : row) {
      if (cell && std::holds_alternative<GeometricModel>(*cell)) ++n;
    }
  }
  return n;
}

FeatureRangeTable default_range_table() {
  // rows: absence, stillness, local motion, walking
  // cols: corr@0.5, dser@0.5, plcr@0.1, corr@2, dser@2
  const std::array<std::array<Interval, kNumSlots>, kNumRealEvents> iv = {{
      {{{0.1, 0.3}, {-6.0, -4.0}, {0.0, 0.1}, {0.1, 0.3}, {-6.0, -4.0}}},
      {{{0.2, 0.7}, {-5.2, -4.0}, {0.0, 0.1}, {0.4, 0.7}, {-5.0, -2.5}}},
      {{{0.6, 1.0}, {-4.0, -1.0}, {0.0, 0.3}, {0.6, 1.0}, {-4.0, 0.0}}},
      {{{0.6, 1.0}, {-4.0, -1.0}, {0.0, 0.0}, {0.6, 1.0}, {-4.0, 0.0}}},
  }};
  FeatureRangeTable t;
  for (std::size_t e = 0; e < kNumRealEvents; ++e) {
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      t.set(static_cast<RealEvent>(e), static_cast<Slot>(s), iv[e][s]);
    }
  }
  t.set(RealEvent::Walking, Slot::Plcr, GeometricModel{});
  return t;
}

}  // namespace unifi
