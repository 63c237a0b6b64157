#include "unifi/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "unifi/csi.hpp"
#include "unifi/error.hpp"
#include "unifi/rng.hpp"

namespace unifi {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRowTol = 1e-9;
constexpr double kDoorTol = 1e-9;

// Stream indices under a sequence seed.
constexpr std::uint64_t kStreamEvents = 0;
constexpr std::uint64_t kStreamKinematics = 1;
constexpr std::uint64_t kStreamFeatures = 2;
constexpr std::uint64_t kStreamLength = 3;

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

double heading_of(const Point2& d) { return std::atan2(d.y(), d.x()); }

Point2 clamp_to(const Rect& b, Point2 p) {
  p.x() = std::clamp(p.x(), b.x_min, b.x_max);
  p.y() = std::clamp(p.y(), b.y_min, b.y_max);
  return p;
}

/// Specular reflection at the walls; flips the matching heading component.
void reflect(const Rect& b, Point2& p, double& heading) {
  for (int pass = 0; pass < 4 && !b.contains(p); ++pass) {
    if (p.x() < b.x_min) {
      p.x() = 2.0 * b.x_min - p.x();
      heading = kPi - heading;
    } else if (p.x() > b.x_max) {
      p.x() = 2.0 * b.x_max - p.x();
      heading = kPi - heading;
    }
    if (p.y() < b.y_min) {
      p.y() = 2.0 * b.y_min - p.y();
      heading = -heading;
    } else if (p.y() > b.y_max) {
      p.y() = 2.0 * b.y_max - p.y();
      heading = -heading;
    }
  }
  p = clamp_to(b, p);
  heading = wrap_angle(heading);
}

double uniform_in(Rng& rng, const Interval& iv) {
  if (iv.hi <= iv.lo) return iv.lo;
  return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::size_t steps_for(double seconds, double f_s) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(seconds * f_s)));
}

}  // namespace

TransitionMatrix::TransitionMatrix() : rows_{} {
  for (std::size_t i = 0; i < kNumSimEvents; ++i) rows_[i][i] = 1.0;
}

TransitionMatrix::TransitionMatrix(const Rows& rows) : rows_(rows) {
  for (std::size_t i = 0; i < kNumSimEvents; ++i) {
    double sum = 0.0;
    for (double p : rows_[i]) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw ConfigError("transition matrix row " + std::to_string(i) + " has a negative or non-finite entry");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTol) {
      throw ConfigError("transition matrix row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

TransitionMatrix TransitionMatrix::uniform() {
  Rows rows{};
  for (auto& r : rows) r.fill(1.0 / static_cast<double>(kNumSimEvents));
  return TransitionMatrix(rows);
}

std::array<double, kNumSimEvents> TransitionMatrix::stationary() const {
  std::array<double, kNumSimEvents> pi{};
  pi.fill(1.0 / static_cast<double>(kNumSimEvents));
  for (int iter = 0; iter < 1'000'000; ++iter) {
    std::array<double, kNumSimEvents> next{};
    for (std::size_t i = 0; i < kNumSimEvents; ++i) {
      next[i] += 0.5 * pi[i];
      for (std::size_t j = 0; j < kNumSimEvents; ++j) next[j] += 0.5 * pi[i] * rows_[i][j];
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < kNumSimEvents; ++i) diff += std::abs(next[i] - pi[i]);
    pi = next;
    if (diff < 1e-10) break;
  }
  return pi;
}

void EventModel::validate() const {
  for (double d : mean_dwell_s) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("event model: mean dwell must be positive");
  }
}

EventModel default_event_model() {
  // rows/cols: leave, enter, walk, still, local motion
  EventModel m;
  m.transitions = TransitionMatrix({{
      {0.00, 0.45, 0.15, 0.30, 0.10},
      {0.04, 0.00, 0.36, 0.45, 0.15},
      {0.14, 0.02, 0.16, 0.48, 0.20},
      {0.08, 0.02, 0.55, 0.10, 0.25},
      {0.06, 0.02, 0.42, 0.35, 0.15},
  }});
  m.mean_dwell_s = {5.0, 5.0, 3.0, 8.0, 4.0};
  return m;
}

void RoomSpec::validate() const {
  const Rect& b = boundary;
  if (!(b.x_max > b.x_min && b.y_max > b.y_min)) throw ConfigError("room: boundary must have positive area");
  if (!b.contains(door, kDoorTol)) throw ConfigError("room: door lies outside the boundary");
  const bool on_edge = std::abs(door.x() - b.x_min) < kDoorTol || std::abs(door.x() - b.x_max) < kDoorTol ||
                       std::abs(door.y() - b.y_min) < kDoorTol || std::abs(door.y() - b.y_max) < kDoorTol;
  if (!on_edge) throw ConfigError("room: door must lie on the boundary perimeter");
  if ((tx - rx).norm() <= 0.0) throw ConfigError("room: tx and rx must differ");
  if (!b.contains(tx, kDoorTol) || !b.contains(rx, kDoorTol)) throw ConfigError("room: tx and rx must lie in the room");
}

Point2 RoomSpec::door_outward_normal() const {
  const Rect& b = boundary;
  if (std::abs(door.x() - b.x_min) < kDoorTol) return {-1.0, 0.0};
  if (std::abs(door.x() - b.x_max) < kDoorTol) return {1.0, 0.0};
  if (std::abs(door.y() - b.y_min) < kDoorTol) return {0.0, -1.0};
  return {0.0, 1.0};
}

void KinematicParams::validate() const {
  for (const Interval* iv : {&a_range, &vmax_range, &local_motion_plcr_range, &entry_depth}) {
    if (!(iv->lo <= iv->hi)) throw ConfigError("kinematics: interval with lo > hi");
  }
  if (!(a_range.lo > 0.0) || !(vmax_range.lo > 0.0)) throw ConfigError("kinematics: accel and vmax must be positive");
  if (!(walk_speed_threshold > 0.0) || !(local_extent_threshold > 0.0)) {
    throw ConfigError("kinematics: thresholds must be positive");
  }
  if (!(turn_rate_hz >= 0.0) || !(max_turn_rad >= 0.0) || !(hallway_length > 0.0)) {
    throw ConfigError("kinematics: turn and hallway parameters out of range");
  }
}

double KinematicParams::local_motion_max_speed() const {
  // PLCR is at most twice the target speed.
  return std::min(0.5 * local_motion_plcr_range.hi, 0.75 * walk_speed_threshold);
}

void FeatureSynthParams::validate() const {
  if (!(ar_coeff >= 0.0 && ar_coeff < 1.0)) throw ConfigError("synthesis: ar_coeff must lie in [0, 1)");
  if (!(plcr_noise_std >= 0.0)) throw ConfigError("synthesis: plcr_noise_std must be >= 0");
  windows.validate();
}

void SimulationConfig::validate() const {
  events.validate();
  room.validate();
  kin.validate();
  table.validate();
  synth.validate();
  if (!(f_s > 0.0)) throw ConfigError("simulation: f_s must be positive");
  if (!(length_s.lo > 0.0 && length_s.lo <= length_s.hi)) throw ConfigError("simulation: bad length distribution");
}

void LabeledSequence::validate() const {
  const std::size_t n = sim.size();
  if (real.size() != n || traj.size() != n || features.size() != n || traj.speed.size() != n ||
      traj.heading.size() != n || traj.inside.size() != n) {
    throw DataError("sequence " + std::to_string(id) + ": series lengths differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if ((real[i] == RealEvent::Absence) != (traj.inside[i] == 0)) {
      throw DataError("sequence " + std::to_string(id) + ": absence label disagrees with inside flag at step " +
                      std::to_string(i));
    }
  }
}

bool LabeledSequence::operator==(const LabeledSequence& o) const {
  return id == o.id && f_s == o.f_s && sim == o.sim && real == o.real && traj.f_s == o.traj.f_s &&
         traj.pos == o.traj.pos && traj.speed == o.traj.speed && traj.heading == o.traj.heading &&
         traj.inside == o.traj.inside && features == o.features;
}

std::vector<Segment> sample_segments(const EventModel& model, std::size_t length, double f_s, std::uint64_t seed) {
  model.validate();
  if (length < 1) throw ConfigError("sample_sim_events: length must be >= 1");
  if (!(f_s > 0.0)) throw ConfigError("sample_sim_events: f_s must be positive");
  Rng rng(seed);
  const auto pi = model.transitions.stationary();
  auto draw = [&](const std::array<double, kNumSimEvents>& w) {
    std::discrete_distribution<int> d(w.begin(), w.end());
    return static_cast<SimEvent>(d(rng));
  };
  std::vector<Segment> segments;
  std::size_t emitted = 0;
  SimEvent event = draw(pi);
  while (emitted < length) {
    const double mean_steps = std::max(1.0, model.mean_dwell_s[static_cast<std::size_t>(event)] * f_s);
    std::geometric_distribution<std::size_t> dwell(1.0 / mean_steps);
    const std::size_t len = std::min(length - emitted, 1 + dwell(rng));
    segments.push_back({event, len});
    emitted += len;
    event = draw(model.transitions.rows()[static_cast<std::size_t>(event)]);
  }
  return segments;
}

std::vector<SimEvent> sample_sim_events(const EventModel& model, std::size_t length, double f_s, std::uint64_t seed) {
  std::vector<SimEvent> out;
  out.reserve(length);
  for (const auto& s : sample_segments(model, length, f_s, seed)) out.insert(out.end(), s.length, s.event);
  return out;
}

SpeedProfile::SpeedProfile(double accel, double vmax, double duration)
    : accel_(accel), peak_(vmax), duration_(std::max(0.0, duration)), ramp_(0.0) {
  if (!(accel > 0.0) || !(vmax > 0.0)) throw ConfigError("speed profile: accel and vmax must be positive");
  ramp_ = peak_ / accel_;
  if (2.0 * ramp_ > duration_) {
    ramp_ = 0.5 * duration_;
    peak_ = accel_ * ramp_;
  }
}

double SpeedProfile::speed(double t) const {
  if (t <= 0.0 || t >= duration_) return 0.0;
  if (t < ramp_) return accel_ * t;
  if (t > duration_ - ramp_) return accel_ * (duration_ - t);
  return peak_;
}

double SpeedProfile::distance(double t) const {
  t = std::clamp(t, 0.0, duration_);
  const double ramp_dist = 0.5 * accel_ * ramp_ * ramp_;
  if (t <= ramp_) return 0.5 * accel_ * t * t;
  if (t <= duration_ - ramp_) return ramp_dist + peak_ * (t - ramp_);
  const double total = 2.0 * ramp_dist + peak_ * (duration_ - 2.0 * ramp_);
  const double rest = duration_ - t;
  return total - 0.5 * accel_ * rest * rest;
}

std::optional<double> SpeedProfile::vmax_for_distance(double accel, double duration, double dist) {
  const double disc = accel * accel * duration * duration - 4.0 * accel * dist;
  if (disc < 0.0) return std::nullopt;
  return 0.5 * (accel * duration - std::sqrt(disc));
}

Trajectory expand_kinematics(std::span<const SimEvent> sim, const RoomSpec& room, const KinematicParams& kin,
                             double f_s, std::uint64_t seed) {
  if (!(f_s > 0.0)) throw ConfigError("expand_kinematics: f_s must be positive");
  if (sim.empty()) throw ConfigError("expand_kinematics: empty event sequence");
  room.validate();
  kin.validate();

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Rect& b = room.boundary;
  const double dt = 1.0 / f_s;
  const Point2 n_out = room.door_outward_normal();
  const Point2 n_in = -n_out;
  const double turn_prob = std::min(1.0, kin.turn_rate_hz / f_s);

  Trajectory traj;
  traj.f_s = f_s;
  traj.reserve(sim.size());

  Point2 pos;
  double heading = 0.0;
  bool inside = true;
  if (sim.front() == SimEvent::EnterRoom) {
    pos = room.door + n_out * kin.hallway_length;
    heading = heading_of(n_in);
    inside = false;
  } else {
    const double mx = std::min(0.3, 0.25 * b.width());
    const double my = std::min(0.3, 0.25 * b.height());
    pos = {uniform_in(rng, {b.x_min + mx, b.x_max - mx}), uniform_in(rng, {b.y_min + my, b.y_max - my})};
    heading = uniform_in(rng, {-kPi, kPi});
  }

  auto hold = [&](std::size_t steps) {
    for (std::size_t k = 0; k < steps; ++k) traj.push(pos, 0.0, heading, inside);
  };

  // Cruise speed for a walk of `dist` meters in `duration` seconds, clamped
  // to the configured range.
  auto plan = [&](double accel, double duration, double dist) {
    const auto need = SpeedProfile::vmax_for_distance(accel, duration, dist);
    if (!need) return kin.vmax_range.hi;
    return std::clamp(*need, kin.vmax_range.lo, kin.vmax_range.hi);
  };

  std::size_t i0 = 0;
  while (i0 < sim.size()) {
    std::size_t len = 1;
    while (i0 + len < sim.size() && sim[i0 + len] == sim[i0]) ++len;
    SimEvent event = sim[i0];
    const double duration = static_cast<double>(len) * dt;
    if (event == SimEvent::EnterRoom && inside) event = SimEvent::WalkWithinRoom;

    if (!inside && event != SimEvent::EnterRoom) {
      hold(len);  // away from the room
    } else if (event == SimEvent::RemainStill) {
      hold(len);
    } else if (event == SimEvent::WalkWithinRoom) {
      const double accel = uniform_in(rng, kin.a_range);
      const SpeedProfile prof(accel, uniform_in(rng, kin.vmax_range), duration);
      heading = uniform_in(rng, {-kPi, kPi});
      for (std::size_t k = 0; k < len; ++k) {
        if (unit(rng) < turn_prob) heading = wrap_angle(heading + uniform_in(rng, {-kin.max_turn_rad, kin.max_turn_rad}));
        const double disp = prof.distance(static_cast<double>(k + 1) * dt) - prof.distance(static_cast<double>(k) * dt);
        traj.push(pos, disp / dt, heading, true);
        pos += disp * Point2(std::cos(heading), std::sin(heading));
        reflect(b, pos, heading);
      }
    } else if (event == SimEvent::LeaveThroughDoor) {
      const double accel = uniform_in(rng, kin.a_range);
      const double to_door = (room.door - pos).norm();
      const SpeedProfile prof(accel, plan(accel, duration, to_door + 0.5), duration);
      bool approaching = true;
      heading = to_door > 1e-9 ? heading_of(room.door - pos) : heading_of(n_out);
      for (std::size_t k = 0; k < len; ++k) {
        const double disp = prof.distance(static_cast<double>(k + 1) * dt) - prof.distance(static_cast<double>(k) * dt);
        traj.push(pos, disp / dt, heading, inside);
        if (approaching) {
          const double remaining = (room.door - pos).norm();
          if (disp < remaining) {
            pos += disp * (room.door - pos) / remaining;
          } else {
            pos = room.door + n_out * (disp - remaining);
            approaching = false;
            inside = false;
            heading = heading_of(n_out);
          }
        } else {
          pos += disp * n_out;
        }
      }
    } else if (event == SimEvent::EnterRoom) {
      const double accel = uniform_in(rng, kin.a_range);
      const double to_door = (room.door - pos).norm();
      const double depth = uniform_in(rng, kin.entry_depth);
      const SpeedProfile prof(accel, plan(accel, duration, to_door + depth), duration);
      bool approaching = true;
      heading = to_door > 1e-9 ? heading_of(room.door - pos) : heading_of(n_in);
      for (std::size_t k = 0; k < len; ++k) {
        const double disp = prof.distance(static_cast<double>(k + 1) * dt) - prof.distance(static_cast<double>(k) * dt);
        traj.push(pos, disp / dt, heading, inside);
        if (approaching) {
          const double remaining = (room.door - pos).norm();
          if (disp < remaining) {
            pos += disp * (room.door - pos) / remaining;
          } else {
            pos = room.door + n_in * (disp - remaining);
            approaching = false;
            inside = true;
            heading = heading_of(n_in);
            reflect(b, pos, heading);
          }
        } else {
          pos += disp * Point2(std::cos(heading), std::sin(heading));
          reflect(b, pos, heading);
        }
      }
    } else {  // LocalMotion
      const Point2 anchor = pos;
      const double v_max = kin.local_motion_max_speed();
      std::array<double, 2> omega{uniform_in(rng, {1.0, 3.0}), uniform_in(rng, {1.0, 3.0})};
      std::array<double, 2> amp{};
      for (std::size_t c = 0; c < 2; ++c) {
        amp[c] = std::min(uniform_in(rng, {0.25, 0.5}) * kin.local_extent_threshold,
                          v_max / (omega[c] * std::numbers::sqrt2));
      }
      auto at = [&](double t) {
        return clamp_to(b, anchor + Point2(amp[0] * std::sin(omega[0] * t), amp[1] * std::sin(omega[1] * t)));
      };
      for (std::size_t k = 0; k < len; ++k) {
        const Point2 p0 = at(static_cast<double>(k) * dt);
        const Point2 p1 = at(static_cast<double>(k + 1) * dt);
        const Point2 d = p1 - p0;
        if (d.norm() > 0.0) heading = heading_of(d);
        traj.push(p0, d.norm() / dt, heading, true);
        pos = p1;
      }
    }
    i0 += len;
  }
  return traj;
}

std::vector<RealEvent> map_to_real_events(std::span<const SimEvent> sim, const Trajectory& traj,
                                          const KinematicParams& kin) {
  if (sim.size() != traj.size()) throw DataError("map_to_real_events: series lengths differ");
  std::vector<RealEvent> out(sim.size());
  for (std::size_t i = 0; i < sim.size(); ++i) {
    if (traj.inside[i] == 0) {
      out[i] = RealEvent::Absence;
    } else if (traj.speed[i] >= kin.walk_speed_threshold) {
      out[i] = RealEvent::Walking;
    } else if (sim[i] == SimEvent::LocalMotion) {
      out[i] = RealEvent::LocalMotion;
    } else {
      out[i] = RealEvent::Stillness;
    }
  }
  return out;
}

std::vector<FeatureFrame> synthesize_features(std::span<const RealEvent> real, const Trajectory& traj,
                                              const FeatureRangeTable& table, const RoomSpec& room, double f_s,
                                              std::uint64_t seed, const FeatureSynthParams& params) {
  if (real.size() != traj.size()) throw DataError("synthesize_features: series lengths differ");
  if (!(f_s > 0.0)) throw ConfigError("synthesize_features: f_s must be positive");
  params.validate();
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rho = params.ar_coeff;
  const double innov = std::sqrt(1.0 - rho * rho);

  std::array<std::size_t, kNumSlots> warmup{};
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    warmup[s] = params.warmup_sentinel ? steps_for(params.windows.window_of(static_cast<Slot>(s)), f_s) : 0;
  }

  std::vector<FeatureFrame> out(real.size());
  std::array<double, kNumSlots> z{};
  for (std::size_t i = 0; i < real.size(); ++i) {
    const RealEvent e = real[i];
    const bool reset = i == 0 || e != real[i - 1];
    FeatureFrame& f = out[i];
    f.ts = static_cast<double>(i) / f_s;
    for (std::size_t s = 0; s < kNumSlots; ++s) {
      const RangeCell& cell = table.lookup(e, static_cast<Slot>(s));
      double value;
      if (const auto* iv = std::get_if<Interval>(&cell)) {
        z[s] = reset ? gauss(rng) : rho * z[s] + innov * gauss(rng);
        value = iv->lo + iv->width() * standard_normal_cdf(z[s]);
      } else {
        double rr = 0.0;
        try {
          rr = range_rate(room.tx, room.rx, traj.pos[i], traj.velocity(i));
        } catch (const GeometryError&) {
          rr = 0.0;
        }
        value = rr + params.plcr_noise_std * gauss(rng);
      }
      f.v[s] = i + 1 < warmup[s] ? kSentinel : value;
    }
  }
  return out;
}

LabeledSequence generate_sequence(const SimulationConfig& cfg, std::uint64_t master_seed, std::uint64_t index,
                                  std::size_t length) {
  cfg.validate();
  const std::uint64_t seq_seed = derive_seed(master_seed, index);
  LabeledSequence seq;
  seq.id = index;
  seq.f_s = cfg.f_s;
  seq.sim = sample_sim_events(cfg.events, length, cfg.f_s, derive_seed(seq_seed, kStreamEvents));
  seq.traj = expand_kinematics(seq.sim, cfg.room, cfg.kin, cfg.f_s, derive_seed(seq_seed, kStreamKinematics));
  seq.real = map_to_real_events(seq.sim, seq.traj, cfg.kin);
  seq.features = synthesize_features(seq.real, seq.traj, cfg.table, cfg.room, cfg.f_s,
                                     derive_seed(seq_seed, kStreamFeatures), cfg.synth);
  return seq;
}

LabeledSequence generate_sequence(const SimulationConfig& cfg, std::uint64_t master_seed, std::uint64_t index) {
  Rng rng(derive_seed(derive_seed(master_seed, index), kStreamLength));
  const double seconds = uniform_in(rng, cfg.length_s);
  return generate_sequence(cfg, master_seed, index, steps_for(seconds, cfg.f_s));
}

void ClassBalance::add(std::span<const RealEvent> labels) {
  for (RealEvent e : labels) ++counts[static_cast<std::size_t>(e)];
  total += labels.size();
}

double ClassBalance::fraction(RealEvent e) const {
  return total == 0 ? 0.0 : static_cast<double>(counts[static_cast<std::size_t>(e)]) / static_cast<double>(total);
}

std::string ClassBalance::report() const {
  std::ostringstream os;
  os << "steps=" << total;
  for (RealEvent e : kAllRealEvents) os << ' ' << to_string(e) << '=' << fraction(e);
  return os.str();
}

Dataset generate_dataset(std::size_t n_sequences, const SimulationConfig& cfg, std::uint64_t master_seed) {
  if (n_sequences < 1) throw ConfigError("generate_dataset: need at least one sequence");
  Dataset ds;
  ds.sequences.reserve(n_sequences);
  for (std::size_t i = 0; i < n_sequences; ++i) {
    ds.sequences.push_back(generate_sequence(cfg, master_seed, i));
    ds.balance.add(ds.sequences.back().real);
  }
  return ds;
}

}  // namespace unifi
