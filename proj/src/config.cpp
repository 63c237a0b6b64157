#include "unifi/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "unifi/error.hpp"
#include "unifi/io.hpp"

namespace unifi {
namespace {

using json = nlohmann::json;

/// Walks one JSON object, remembering which keys were read so leftovers can
/// be reported as typos.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  Section sub(const char* key) {
    static const json empty = json::object();
    const json* v = raw(key);
    return Section(v ? *v : empty, path(key));
  }

  void num(const char* key, double& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  template <class T>
  void count(const char* key, T& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
      out = static_cast<T>(v->get<std::uint64_t>());
    }
  }

  void flag(const char* key, bool& out) {
    if (const json* v = raw(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const char* key, std::string& out) {
    if (const json* v = raw(key)) {
      if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void interval(const char* key, Interval& out) {
    if (const json* v = raw(key)) out = to_interval(*v, path(key));
  }

  void point(const char* key, Point2& out) {
    if (const json* v = raw(key)) {
      const auto xs = numbers(*v, path(key));
      if (xs.size() != 2) throw ConfigError(path(key) + ": expected [x, y]");
      out = Point2(xs[0], xs[1]);
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key().c_str()) + ": unknown key");
    }
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  static std::vector<double> numbers(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  static Interval to_interval(const json& v, const std::string& where) {
    const auto xs = numbers(v, where);
    if (xs.size() != 2) throw ConfigError(where + ": expected [lo, hi]");
    return {xs[0], xs[1]};
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json interval_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }
json point_json(const Point2& p) { return json::array({p.x(), p.y()}); }

void read_events(Section s, EventModel& m) {
  if (const json* t = s.raw("transitions")) {
    if (!t->is_array() || t->size() != kNumSimEvents) {
      throw ConfigError(s.path("transitions") + ": expected a 5x5 matrix");
    }
    TransitionMatrix::Rows rows{};
    for (std::size_t i = 0; i < kNumSimEvents; ++i) {
      const auto r = Section::numbers((*t)[i], s.path("transitions"));
      if (r.size() != kNumSimEvents) throw ConfigError(s.path("transitions") + ": expected a 5x5 matrix");
      std::copy(r.begin(), r.end(), rows[i].begin());
    }
    m.transitions = TransitionMatrix(rows);
  }
  if (const json* d = s.raw("mean_dwell_s")) {
    if (d->is_array()) {
      const auto xs = Section::numbers(*d, s.path("mean_dwell_s"));
      if (xs.size() != kNumSimEvents) throw ConfigError(s.path("mean_dwell_s") + ": expected 5 values");
      std::copy(xs.begin(), xs.end(), m.mean_dwell_s.begin());
    } else {
      Section ds(*d, s.path("mean_dwell_s"));
      for (std::size_t i = 0; i < kNumSimEvents; ++i) {
        const std::string key(to_string(static_cast<SimEvent>(i)));
        ds.num(key.c_str(), m.mean_dwell_s[i]);
      }
      ds.finish();
    }
  }
  s.finish();
}

json events_json(const EventModel& m) {
  json rows = json::array();
  for (const auto& r : m.transitions.rows()) rows.push_back(json(std::vector<double>(r.begin(), r.end())));
  json dwell = json::object();
  for (std::size_t i = 0; i < kNumSimEvents; ++i) {
    dwell[std::string(to_string(static_cast<SimEvent>(i)))] = m.mean_dwell_s[i];
  }
  return {{"transitions", rows}, {"mean_dwell_s", dwell}};
}

void read_ranges(Section s, FeatureRangeTable& table) {
  for (RealEvent e : kAllRealEvents) {
    const std::string ename(to_string(e));
    if (!s.has(ename.c_str())) continue;
    Section row = s.sub(ename.c_str());
    for (std::size_t k = 0; k < kNumSlots; ++k) {
      const std::string key(slot_key(static_cast<Slot>(k)));
      const json* v = row.raw(key.c_str());
      if (!v) continue;
      if (v->is_string()) {
        if (v->get<std::string>() != "model") {
          throw ConfigError(row.path(key) + ": expected [lo, hi] or \"model\"");
        }
        table.set(e, static_cast<Slot>(k), GeometricModel{});
      } else {
        table.set(e, static_cast<Slot>(k), Section::to_interval(*v, row.path(key)));
      }
    }
    row.finish();
  }
  s.finish();
}

json ranges_json(const FeatureRangeTable& table) {
  json out = json::object();
  for (RealEvent e : kAllRealEvents) {
    json row = json::object();
    for (std::size_t k = 0; k < kNumSlots; ++k) {
      const RangeCell& c = table.lookup(e, static_cast<Slot>(k));
      const std::string key(slot_key(static_cast<Slot>(k)));
      if (std::holds_alternative<GeometricModel>(c)) {
        row[key] = "model";
      } else {
        row[key] = interval_json(std::get<Interval>(c));
      }
    }
    out[std::string(to_string(e))] = row;
  }
  return out;
}

void read_windows(Section s, WindowConfig& w) {
  s.num("short_s", w.short_s);
  s.num("long_s", w.long_s);
  s.num("plcr_s", w.plcr_s);
  s.num("hop_s", w.hop_s);
  s.finish();
}

json windows_json(const WindowConfig& w) {
  return {{"short_s", w.short_s}, {"long_s", w.long_s}, {"plcr_s", w.plcr_s}, {"hop_s", w.hop_s}};
}

void read_simulation(Section s, SimulationConfig& c) {
  s.num("f_s", c.f_s);
  s.interval("length_s", c.length_s);
  read_events(s.sub("events"), c.events);
  {
    Section r = s.sub("room");
    Rect& b = c.room.boundary;
    if (const json* v = r.raw("boundary")) {
      const auto xs = Section::numbers(*v, r.path("boundary"));
      if (xs.size() != 4) throw ConfigError(r.path("boundary") + ": expected [x_min, y_min, x_max, y_max]");
      b = Rect{xs[0], xs[1], xs[2], xs[3]};
    }
    r.point("door", c.room.door);
    r.point("tx", c.room.tx);
    r.point("rx", c.room.rx);
    r.finish();
  }
  {
    Section k = s.sub("kinematics");
    KinematicParams& p = c.kin;
    k.interval("a_range", p.a_range);
    k.interval("vmax_range", p.vmax_range);
    k.num("turn_rate_hz", p.turn_rate_hz);
    k.num("max_turn_rad", p.max_turn_rad);
    k.interval("local_motion_plcr_range", p.local_motion_plcr_range);
    k.num("walk_speed_threshold", p.walk_speed_threshold);
    k.num("local_extent_threshold", p.local_extent_threshold);
    k.num("hallway_length", p.hallway_length);
    k.interval("entry_depth", p.entry_depth);
    k.finish();
  }
  read_ranges(s.sub("ranges"), c.table);
  {
    Section f = s.sub("synthesis");
    f.num("ar_coeff", c.synth.ar_coeff);
    f.num("plcr_noise_std", c.synth.plcr_noise_std);
    f.flag("warmup_sentinel", c.synth.warmup_sentinel);
    read_windows(f.sub("windows"), c.synth.windows);
    f.finish();
  }
  s.finish();
}

json simulation_json(const SimulationConfig& c) {
  const Rect& b = c.room.boundary;
  const KinematicParams& p = c.kin;
  return {
      {"f_s", c.f_s},
      {"length_s", interval_json(c.length_s)},
      {"events", events_json(c.events)},
      {"room",
       {{"boundary", json::array({b.x_min, b.y_min, b.x_max, b.y_max})},
        {"door", point_json(c.room.door)},
        {"tx", point_json(c.room.tx)},
        {"rx", point_json(c.room.rx)}}},
      {"kinematics",
       {{"a_range", interval_json(p.a_range)},
        {"vmax_range", interval_json(p.vmax_range)},
        {"turn_rate_hz", p.turn_rate_hz},
        {"max_turn_rad", p.max_turn_rad},
        {"local_motion_plcr_range", interval_json(p.local_motion_plcr_range)},
        {"walk_speed_threshold", p.walk_speed_threshold},
        {"local_extent_threshold", p.local_extent_threshold},
        {"hallway_length", p.hallway_length},
        {"entry_depth", interval_json(p.entry_depth)}}},
      {"ranges", ranges_json(c.table)},
      {"synthesis",
       {{"ar_coeff", c.synth.ar_coeff},
        {"plcr_noise_std", c.synth.plcr_noise_std},
        {"warmup_sentinel", c.synth.warmup_sentinel},
        {"windows", windows_json(c.synth.windows)}}},
  };
}

void read_radio(Section s, RadioConfig& r) {
  s.num("carrier_freq", r.carrier_freq);
  s.count("n_subcarriers", r.n_subcarriers);
  s.count("n_rx_antennas", r.n_rx_antennas);
  s.num("subcarrier_spacing", r.subcarrier_spacing);
  s.count("static_gain_seed", r.static_gain_seed);
  s.count("noise_seed", r.noise_seed);
  s.num("dyn_amplitude", r.dyn_amplitude);
  s.num("noise_std", r.noise_std);
  s.num("common_gain_std", r.common_gain_std);
  s.num("breathing_amplitude_m", r.breathing_amplitude_m);
  s.num("breathing_rate_hz", r.breathing_rate_hz);
  s.count("static_taps", r.static_taps);
  s.num("max_tap_delay_s", r.max_tap_delay_s);
  s.finish();
}

json radio_json(const RadioConfig& r) {
  return {{"carrier_freq", r.carrier_freq},
          {"n_subcarriers", r.n_subcarriers},
          {"n_rx_antennas", r.n_rx_antennas},
          {"subcarrier_spacing", r.subcarrier_spacing},
          {"static_gain_seed", r.static_gain_seed},
          {"noise_seed", r.noise_seed},
          {"dyn_amplitude", r.dyn_amplitude},
          {"noise_std", r.noise_std},
          {"common_gain_std", r.common_gain_std},
          {"breathing_amplitude_m", r.breathing_amplitude_m},
          {"breathing_rate_hz", r.breathing_rate_hz},
          {"static_taps", r.static_taps},
          {"max_tap_delay_s", r.max_tap_delay_s}};
}

void read_model(Section s, ModelConfig& m) {
  s.count("state_hidden", m.state_hidden);
  s.count("traj_hidden", m.traj_hidden);
  s.count("context", m.context);
  s.count("n_heads_attn", m.n_heads_attn);
  s.count("attn_dim", m.attn_dim);
  std::string arch = to_string(m.architecture);
  s.text("architecture", arch);
  m.architecture = architecture_from_string(arch);
  s.count("seed", m.seed);
  if (const json* f = s.raw("features")) {
    if (!f->is_array()) throw ConfigError(s.path("features") + ": expected a list of slot keys");
    m.feature_mask.fill(false);
    for (const auto& k : *f) {
      if (!k.is_string()) throw ConfigError(s.path("features") + ": expected a list of slot keys");
      m.feature_mask[static_cast<std::size_t>(slot_from_key(k.get<std::string>()))] = true;
    }
  }
  s.num("hop_s", m.hop_s);
  s.finish();
}

json model_json(const ModelConfig& m) {
  json feats = json::array();
  for (std::size_t k = 0; k < kNumSlots; ++k) {
    if (m.feature_mask[k]) feats.push_back(std::string(slot_key(static_cast<Slot>(k))));
  }
  return {{"state_hidden", m.state_hidden}, {"traj_hidden", m.traj_hidden}, {"context", m.context},
          {"n_heads_attn", m.n_heads_attn}, {"attn_dim", m.attn_dim},       {"architecture", to_string(m.architecture)},
          {"seed", m.seed},                 {"features", feats},            {"hop_s", m.hop_s}};
}

void read_train(Section s, TrainConfig& t) {
  s.count("batch_size", t.batch_size);
  s.num("learning_rate", t.learning_rate);
  s.num("lambda_pos", t.lambda_pos);
  s.num("lambda_sta", t.lambda_sta);
  if (const json* v = s.raw("epochs")) {
    if (!v->is_number_integer()) throw ConfigError(s.path("epochs") + ": expected an integer");
    t.epochs = v->get<int>();
  }
  s.num("val_fraction", t.val_fraction);
  if (const json* v = s.raw("early_stop_patience")) {
    if (!v->is_number_integer()) throw ConfigError(s.path("early_stop_patience") + ": expected an integer");
    t.early_stop_patience = v->get<int>();
  }
  std::string opt = t.optimizer == Optimizer::Adam ? "adam" : "sgd";
  s.text("optimizer", opt);
  if (opt == "adam") {
    t.optimizer = Optimizer::Adam;
  } else if (opt == "sgd") {
    t.optimizer = Optimizer::Sgd;
  } else {
    throw ConfigError(s.path("optimizer") + ": expected \"adam\" or \"sgd\"");
  }
  s.num("clip_norm", t.clip_norm);
  s.num("huber_delta", t.huber_delta);
  s.count("seed", t.seed);
  s.count("chunk", t.chunk);
  s.finish();
}

json train_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"lambda_pos", t.lambda_pos},
          {"lambda_sta", t.lambda_sta},
          {"epochs", t.epochs},
          {"val_fraction", t.val_fraction},
          {"early_stop_patience", t.early_stop_patience},
          {"optimizer", t.optimizer == Optimizer::Adam ? "adam" : "sgd"},
          {"clip_norm", t.clip_norm},
          {"huber_delta", t.huber_delta},
          {"seed", t.seed},
          {"chunk", t.chunk}};
}

json to_json(const ExperimentConfig& c) {
  return {{"simulation", simulation_json(c.sim)},
          {"radio", radio_json(c.radio)},
          {"model", model_json(c.model)},
          {"train", train_json(c.train)},
          {"experiment",
           {{"n_sequences", c.n_sequences}, {"n_test", c.n_test}, {"rates", c.rates}, {"seed", c.seed}}}};
}

}  // namespace

void ExperimentConfig::validate() const {
  sim.validate();
  effective_radio().validate();
  model.validate();
  train.validate();
  if (n_sequences < 1) throw ConfigError("experiment: n_sequences must be >= 1");
  if (rates.empty()) throw ConfigError("experiment: rates must not be empty");
  for (double r : rates) {
    if (!(r > 0.0)) throw ConfigError("experiment: rates must be positive");
  }
}

RadioConfig ExperimentConfig::effective_radio() const {
  RadioConfig r = radio;
  r.tx_pos = sim.room.tx;
  r.rx_pos = sim.room.rx;
  r.sample_rate = sim.f_s;
  return r;
}

void apply_setting(ExperimentConfig& cfg, int k) {
  const Setting s = setting(k);
  cfg.model.state_hidden = s.model.state_hidden;
  cfg.model.traj_hidden = s.model.traj_hidden;
  cfg.train.learning_rate = s.train.learning_rate;
  cfg.train.lambda_pos = s.train.lambda_pos;
  cfg.train.lambda_sta = s.train.lambda_sta;
}

ExperimentConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    Section root(j, "");
    read_simulation(root.sub("simulation"), c.sim);
    read_radio(root.sub("radio"), c.radio);
    read_model(root.sub("model"), c.model);
    read_train(root.sub("train"), c.train);
    Section e = root.sub("experiment");
    e.count("n_sequences", c.n_sequences);
    e.count("n_test", c.n_test);
    if (const json* r = e.raw("rates")) c.rates = Section::numbers(*r, "experiment.rates");
    e.count("seed", c.seed);
    e.finish();
    root.finish();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  auto out = detail::open_for_write(path);
  out << config_to_json(cfg);
  if (!out) throw DataError(path.string() + ": write failed");
}

std::string fingerprint(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  const uLong crc =
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace unifi
