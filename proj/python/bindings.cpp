// Python bindings for the unifi core.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "unifi/config.hpp"
#include "unifi/csi.hpp"
#include "unifi/error.hpp"
#include "unifi/eval.hpp"
#include "unifi/features.hpp"
#include "unifi/inverse.hpp"
#include "unifi/io.hpp"
#include "unifi/simulator.hpp"

namespace py = pybind11;
using namespace unifi;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using CArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

ExperimentConfig config_or_default(const std::optional<std::string>& json) {
  return json ? config_from_json(*json) : ExperimentConfig{};
}

py::dict sequence_to_dict(const LabeledSequence& s) {
  const auto n = static_cast<py::ssize_t>(s.size());
  py::array_t<std::int8_t> sim(n), real(n);
  py::array_t<std::uint8_t> inside(n);
  DArray pos({n, py::ssize_t{2}}), feats({n, static_cast<py::ssize_t>(kNumSlots)});
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    sim.mutable_at(i) = static_cast<std::int8_t>(s.sim[k]);
    real.mutable_at(i) = static_cast<std::int8_t>(s.real[k]);
    inside.mutable_at(i) = s.traj.inside[k];
    pos.mutable_at(i, 0) = s.traj.pos[k].x();
    pos.mutable_at(i, 1) = s.traj.pos[k].y();
    for (std::size_t j = 0; j < kNumSlots; ++j) feats.mutable_at(i, static_cast<py::ssize_t>(j)) = s.features[k].v[j];
  }
  py::dict d;
  d["id"] = s.id;
  d["f_s"] = s.f_s;
  d["sim"] = sim;
  d["real"] = real;
  d["pos"] = pos;
  d["inside"] = inside;
  d["features"] = feats;
  return d;
}

/// (T, n_sub, n_rx) complex array.
CArray frames_to_array(const std::vector<CsiFrame>& frames) {
  const auto t = static_cast<py::ssize_t>(frames.size());
  const py::ssize_t s = frames.empty() ? 0 : frames[0].h.rows();
  const py::ssize_t a = frames.empty() ? 0 : frames[0].h.cols();
  CArray out({t, s, a});
  for (py::ssize_t i = 0; i < t; ++i) {
    for (py::ssize_t j = 0; j < s; ++j) {
      for (py::ssize_t k = 0; k < a; ++k) out.mutable_at(i, j, k) = frames[static_cast<std::size_t>(i)].h(j, k);
    }
  }
  return out;
}

std::vector<CsiFrame> array_to_frames(const CArray& csi, double rate) {
  if (csi.ndim() != 3) throw DataError("csi: expected an array of shape (T, n_subcarriers, n_rx)");
  std::vector<CsiFrame> frames(static_cast<std::size_t>(csi.shape(0)));
  for (py::ssize_t i = 0; i < csi.shape(0); ++i) {
    auto& f = frames[static_cast<std::size_t>(i)];
    f.ts = static_cast<double>(i) / rate;
    f.h.resize(csi.shape(1), csi.shape(2));
    for (py::ssize_t j = 0; j < csi.shape(1); ++j) {
      for (py::ssize_t k = 0; k < csi.shape(2); ++k) f.h(j, k) = csi.at(i, j, k);
    }
  }
  return frames;
}

DArray features_to_array(const std::vector<FeatureFrame>& fs, DArray* ts_out) {
  const auto n = static_cast<py::ssize_t>(fs.size());
  DArray out({n, static_cast<py::ssize_t>(kNumSlots)});
  DArray ts(n);
  for (py::ssize_t i = 0; i < n; ++i) {
    ts.mutable_at(i) = fs[static_cast<std::size_t>(i)].ts;
    for (std::size_t j = 0; j < kNumSlots; ++j) {
      out.mutable_at(i, static_cast<py::ssize_t>(j)) = fs[static_cast<std::size_t>(i)].v[j];
    }
  }
  if (ts_out) *ts_out = ts;
  return out;
}

std::vector<FeatureFrame> array_to_features(const DArray& ts, const DArray& x) {
  if (x.ndim() != 2 || x.shape(1) != static_cast<py::ssize_t>(kNumSlots)) {
    throw DataError("features: expected an array of shape (T, 5)");
  }
  if (ts.ndim() != 1 || ts.shape(0) != x.shape(0)) throw DataError("features: ts must have one entry per row");
  std::vector<FeatureFrame> out(static_cast<std::size_t>(x.shape(0)));
  for (py::ssize_t i = 0; i < x.shape(0); ++i) {
    out[static_cast<std::size_t>(i)].ts = ts.at(i);
    for (std::size_t j = 0; j < kNumSlots; ++j) out[static_cast<std::size_t>(i)].v[j] = x.at(i, static_cast<py::ssize_t>(j));
  }
  return out;
}

py::dict report_summary(const ExperimentReport& r) {
  py::dict d;
  d["frames"] = r.confusion.total();
  d["accuracy"] = r.accuracy();
  d["tracked_frames"] = r.errors.size();
  if (!r.errors.empty()) {
    d["median_error_m"] = r.errors.median();
    d["p90_error_m"] = r.errors.p90();
    d["mean_error_m"] = r.errors.mean();
  }
  d["mean_latency_s"] = r.mean_latency_s;
  py::list rows;
  for (const auto& row : r.confusion.counts) rows.append(py::cast(std::vector<std::size_t>(row.begin(), row.end())));
  d["confusion"] = rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wi-Fi sensing core: simulation, CSI synthesis, features, inverse model";

  auto base = py::register_exception<Error>(m, "UnifiError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  m.attr("EVENTS") = py::make_tuple("absence", "stillness", "local_motion", "walking");
  m.attr("SLOTS") = py::make_tuple("corr_s", "dser_s", "plcr", "corr_l", "dser_l");

  m.def("default_config", [] { return config_to_json(ExperimentConfig{}); },
        "Canonical JSON of the default experiment config.");
  m.def(
      "normalize_config", [](const std::string& json) { return config_to_json(config_from_json(json)); },
      py::arg("json"), "Validate a config and return its canonical JSON.");
  m.def(
      "config_fingerprint", [](const std::optional<std::string>& json) { return fingerprint(config_or_default(json)); },
      py::arg("config") = py::none());

  m.def(
      "generate_sequence",
      [](std::uint64_t seed, std::uint64_t index, const std::optional<std::string>& config) {
        return sequence_to_dict(generate_sequence(config_or_default(config).sim, seed, index));
      },
      py::arg("seed"), py::arg("index") = 0, py::arg("config") = py::none(),
      "One labeled sequence as numpy arrays (sim, real, pos, inside, features).");

  m.def(
      "simulate",
      [](const std::filesystem::path& out, std::size_t n, std::uint64_t seed, const std::optional<std::string>& config) {
        const auto cfg = config_or_default(config);
        py::gil_scoped_release nogil;
        const Dataset ds = generate_dataset(n, cfg.sim, seed);
        write_dataset(out, ds.sequences);
        return ds.balance.report();
      },
      py::arg("out"), py::arg("n"), py::arg("seed") = 1, py::arg("config") = py::none(),
      "Write a labeled dataset file; returns the class balance line.");

  m.def(
      "synthesize_csi",
      [](const DArray& pos, const py::array_t<std::uint8_t, py::array::forcecast>& occupied, double rate,
         const std::optional<std::string>& config) {
        if (pos.ndim() != 2 || pos.shape(1) != 2) throw DataError("pos: expected an array of shape (T, 2)");
        if (occupied.ndim() != 1 || occupied.shape(0) != pos.shape(0)) {
          throw DataError("occupied: expected one flag per position");
        }
        RadioConfig radio = config_or_default(config).effective_radio();
        radio.sample_rate = rate;
        Trajectory t;
        t.f_s = rate;
        for (py::ssize_t i = 0; i < pos.shape(0); ++i) {
          const bool in = occupied.at(i) != 0;
          t.push(Point2(pos.at(i, 0), pos.at(i, 1)), 0.0, 0.0, in);
        }
        std::vector<std::uint8_t> occ(t.inside.begin(), t.inside.end());
        return frames_to_array(synthesize_csi(t, radio, occ));
      },
      py::arg("pos"), py::arg("occupied"), py::arg("rate") = 100.0, py::arg("config") = py::none(),
      "CSI of shape (T, n_subcarriers, n_rx) along a trajectory.");

  m.def(
      "extract_features",
      [](const CArray& csi, double rate, const std::optional<std::string>& config) {
        const auto cfg = config_or_default(config);
        RadioConfig radio = cfg.effective_radio();
        radio.sample_rate = rate;
        const auto frames = array_to_frames(csi, rate);
        DArray ts;
        auto x = features_to_array(extract_sequence(frames, cfg.sim.synth.windows, radio), &ts);
        return py::make_tuple(ts, x);
      },
      py::arg("csi"), py::arg("rate") = 100.0, py::arg("config") = py::none(),
      "(ts, features) with features of shape (T, 5); NaN marks unfilled windows.");

  m.def(
      "train",
      [](const std::vector<std::filesystem::path>& datasets, const std::filesystem::path& out,
         const std::optional<std::string>& config, std::optional<int> epochs, std::optional<int> setting,
         const std::function<void(py::dict)>& on_epoch) {
        ExperimentConfig cfg = config_or_default(config);
        if (setting) apply_setting(cfg, *setting);
        if (epochs) cfg.train.epochs = *epochs;
        cfg.validate();
        std::vector<LabeledSequence> data;
        for (const auto& p : datasets) {
          for (auto& s : read_dataset(p)) data.push_back(std::move(s));
        }
        if (on_epoch) {
          cfg.train.on_epoch = [&on_epoch](const EpochLog& e) {
            py::gil_scoped_acquire gil;
            py::dict d;
            d["epoch"] = e.epoch;
            d["train_loss"] = e.train_loss;
            d["val_loss"] = e.val_loss;
            d["train_accuracy"] = e.train_accuracy;
            d["val_accuracy"] = e.val_accuracy;
            on_epoch(d);
          };
        }
        TrainResult result;
        {
          py::gil_scoped_release nogil;
          result = train(std::span<const LabeledSequence>(data), cfg.model, cfg.train);
          save_model(out, result.model);
        }
        py::list log;
        for (const auto& e : result.log.epochs) {
          log.append(py::dict(py::arg("epoch") = e.epoch, py::arg("train_loss") = e.train_loss,
                              py::arg("val_loss") = e.val_loss, py::arg("val_accuracy") = e.val_accuracy));
        }
        return log;
      },
      py::arg("datasets"), py::arg("out"), py::arg("config") = py::none(), py::arg("epochs") = py::none(),
      py::arg("setting") = py::none(), py::arg("on_epoch") = py::none(),
      "Train on one or more dataset files and save the model; returns the epoch log.");

  py::class_<InverseModel>(m, "Model")
      .def_static(
          "load", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"))
      .def(
          "save", [](const InverseModel& self, const std::filesystem::path& p) { save_model(p, self); },
          py::arg("path"))
      .def_property_readonly("n_params", [](const InverseModel& self) { return self.params.size(); })
      .def_property_readonly("architecture",
                             [](const InverseModel& self) { return to_string(self.config.architecture); })
      .def(
          "infer",
          [](const InverseModel& self, const DArray& ts, const DArray& features) {
            const auto fs = array_to_features(ts, features);
            const auto preds = infer(self, fs);
            const auto n = static_cast<py::ssize_t>(preds.size());
            py::array_t<std::int64_t> frame(n);
            py::array_t<std::int8_t> event(n);
            DArray t(n), probs({n, py::ssize_t{4}}), pos({n, py::ssize_t{2}});
            for (py::ssize_t i = 0; i < n; ++i) {
              const auto& p = preds[static_cast<std::size_t>(i)];
              frame.mutable_at(i) = static_cast<std::int64_t>(p.frame);
              t.mutable_at(i) = p.ts;
              event.mutable_at(i) = static_cast<std::int8_t>(p.event);
              for (py::ssize_t k = 0; k < 4; ++k) probs.mutable_at(i, k) = p.probs[static_cast<std::size_t>(k)];
              pos.mutable_at(i, 0) = p.pos ? p.pos->x() : std::nan("");
              pos.mutable_at(i, 1) = p.pos ? p.pos->y() : std::nan("");
            }
            py::dict d;
            d["frame"] = frame;
            d["ts"] = t;
            d["event"] = event;
            d["probs"] = probs;
            d["pos"] = pos;
            return d;
          },
          py::arg("ts"), py::arg("features"),
          "Causal per-frame predictions; pos is NaN on frames predicted absent.")
      .def(
          "evaluate",
          [](const InverseModel& self, const std::filesystem::path& dataset, const std::optional<std::string>& out) {
            std::vector<FrameSequence> frames;
            for (const auto& s : read_dataset(dataset)) frames.push_back(to_frames(s, self.config.hop_s));
            ExperimentReport rep;
            {
              py::gil_scoped_release nogil;
              rep = evaluate(self, frames);
            }
            rep.name = "eval";
            if (out) emit_report(rep, *out);
            return report_summary(rep);
          },
          py::arg("dataset"), py::arg("out") = py::none(),
          "Score on a labeled dataset file; optionally write the report files.");

  m.def("wavelength", [](const std::optional<std::string>& config) {
        return wavelength(config_or_default(config).effective_radio());
      }, py::arg("config") = py::none());
  m.def(
      "range_rate",
      [](std::pair<double, double> tx, std::pair<double, double> rx, std::pair<double, double> p,
         std::pair<double, double> v) {
        return range_rate(Point2(tx.first, tx.second), Point2(rx.first, rx.second), Point2(p.first, p.second),
                          Point2(v.first, v.second));
      },
      py::arg("tx"), py::arg("rx"), py::arg("pos"), py::arg("vel"), "Rate of change of the Tx-target-Rx path, m/s.");
}
