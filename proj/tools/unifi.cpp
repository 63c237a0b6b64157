// unifi: command-line front end for simulation, feature extraction,
// training, inference and the evaluation experiments.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unifi/config.hpp"
#include "unifi/csi.hpp"
#include "unifi/error.hpp"
#include "unifi/eval.hpp"
#include "unifi/features.hpp"
#include "unifi/inverse.hpp"
#include "unifi/io.hpp"
#include "unifi/rng.hpp"
#include "unifi/simulator.hpp"

using namespace unifi;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "Experiment config (JSON); defaults when omitted");
  cmd->add_option("--seed", c.seed, "Master seed; overrides the config");
  auto* o = cmd->add_option("--out", c.out, "Output path");
  if (out_required) o->required();
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.model.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  return cfg;
}

void note(const std::string& msg) { std::cerr << msg << '\n'; }
const WarningSink kNote = [](const std::string& msg) { note(msg); };

void write_predictions(const std::string& path, const std::vector<FramePrediction>& preds) {
  auto os = detail::open_for_write(path);
  std::string line;
  for (const auto& p : preds) {
    line = "{\"frame\":" + std::to_string(p.frame) + ",\"ts\":";
    detail::append_number(line, p.ts);
    line += ",\"event\":\"" + std::string(to_string(p.event)) + "\",\"probs\":[";
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
      if (i) line += ',';
      detail::append_number(line, p.probs[i]);
    }
    line += "],\"pos\":";
    if (p.pos) {
      line += '[';
      detail::append_number(line, p.pos->x());
      line += ',';
      detail::append_number(line, p.pos->y());
      line += ']';
    } else {
      line += "null";
    }
    line += ",\"confidence\":";
    detail::append_number(line, p.confidence);
    line += "}\n";
    os << line;
  }
  if (!os) throw DataError(path + ": write failed");
}

void write_training_log(const std::string& path, const TrainingLog& tl) {
  auto os = detail::open_for_write(path);
  for (const auto& e : tl.epochs) {
    nlohmann::ordered_json j{{"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"val_loss", e.val_loss},
                             {"train_accuracy", e.train_accuracy},
                             {"val_accuracy", e.val_accuracy}};
    os << j.dump() << '\n';
  }
  os << nlohmann::ordered_json{{"best_epoch", tl.best_epoch},
                               {"train_sequences", tl.train_sequences},
                               {"val_sequences", tl.val_sequences}}
            .dump()
     << '\n';
}

std::vector<FrameSequence> frames_of(const std::vector<LabeledSequence>& seqs, double hop_s) {
  std::vector<FrameSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(to_frames(s, hop_s));
  return out;
}

/// Test frames: from a dataset file when given, otherwise simulated with a
/// seed stream disjoint from the training data.
std::vector<FrameSequence> test_frames(const ExperimentConfig& cfg, const std::string& dataset) {
  if (!dataset.empty()) return frames_of(read_dataset(dataset), cfg.model.hop_s);
  return simulate_frames(cfg.sim, cfg.n_test, derive_seed(cfg.seed, 0x7e57), cfg.model.hop_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified Wi-Fi sensing toolkit"};
  app.require_subcommand(1);

  Common c;

  auto* sim = app.add_subcommand("simulate", "Generate a labeled synthetic dataset");
  add_common(sim, c);
  std::optional<std::size_t> sim_n;
  sim->add_option("--n", sim_n, "Number of sequences (default: config n_sequences)");

  auto* syn = app.add_subcommand("synthesize-csi", "Synthesize a CSI trace along a simulated trajectory");
  add_common(syn, c);
  std::string syn_dataset;
  std::size_t syn_index = 0;
  syn->add_option("--dataset", syn_dataset, "Take the trajectory from this dataset instead of simulating");
  syn->add_option("--index", syn_index, "Sequence index");
  std::string syn_features;
  syn->add_option("--features-out", syn_features, "Also write features extracted from the trace");

  auto* ext = app.add_subcommand("extract", "Extract the five features from a CSI trace");
  add_common(ext, c);
  std::string ext_csi;
  std::optional<double> ext_rate;
  ext->add_option("--csi", ext_csi, "CSI trace file")->required();
  ext->add_option("--rate", ext_rate, "Packet rate in Hz (default: config simulation.f_s)");

  auto* trn = app.add_subcommand("train", "Train the inverse model");
  add_common(trn, c);
  std::vector<std::string> trn_datasets;
  std::optional<int> trn_setting, trn_epochs;
  std::string trn_arch;
  trn->add_option("--dataset", trn_datasets, "Dataset file; repeat to mix datasets")->required();
  trn->add_option("--setting", trn_setting, "Named setting 1..5");
  trn->add_option("--epochs", trn_epochs, "Epoch budget");
  trn->add_option("--architecture", trn_arch, "attention or recurrent");

  auto* inf = app.add_subcommand("infer", "Per-frame predictions for a feature file");
  add_common(inf, c);
  std::string inf_model, inf_features;
  inf->add_option("--model", inf_model, "Model file")->required();
  inf->add_option("--features", inf_features, "Feature sequence file")->required();

  auto* evl = app.add_subcommand("eval", "Score a model on labeled sequences");
  add_common(evl, c);
  std::string evl_model, evl_dataset;
  evl->add_option("--model", evl_model, "Model file")->required();
  evl->add_option("--dataset", evl_dataset, "Labeled test dataset (default: simulate n_test sequences)");

  auto* abl = app.add_subcommand("ablation", "Feature-subset ablation on one simulated split");
  add_common(abl, c);

  auto* rsw = app.add_subcommand("rate-sweep", "Tracking error across packet rates");
  add_common(rsw, c);
  std::vector<double> rsw_rates;
  rsw->add_option("--rates", rsw_rates, "Packet rates in Hz, comma separated (default: config experiment.rates)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    ExperimentConfig cfg = load(c);

    if (*sim) {
      const std::size_t n = sim_n.value_or(cfg.n_sequences);
      if (n < 1) throw ConfigError("simulate: --n must be >= 1");
      const Dataset ds = generate_dataset(n, cfg.sim, cfg.seed);
      write_dataset(c.out, ds.sequences);
      note(ds.balance.report());
    } else if (*syn) {
      LabeledSequence seq;
      if (syn_dataset.empty()) {
        seq = generate_sequence(cfg.sim, cfg.seed, syn_index);
      } else {
        auto all = read_dataset(syn_dataset);
        if (syn_index >= all.size()) {
          throw DataError(syn_dataset + ": no sequence with index " + std::to_string(syn_index));
        }
        seq = std::move(all[syn_index]);
      }
      RadioConfig radio = cfg.effective_radio();
      radio.sample_rate = seq.f_s;
      std::vector<std::uint8_t> occupied(seq.size());
      for (std::size_t i = 0; i < seq.size(); ++i) occupied[i] = seq.real[i] != RealEvent::Absence;
      const auto csi = synthesize_csi(seq.traj, radio, occupied);
      write_csi_trace(c.out, csi);
      if (!syn_features.empty()) {
        write_feature_sequence(syn_features, extract_sequence(csi, cfg.sim.synth.windows, radio, kNote));
      }
    } else if (*ext) {
      RadioConfig radio = cfg.effective_radio();
      if (ext_rate) radio.sample_rate = *ext_rate;
      const auto csi = read_csi_trace(ext_csi);
      if (csi.empty()) throw DataError(ext_csi + ": trace has no frames");
      write_feature_sequence(c.out, extract_sequence(csi, cfg.sim.synth.windows, radio, kNote));
    } else if (*trn) {
      if (trn_setting) apply_setting(cfg, *trn_setting);
      if (trn_epochs) cfg.train.epochs = *trn_epochs;
      if (!trn_arch.empty()) cfg.model.architecture = architecture_from_string(trn_arch);
      cfg.validate();
      std::vector<LabeledSequence> data;
      for (const auto& path : trn_datasets) {
        auto part = read_dataset(path);
        for (auto& s : part) data.push_back(std::move(s));
      }
      if (data.empty()) throw DataError("train: datasets contain no sequences");
      cfg.train.on_epoch = [](const EpochLog& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "epoch %d  train loss %.4f acc %.4f  val loss %.4f acc %.4f  (%.1fs)", e.epoch,
                      e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.seconds);
        note(buf);
      };
      const auto result = train(std::span<const LabeledSequence>(data), cfg.model, cfg.train);
      save_model(std::filesystem::path(c.out), result.model);
      write_training_log(c.out + ".log.jsonl", result.log);
    } else if (*inf) {
      const auto model = load_model(std::filesystem::path(inf_model));
      const auto feats = read_feature_sequence(inf_features);
      write_predictions(c.out, infer(model, feats, kNote));
    } else if (*evl) {
      const auto model = load_model(std::filesystem::path(evl_model));
      cfg.model = model.config;
      const auto test = test_frames(cfg, evl_dataset);
      ExperimentReport rep = evaluate(model, test);
      rep.name = "eval";
      rep.seed = cfg.seed;
      rep.fingerprint = fingerprint(cfg);
      emit_report(rep, c.out);
      note("accuracy " + std::to_string(rep.accuracy()) +
          (rep.errors.empty() ? "" : ", median error " + std::to_string(rep.errors.median()) + " m"));
    } else if (*abl) {
      note("simulating " + std::to_string(cfg.n_sequences) + " training sequences");
      const auto train_set = simulate_frames(cfg.sim, cfg.n_sequences, cfg.seed, cfg.model.hop_s);
      const auto test = test_frames(cfg, "");
      const auto subsets = default_ablation_subsets();
      const auto rows = run_ablation(train_set, test, subsets, cfg.model, cfg.train);
      auto os = detail::open_for_write(c.out + ".jsonl");
      for (const auto& row : rows) {
        nlohmann::ordered_json j{{"subset", row.subset.name}};
        if (row.report) {
          ExperimentReport rep = *row.report;
          rep.fingerprint = fingerprint(cfg);
          emit_report(rep, c.out + "." + row.subset.name);
          j["accuracy"] = rep.accuracy();
          note(row.subset.name + ": accuracy " + std::to_string(rep.accuracy()));
        } else {
          j["error"] = row.error;
          note(row.subset.name + ": " + row.error);
        }
        os << j.dump() << '\n';
      }
      os << nlohmann::ordered_json{{"summary", {{"fingerprint", fingerprint(cfg)}, {"seed", cfg.seed}}}}.dump()
         << '\n';
    } else if (*rsw) {
      const std::vector<double> rates = rsw_rates.empty() ? cfg.rates : rsw_rates;
      const auto rows = run_rate_sweep(cfg, rates, kNote);
      auto os = detail::open_for_write(c.out + ".jsonl");
      for (const auto& row : rows) {
        emit_report(row.report, c.out + "." + row.report.name);
        os << nlohmann::ordered_json{{"rate_hz", row.rate},
                                     {"mean_error_m", row.report.errors.mean()},
                                     {"median_error_m", row.report.errors.median()},
                                     {"accuracy", row.report.accuracy()}}
                  .dump()
           << '\n';
      }
      const auto trend = rate_trend(rows);
      os << nlohmann::ordered_json{{"summary",
                                    {{"monotone", trend.monotone},
                                     {"plateau", trend.plateau},
                                     {"tolerance_m", trend.tolerance},
                                     {"fingerprint", fingerprint(cfg)},
                                     {"seed", cfg.seed}}}}
                .dump()
         << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
