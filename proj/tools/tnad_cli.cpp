// Copyright 2026 The tnad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: data synthesis, ordering, training, scoring,
// evaluation, MAC reports and quantization scans.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tnad/contraction.hpp"
#include "tnad/dataset.hpp"
#include "tnad/embedding.hpp"
#include "tnad/errors.hpp"
#include "tnad/metrics.hpp"
#include "tnad/model.hpp"
#include "tnad/quantization.hpp"
#include "tnad/training.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// Reads a flat JSON object of option values; keys are long option names.
// Merges `--config <json>` into the argument list: every key becomes a flag
// (underscores read as dashes) unless the command line already sets it.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  const CLI::App* sub = nullptr;
  for (const auto& a : args)
    if ((sub = app.get_subcommand_no_throw(a))) break;
  if (!sub) return args;
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CLI::ConversionError("--config", e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("--config", "top level must be a JSON object");
  const auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt || flag == "--config" || flag == "--help") throw CLI::ValidationError("--config", "unknown key '" + key + "'");
    if (given(flag)) continue;
    const auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_boolean()) {
      extra.push_back(flag + "=" + text(value));
    } else if (value.is_array()) {
      for (const auto& v : value) {
        extra.push_back(flag);
        extra.push_back(text(v));
      }
    } else {
      extra.push_back(flag);
      extra.push_back(text(value));
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) tnad::raise(tnad::ErrorKind::Io, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) tnad::raise(tnad::ErrorKind::Io, "cannot write " + path);
  out << text;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    tnad::raise(tnad::ErrorKind::Parse, path + ": " + e.what());
  }
}

tnad::Ordering read_ordering(const std::string& path) {
  const json j = parse_json_file(path);
  const json& arr = j.is_object() ? j.at("ordering") : j;
  tnad::Ordering ordering = arr.get<tnad::Ordering>();
  tnad::validate_ordering(ordering, tnad::kNumParticles);
  return ordering;
}

std::vector<tnad::EmbeddedMps> embed_all(std::span<const tnad::EventRecord> events, const tnad::Ordering& ordering) {
  std::vector<tnad::EmbeddedMps> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(tnad::embed(e, ordering));
  return out;
}

std::vector<tnad::EventRecord> background_events(const tnad::Dataset& data) {
  if (!data.labels) return data.events;
  std::vector<tnad::EventRecord> out;
  for (std::size_t i = 0; i < data.events.size(); ++i)
    if ((*data.labels)[i] == tnad::kBackgroundLabel) out.push_back(data.events[i]);
  return out;
}

json ordering_json(const tnad::SpectralOrdering& so, const tnad::QmiMatrix& qmi) {
  json j;
  j["ordering"] = so.ordering;
  json names = json::array();
  for (auto s : so.ordering) names.push_back(tnad::particle_name(s));
  j["particles"] = names;
  j["fiedler"] = so.fiedler;
  j["disconnected"] = so.disconnected;
  j["degenerate"] = so.degenerate;
  json rows = json::array();
  for (std::size_t i = 0; i < qmi.size(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < qmi.size(); ++k) row.push_back(qmi(i, k));
    rows.push_back(row);
  }
  j["qmi"] = rows;
  return j;
}

tnad::SpectralOrdering spectral_from(std::span<const tnad::EventRecord> events, tnad::QmiMatrix* qmi_out = nullptr) {
  const auto qmi = tnad::compute_qmi(events);
  if (qmi_out) *qmi_out = qmi;
  return tnad::spectral_order(qmi);
}

struct Options {
  std::uint64_t seed = 0;
  std::string config;

  // synth
  std::string out;
  tnad::SyntheticConfig synth;
  bool no_shuffle = false;

  // shared inputs
  std::string data;
  std::string model;
  std::size_t max_events = 0;

  // train
  std::string arch = "19-1";
  std::size_t bond = 0, bond2 = 0, phys_mid = 0;
  std::string ordering;
  bool spectral = false;
  std::string valid;
  std::size_t epochs = 0, patience = 0, batch_size = 0;
  double lr = 0.0, mu = 0.0, delta = 0.0, min_delta = -1.0;
  std::string history;

  // score / evaluate
  std::string scores;
  std::string fixed;
  bool recalibrate = false;
  double target_fpr = 1e-5;

  // mac-report
  std::string json_out;

  // quantize-scan
  std::vector<std::string> formats;
  std::string norm_format = "16,8,TRN,SAT";
  std::string requant = "per_step";
  std::string csv_out;
};

CLI::App* subcommand(CLI::App& app, const std::string& name, const std::string& help, Options& o) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  sub->add_option("--config", o.config, "JSON object of option values (command-line flags take precedence)");
  return sub;
}

int run_synth(const Options& o) {
  tnad::SyntheticConfig cfg = o.synth;
  cfg.shuffle = !o.no_shuffle;
  const auto data = tnad::generate_synthetic(cfg, o.seed);
  tnad::save_dataset(o.out, data);
  std::cout << "wrote " << data.size() << " events to " << o.out << "\n";
  return 0;
}

int run_order(const Options& o) {
  auto events = background_events(tnad::load_dataset(o.data));
  if (o.max_events && events.size() > o.max_events) events.resize(o.max_events);
  tnad::QmiMatrix qmi(0);
  const auto so = spectral_from(events, &qmi);
  const json j = ordering_json(so, qmi);
  if (o.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_text(o.out, j.dump(2) + "\n");
  std::cerr << "ordering:";
  for (auto s : so.ordering) std::cerr << ' ' << tnad::particle_name(s);
  std::cerr << (so.disconnected ? " (disconnected, identity)" : so.degenerate ? " (degenerate, identity)" : "") << "\n";
  return 0;
}

tnad::TnModel build_model(const Options& o) {
  const auto arch = tnad::parse_architecture(o.arch);
  if (arch == tnad::Architecture::Smpo19to1) return tnad::new_smpo_model(o.bond ? o.bond : 4, 3, o.seed);
  if (arch == tnad::Architecture::Custom) tnad::raise(tnad::ErrorKind::Config, "unknown architecture " + o.arch);
  return tnad::new_csmpo(arch, o.bond ? o.bond : 2, o.bond2 ? o.bond2 : 2, o.phys_mid ? o.phys_mid : 3, o.seed);
}

int run_train(const Options& o) {
  auto bkg = background_events(tnad::load_dataset(o.data));
  tnad::TnModel model = build_model(o);
  tnad::TrainConfig cfg = tnad::default_train_config(model);
  cfg.seed = o.seed;
  if (o.epochs) cfg.max_epochs = o.epochs;
  if (o.patience) cfg.patience = o.patience;
  cfg.patience = std::min(cfg.patience, cfg.max_epochs);
  if (o.batch_size) cfg.batch_size = o.batch_size;
  if (o.lr > 0) cfg.learning_rate = o.lr;
  if (o.min_delta >= 0) cfg.min_delta = o.min_delta;
  cfg.validate();
  tnad::LossParams lp = tnad::default_loss_params(model);
  if (o.mu > 0) lp.mu = o.mu;
  if (o.delta > 0) lp.delta = o.delta;
  lp.validate();

  std::vector<tnad::EventRecord> train_ev, valid_ev;
  if (!o.valid.empty()) {
    train_ev = std::move(bkg);
    valid_ev = background_events(tnad::load_dataset(o.valid));
  } else {
    std::mt19937_64 rng(o.seed);
    std::shuffle(bkg.begin(), bkg.end(), rng);
    const double share = cfg.valid_fraction / (cfg.train_fraction + cfg.valid_fraction);
    const auto n_valid = std::max<std::size_t>(1, static_cast<std::size_t>(share * static_cast<double>(bkg.size())));
    if (bkg.size() < n_valid + 1) tnad::raise(tnad::ErrorKind::Config, "not enough background events to train");
    valid_ev.assign(bkg.end() - static_cast<std::ptrdiff_t>(n_valid), bkg.end());
    bkg.resize(bkg.size() - n_valid);
    train_ev = std::move(bkg);
  }

  if (!o.ordering.empty())
    model.ordering = read_ordering(o.ordering);
  else if (o.spectral)
    model.ordering = spectral_from(train_ev).ordering;

  const auto train_mps = embed_all(train_ev, model.ordering);
  const auto valid_mps = embed_all(valid_ev, model.ordering);
  std::cerr << "training " << model.label << " (" << tnad::param_count(model) << " parameters) on "
            << train_mps.size() << " events, validating on " << valid_mps.size() << "\n";
  auto result = tnad::train(model, train_mps, valid_mps, cfg, lp);
  const auto plan = tnad::plan_model(result.model);
  const auto cal = tnad::calibrate(tnad::norms(plan, result.model, valid_mps));
  tnad::save_model(o.out, result.model, cal);
  if (!o.history.empty()) write_text(o.history, result.history.to_json() + "\n");
  const auto& h = result.history;
  std::cerr << "best epoch " << h.best_epoch << " of " << h.stopped_epoch << (h.early_stopped ? " (early stop)" : "")
            << ", median background norm^2 " << cal.median_bkg << "\n";
  if (h.aborted) {
    std::cerr << "training aborted: " << h.diagnostic << "\n";
    return kExitNumeric;
  }
  return 0;
}

int run_score(const Options& o) {
  const auto file = tnad::load_model(o.model);
  const auto data = tnad::load_dataset(o.data);
  const auto plan = tnad::plan_model(file.model);
  const auto mps = embed_all(data.events, file.model.ordering);
  std::vector<double> norm_sq;
  if (o.fixed.empty()) {
    norm_sq = tnad::norms(plan, file.model, mps);
  } else {
    tnad::QuantConfig qc;
    qc.compute = tnad::FixedPointFormat::parse(o.fixed);
    const tnad::FixedPointExecutor exec(plan, file.model, qc);
    for (const auto& m : mps) norm_sq.push_back(exec.run(m).norm_sq);
  }
  tnad::ScoreCalibration cal;
  if (o.recalibrate || !file.calibration) {
    std::vector<double> bkg;
    for (std::size_t i = 0; i < norm_sq.size(); ++i)
      if (!data.labels || (*data.labels)[i] == tnad::kBackgroundLabel) bkg.push_back(norm_sq[i]);
    cal = tnad::calibrate(bkg);
  } else {
    cal = *file.calibration;
  }
  json j;
  j["median_bkg"] = cal.median_bkg;
  j["format"] = o.fixed.empty() ? "float" : tnad::FixedPointFormat::parse(o.fixed).to_string();
  j["norm_sq"] = norm_sq;
  json scores = json::array();
  for (double n : norm_sq) scores.push_back(tnad::anomaly_score(n, cal));
  j["score"] = scores;
  if (data.labels) j["label"] = *data.labels;
  write_text(o.out, j.dump() + "\n");
  std::cerr << "scored " << norm_sq.size() << " events, median " << cal.median_bkg << "\n";
  return 0;
}

int run_evaluate(const Options& o) {
  const json j = parse_json_file(o.scores);
  if (!j.contains("label")) tnad::raise(tnad::ErrorKind::Parse, o.scores + ": scores carry no labels");
  const auto scores = j.at("score").get<std::vector<double>>();
  const auto labels = j.at("label").get<std::vector<std::string>>();
  if (scores.size() != labels.size()) tnad::raise(tnad::ErrorKind::Parse, o.scores + ": score/label count mismatch");
  const auto report = tnad::evaluate_scores(scores, labels, j.at("median_bkg").get<double>(), o.target_fpr);
  if (o.out.empty())
    std::cout << report.to_json() << "\n";
  else
    write_text(o.out, report.to_json() + "\n");
  for (const auto& s : report.signals) std::cerr << s.label << ": AUC " << s.auc << "\n";
  return 0;
}

int run_mac_report(const Options& o) {
  const tnad::TnModel model =
      o.model.empty() ? tnad::new_reference_model(tnad::parse_architecture(o.arch), o.seed) : tnad::load_model(o.model).model;
  const auto report = tnad::count_macs(tnad::plan_model(model));
  std::cout << tnad::format_mac_report(report) << tnad::mac_report_json(report) << "\n";
  if (!o.json_out.empty()) write_text(o.json_out, tnad::mac_report_json(report) + "\n");
  return 0;
}

int run_quantize_scan(const Options& o) {
  const auto file = tnad::load_model(o.model);
  const auto data = tnad::load_dataset(o.data);
  std::vector<tnad::FixedPointFormat> formats;
  for (const auto& f : o.formats) formats.push_back(tnad::FixedPointFormat::parse(f));
  if (formats.empty()) formats = tnad::default_scan_ladder();
  tnad::QuantConfig base;
  base.norm = tnad::FixedPointFormat::parse(o.norm_format);
  base.requant = o.requant == "per_mac" ? tnad::Requant::PerMac : tnad::Requant::PerStep;
  const auto report = tnad::quantization_scan(file.model, data, formats, base, o.target_fpr);
  std::cout << report.to_csv();
  if (!o.csv_out.empty()) write_text(o.csv_out, report.to_csv());
  if (!o.json_out.empty()) write_text(o.json_out, report.to_json() + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tnad: tensor-network anomaly detection"};
  app.require_subcommand(1);
  Options o;

  auto* synth = subcommand(app, "synth", "Generate a labeled synthetic dataset", o);
  synth->add_option("--out", o.out, "Output file (.csv or .bin)")->required();
  synth->add_option("--n-background", o.synth.n_background)->capture_default_str();
  synth->add_option("--n-anomaly", o.synth.n_anomaly)->capture_default_str();
  synth->add_option("--anomaly-label", o.synth.anomaly_label)->capture_default_str();
  synth->add_option("--lepton-filter-pt", o.synth.lepton_filter_pt, "Leading-lepton pt threshold [GeV]")
      ->capture_default_str();
  synth->add_option("--lepton-pt-mean", o.synth.lepton_pt_mean)->capture_default_str();
  synth->add_option("--jet-pt-min", o.synth.jet_pt_min)->capture_default_str();
  synth->add_option("--jet-pt-mean", o.synth.jet_pt_mean)->capture_default_str();
  synth->add_option("--jet-multiplicity", o.synth.jet_multiplicity)->capture_default_str();
  synth->add_option("--extra-lepton-prob", o.synth.extra_lepton_prob)->capture_default_str();
  synth->add_option("--anomaly-shift-sigma", o.synth.anomaly_shift_sigma)->capture_default_str();
  synth->add_option("--anomaly-jet-multiplicity", o.synth.anomaly_jet_multiplicity)->capture_default_str();
  synth->add_flag("--no-shuffle", o.no_shuffle, "Keep background events before anomalies");

  auto* order = subcommand(app, "order", "Compute QMI and the spectral site ordering", o);
  order->add_option("--data", o.data, "Dataset (background events are used)")->required();
  order->add_option("--out", o.out, "Ordering JSON (stdout if omitted)");
  order->add_option("--max-events", o.max_events, "Use at most this many events (0 = all)")->capture_default_str();

  auto* train = subcommand(app, "train", "Train a model on background events", o);
  train->add_option("--data", o.data, "Training dataset")->required();
  train->add_option("--valid", o.valid, "Validation dataset (default: split off the training data)");
  train->add_option("--out", o.out, "Model file")->required();
  train->add_option("--arch", o.arch, "19-1, 19-7-1 or 19-2-1")->capture_default_str();
  train->add_option("--bond", o.bond, "Bond dimension (first layer)");
  train->add_option("--bond2", o.bond2, "Second-layer bond dimension");
  train->add_option("--phys-mid", o.phys_mid, "Physical dimension between cascade layers");
  auto* ord_opt = train->add_option("--ordering", o.ordering, "Ordering JSON from `order`");
  train->add_flag("--spectral", o.spectral, "Compute the spectral ordering from the training events")
      ->excludes(ord_opt);
  train->add_option("--epochs", o.epochs, "Maximum epochs");
  train->add_option("--patience", o.patience, "Early-stopping patience");
  train->add_option("--batch-size", o.batch_size, "Events per Adam step");
  train->add_option("--lr", o.lr, "Learning rate");
  train->add_option("--mu", o.mu, "Target squared norm");
  train->add_option("--delta", o.delta, "Huber scale");
  train->add_option("--min-delta", o.min_delta, "Minimum validation improvement");
  train->add_option("--history", o.history, "Training history JSON");

  auto* score = subcommand(app, "score", "Score events with a trained model", o);
  score->add_option("--model", o.model)->required();
  score->add_option("--data", o.data)->required();
  score->add_option("--out", o.out, "Scores JSON")->required();
  score->add_option("--fixed", o.fixed, "Fixed-point compute format, e.g. 16,6,TRN,WRAP");
  score->add_flag("--recalibrate", o.recalibrate, "Recompute the background median from this dataset");

  auto* evaluate = subcommand(app, "evaluate", "ROC metrics per signal label", o);
  evaluate->add_option("--scores", o.scores, "Scores JSON from `score`")->required();
  evaluate->add_option("--out", o.out, "Metrics JSON (stdout if omitted)");
  evaluate->add_option("--target-fpr", o.target_fpr)->capture_default_str()->check(CLI::Range(0.0, 1.0));

  auto* macs = subcommand(app, "mac-report", "Multiply-accumulate counts of the contraction plan", o);
  auto* arch_opt = macs->add_option("--arch", o.arch, "19-1, 19-7-1 or 19-2-1")->capture_default_str();
  macs->add_option("--model", o.model, "Report on a model file instead")->excludes(arch_opt);
  macs->add_option("--json-out", o.json_out);

  auto* scan = subcommand(app, "quantize-scan", "Evaluate a model across fixed-point formats", o);
  scan->add_option("--model", o.model)->required();
  scan->add_option("--data", o.data, "Labeled evaluation dataset")->required();
  scan->add_option("--format", o.formats, "Compute format (repeatable); default ladder 24..12 bits");
  scan->add_option("--norm-format", o.norm_format)->capture_default_str();
  scan->add_option("--requant", o.requant)->capture_default_str()->check(CLI::IsMember({"per_step", "per_mac"}));
  scan->add_option("--target-fpr", o.target_fpr)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  scan->add_option("--csv-out", o.csv_out);
  scan->add_option("--json-out", o.json_out);

  try {
    auto args = expand_config(app, std::vector<std::string>(argv + 1, argv + argc));
    std::vector<char*> ptrs{argv[0]};
    for (auto& a : args) ptrs.push_back(a.data());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(o);
    if (order->parsed()) return run_order(o);
    if (train->parsed()) return run_train(o);
    if (score->parsed()) return run_score(o);
    if (evaluate->parsed()) return run_evaluate(o);
    if (macs->parsed()) return run_mac_report(o);
    if (scan->parsed()) return run_quantize_scan(o);
  } catch (const tnad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case tnad::ErrorKind::Config: return kExitUsage;
      case tnad::ErrorKind::Numeric: return kExitNumeric;
      default: return kExitData;
    }
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
