#include "zilm/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <ostream>

#include <CLI11.hpp>

#include "zilm/errors.hpp"
#include "zilm/eval.hpp"
#include "zilm/io.hpp"

namespace zilm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::int64_t kQuickStudents = 500;

// Rethrows with a stage prefix, keeping the error category.
template <typename F>
auto stage(std::string_view name, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(name) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(std::string(name) + ": " + e.what());
  }
}

fs::path default_out(std::string_view leaf) {
  const char* root = std::getenv(kOutRootEnv);
  return fs::path(root != nullptr && *root != '\0' ? root : "zilm-out") / leaf;
}

/// Refuses to write into a non-empty directory unless forced.
void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) {
      throw ConfigError("output path '" + dir.string() + "' exists and is not a directory");
    }
    if (!fs::is_empty(dir) && !force) {
      throw ConfigError("output directory '" + dir.string() +
                        "' is not empty; pass --force to overwrite");
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "'");
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct LoadedSimConfig {
  SimConfig cfg;
  std::string digest;
};

LoadedSimConfig sim_config_from_args(const std::string& path, std::optional<std::uint64_t> seed,
                                     bool quick) {
  LoadedSimConfig out;
  if (path.empty()) {
    out.digest = config_digest(out.cfg);
  } else {
    std::string text;
    try {
      text = read_file(path);
    } catch (const DataError&) {
      throw ConfigError("cannot read config '" + path + "'");
    }
    try {
      out.cfg = parse_sim_config(text);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    out.digest = sha256_hex(text);
  }
  if (seed) out.cfg.seed = *seed;
  if (quick) out.cfg.n_students = kQuickStudents;
  require_valid(out.cfg);
  return out;
}

struct LoadedFitConfig {
  FitConfig cfg;
  std::string digest;
};

LoadedFitConfig fit_config_from_args(const std::string& path, std::optional<std::uint64_t> seed) {
  LoadedFitConfig out;
  if (path.empty()) {
    out.digest = sha256_hex(to_json(out.cfg).dump());
  } else {
    out.cfg = load_fit_config(path);
    out.digest = sha256_hex(read_file(path));
  }
  if (seed) out.cfg.seed = *seed;
  return out;
}

void write_report(const fs::path& dir, const std::string& stem, const json& j,
                  const std::string& csv, std::vector<std::string>& artifacts) {
  write_file_atomic(dir / (stem + ".json"), j.dump(2) + "\n");
  write_file_atomic(dir / (stem + ".csv"), csv);
  artifacts.push_back(stem + ".json");
  artifacts.push_back(stem + ".csv");
}

std::string summary_csv(const std::vector<std::pair<FittedModel, MetricsReport>>& rows,
                        const Dataset& d) {
  std::string out =
      "model,accuracy,f1,nll,brier,ability_pearson,ability_spearman,difficulty_pearson,"
      "difficulty_spearman,discrimination_pearson,discrimination_spearman,nd_ability_bias\n";
  for (const auto& [model, m] : rows) {
    const RecoveryReport r = recovery_report(model, d);
    out += std::string(to_token(model.kind)) + ',' + format_double(m.accuracy) + ',' +
           format_double(m.f1) + ',' + format_double(m.nll) + ',' + format_double(m.brier) + ',' +
           format_double(r.ability.pearson) + ',' + format_double(r.ability.spearman) + ',' +
           format_double(r.difficulty.pearson) + ',' + format_double(r.difficulty.spearman) + ',' +
           (r.discrimination ? format_double(r.discrimination->pearson) : "") + ',' +
           (r.discrimination ? format_double(r.discrimination->spearman) : "") + ',' +
           format_double(r.nd_bias) + '\n';
  }
  return out;
}

// --- subcommands -----------------------------------------------------------------------

struct Args {
  std::string config;
  std::string fit_config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string kind;
  std::string report;
  std::vector<std::string> models;
  std::string partition = "subject";
  std::string policy = "oracle-active";
  std::optional<std::int64_t> student;
  std::string alt_ndc;
  bool quick = false;
  bool force = false;
};

void cmd_simulate(const Args& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const LoadedSimConfig sim = sim_config_from_args(a.config, a.seed, a.quick);
  const fs::path dir = a.out.empty() ? default_out("dataset") : fs::path(a.out);
  prepare_dir(dir, a.force);

  const Dataset d = generate_dataset(sim.cfg);
  write_dataset(dir, d, make_manifest(d, sim.cfg));

  RunManifest rm;
  rm.command = "simulate";
  rm.config_digest = sim.digest;
  rm.seed = sim.cfg.seed;
  rm.artifacts = {"students.csv", "items.csv", "attempts.csv", "manifest.json"};
  rm.wall_seconds = seconds_since(t0);
  write_run_manifest(dir, rm);
  out << "wrote " << d.attempts.size() << " attempts for " << d.students.size()
      << " students to " << dir.string() << "\n";
}

void cmd_fit(const Args& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const ModelKind kind = parse_model_kind(a.kind);
  const LoadedFitConfig fc = fit_config_from_args(a.fit_config, a.seed);
  const Dataset d = read_dataset(a.data);
  const fs::path dir = a.out.empty() ? default_out("fit") : fs::path(a.out);
  prepare_dir(dir, a.force);

  const FittedModel m = fit(d, kind, fc.cfg);
  save_model(dir / "model.json", m);
  write_file_atomic(dir / "trace.csv", trace_csv(m.trace));

  RunManifest rm;
  rm.command = "fit " + std::string(to_token(kind));
  rm.config_digest = fc.digest;
  rm.seed = fc.cfg.seed;
  rm.artifacts = {"model.json", "trace.csv"};
  rm.wall_seconds = seconds_since(t0);
  write_run_manifest(dir, rm);
  out << to_token(kind) << ": " << m.trace.iterations << " iterations, "
      << (m.trace.converged ? "converged" : "not converged") << ", train objective "
      << m.trace.nll.back() << "\n";
}

void cmd_eval(const Args& a, std::ostream& out) {
  const auto t0 = Clock::now();
  const std::string& report = a.report;
  static const std::vector<std::string> kReports{"metrics", "recovery", "contrast",
                                                 "delivery", "policy", "hypothesis"};
  if (std::find(kReports.begin(), kReports.end(), report) == kReports.end()) {
    throw ConfigError("unknown report '" + report +
                      "' (expected metrics, recovery, contrast, delivery, policy, hypothesis)");
  }
  // Validate option values before touching the filesystem.
  const ContrastPartition partition = parse_partition(a.partition);
  const PolicyKind policy = parse_policy(a.policy);
  std::optional<NdcProfile> alt;
  if (report == "hypothesis") {
    if (!a.student) throw ConfigError("hypothesis report needs --student");
    if (a.alt_ndc.empty()) throw ConfigError("hypothesis report needs --alt-ndc");
    alt = parse_ndc_label(a.alt_ndc);
  }
  const bool needs_models = report == "metrics" || report == "recovery";
  if (needs_models && a.models.empty()) {
    throw ConfigError(report + " report needs at least one --model");
  }
  if (report == "policy" && policy == PolicyKind::ModelActive && a.models.size() != 1) {
    throw ConfigError("model-active policy needs exactly one --model");
  }
  const bool uses_dataset = report != "delivery" && report != "policy";
  if (uses_dataset && a.data.empty()) throw ConfigError(report + " report needs a dataset");

  std::optional<Dataset> d;
  DatasetManifest manifest;
  if (!a.data.empty()) d = read_dataset(a.data, &manifest);

  std::vector<FittedModel> models;
  for (const std::string& path : a.models) models.push_back(load_model(path));
  for (std::size_t i = 0; d && i < models.size(); ++i) {
    if (models[i].n_students() != d->students.size() || models[i].n_items() != d->items.size()) {
      throw DataError(a.models[i] + ": model has " + std::to_string(models[i].n_students()) +
                      " students and " + std::to_string(models[i].n_items()) +
                      " items but the dataset has " + std::to_string(d->students.size()) +
                      " and " + std::to_string(d->items.size()));
    }
  }

  // delivery/policy re-simulate: explicit config, else the dataset's own, else defaults.
  LoadedSimConfig sim;
  if (!a.config.empty() || !d || manifest.config.is_null()) {
    sim = sim_config_from_args(a.config, a.seed, a.quick);
  } else {
    sim.cfg = sim_config_from_json(manifest.config);
    if (a.seed) sim.cfg.seed = *a.seed;
    sim.digest = manifest.config_digest;
  }

  const fs::path dir = a.out.empty() ? default_out("eval") : fs::path(a.out);
  prepare_dir(dir, a.force);
  RunManifest rm;
  rm.command = "eval " + report;
  rm.config_digest = sim.digest;
  rm.seed = sim.cfg.seed;

  if (report == "metrics") {
    json j = json::array();
    std::string csv = "model,split,n_attempts,accuracy,f1,nll,brier\n";
    for (const FittedModel& m : models) {
      const MetricsReport r = classification_metrics(m, *d, Split::Test);
      json row = to_json(r);
      row["model"] = to_token(m.kind);
      j.push_back(row);
      const std::string one = to_csv(r, to_token(m.kind));
      csv += one.substr(one.find('\n') + 1);
    }
    write_report(dir, "metrics", j, csv, rm.artifacts);
  } else if (report == "recovery") {
    json j = json::array();
    std::string csv;
    for (const FittedModel& m : models) {
      const RecoveryReport r = recovery_report(m, *d);
      j.push_back(to_json(r));
      const std::string one = to_csv(r);
      csv += csv.empty() ? one : one.substr(one.find('\n') + 1);
    }
    write_report(dir, "recovery", j, csv, rm.artifacts);
  } else if (report == "contrast") {
    const ContrastReport r = contrast_analysis(*d, partition);
    write_report(dir, "contrast_" + std::string(to_token(partition)), to_json(r), to_csv(r),
                 rm.artifacts);
  } else if (report == "delivery") {
    const DeliveryReport r = forced_delivery_experiment(sim.cfg);
    write_report(dir, "delivery", to_json(r), to_csv(r), rm.artifacts);
  } else if (report == "policy") {
    const PolicyReport r =
        policy_experiment(sim.cfg, policy, models.empty() ? nullptr : &models.front());
    write_report(dir, "policy_" + std::string(to_token(policy)), to_json(r), to_csv(r),
                 rm.artifacts);
  } else {
    const LoadedFitConfig fc = fit_config_from_args(a.fit_config, std::nullopt);
    const FittedModel* null_model = models.empty() ? nullptr : &models.front();
    const HypothesisReport r = ndc_hypothesis_test(*d, *a.student, *alt, fc.cfg, null_model);
    write_report(dir, "hypothesis", to_json(r), to_csv(r), rm.artifacts);
  }
  rm.wall_seconds = seconds_since(t0);
  write_run_manifest(dir, rm);
  out << "wrote " << report << " report to " << dir.string() << "\n";
}

}  // namespace

void write_run_manifest(const fs::path& dir, const RunManifest& m) {
  const json j = {{"command", m.command},           {"config_digest", m.config_digest},
                  {"seed", m.seed},                 {"artifacts", m.artifacts},
                  {"tool_version", m.tool_version}, {"wall_seconds", m.wall_seconds}};
  write_file_atomic(dir / "run_manifest.json", j.dump(2) + "\n");
}

RunManifest cmd_reproduce(const ReproduceOptions& opts, std::ostream& log) {
  const auto t0 = Clock::now();
  SimConfig cfg;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.quick) cfg.n_students = kQuickStudents;
  FitConfig fc;
  fc.seed = cfg.seed;

  const fs::path dir = opts.out;
  prepare_dir(dir, opts.force);
  RunManifest rm;
  rm.command = opts.quick ? "reproduce --quick" : "reproduce";
  rm.config_digest = config_digest(cfg);
  rm.seed = cfg.seed;
  auto& artifacts = rm.artifacts;

  const Dataset d = stage("simulate", [&] {
    Dataset out = generate_dataset(cfg);
    write_dataset(dir / "dataset", out, make_manifest(out, cfg));
    return out;
  });
  for (const char* f : {"students.csv", "items.csv", "attempts.csv", "manifest.json"}) {
    artifacts.push_back(std::string("dataset/") + f);
  }
  log << "simulated " << d.attempts.size() << " attempts\n";

  std::vector<std::pair<FittedModel, MetricsReport>> fitted;
  fs::create_directories(dir / "models");
  for (ModelKind kind : {ModelKind::Irt, ModelKind::IrtZilm, ModelKind::Ktm1}) {
    const std::string name(to_token(kind));
    FittedModel m = stage("fit " + name, [&] { return fit(d, kind, fc); });
    save_model(dir / "models" / (name + ".json"), m);
    write_file_atomic(dir / "models" / (name + "_trace.csv"), trace_csv(m.trace));
    artifacts.push_back("models/" + name + ".json");
    artifacts.push_back("models/" + name + "_trace.csv");
    log << "fitted " << name << " in " << m.trace.iterations << " iterations\n";
    const MetricsReport r = classification_metrics(m, d, Split::Test);
    fitted.emplace_back(std::move(m), r);
  }
  const FittedModel& zilm_model = fitted[1].first;

  const fs::path reports = dir / "reports";
  fs::create_directories(reports);
  std::vector<std::string> report_files;
  stage("metrics", [&] {
    json j = json::array();
    std::string csv = "model,split,n_attempts,accuracy,f1,nll,brier\n";
    for (const auto& [m, r] : fitted) {
      json row = to_json(r);
      row["model"] = to_token(m.kind);
      j.push_back(row);
      const std::string one = to_csv(r, to_token(m.kind));
      csv += one.substr(one.find('\n') + 1);
    }
    write_report(reports, "metrics", j, csv, report_files);
  });
  stage("recovery", [&] {
    json j = json::array();
    std::string csv;
    for (const auto& [m, r] : fitted) {
      const RecoveryReport rec = recovery_report(m, d);
      j.push_back(to_json(rec));
      const std::string one = to_csv(rec);
      csv += csv.empty() ? one : one.substr(one.find('\n') + 1);
    }
    write_report(reports, "recovery", j, csv, report_files);
  });
  stage("delivery", [&] {
    const DeliveryReport r = forced_delivery_experiment(cfg);
    write_report(reports, "delivery", to_json(r), to_csv(r), report_files);
  });
  stage("contrast", [&] {
    for (ContrastPartition p : {ContrastPartition::Subject, ContrastPartition::ReadVsListen,
                                ContrastPartition::BothVsRead, ContrastPartition::RandomHalf}) {
      const ContrastReport r = contrast_analysis(d, p);
      write_report(reports, "contrast_" + std::string(to_token(p)), to_json(r), to_csv(r),
                   report_files);
    }
  });
  stage("policy", [&] {
    for (PolicyKind p : {PolicyKind::OracleActive, PolicyKind::OracleAdversarial,
                         PolicyKind::ModelActive}) {
      const PolicyReport r = policy_experiment(cfg, p, &zilm_model);
      write_report(reports, "policy_" + std::string(to_token(p)), to_json(r), to_csv(r),
                   report_files);
    }
  });
  stage("hypothesis", [&] {
    // Probe the first student with an NDC: does dropping the label fit better?
    for (const StudentProfile& s : d.students) {
      if (ndc_count(s.ndc) == 0) continue;
      const HypothesisReport r = ndc_hypothesis_test(d, s.id, NdcProfile{}, fc, &zilm_model);
      write_report(reports, "hypothesis", to_json(r), to_csv(r), report_files);
      break;
    }
  });
  for (const std::string& f : report_files) artifacts.push_back("reports/" + f);

  write_file_atomic(dir / "summary.csv", summary_csv(fitted, d));
  artifacts.push_back("summary.csv");
  rm.wall_seconds = seconds_since(t0);
  write_run_manifest(dir, rm);
  log << "wrote summary to " << (dir / "summary.csv").string() << "\n";
  return rm;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-inflated learner model toolkit: simulate, fit, evaluate"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Args a;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset directory");
  sim->add_option("--config", a.config, "Simulation config JSON (defaults when omitted)");
  sim->add_option("--seed", a.seed, "Overrides the config seed");
  sim->add_option("--out", a.out, "Output dataset directory");
  sim->add_flag("--quick", a.quick, "500 students");
  sim->add_flag("--force", a.force, "Overwrite a non-empty output directory");

  auto* fitc = app.add_subcommand("fit", "Fit one model kind to a dataset");
  fitc->add_option("dataset", a.data, "Dataset directory")->required();
  fitc->add_option("--kind", a.kind, "irt, irt_zilm or ktm1")->required();
  fitc->add_option("--config", a.fit_config, "Fit config JSON");
  fitc->add_option("--seed", a.seed, "Overrides the fit seed");
  fitc->add_option("--out", a.out, "Output directory for model.json and trace.csv");
  fitc->add_flag("--force", a.force, "Overwrite a non-empty output directory");

  auto* ev = app.add_subcommand("eval", "Compute one report");
  ev->add_option("report", a.report,
                 "metrics, recovery, contrast, delivery, policy or hypothesis")
      ->required();
  ev->add_option("dataset", a.data, "Dataset directory");
  ev->add_option("--model", a.models, "Fitted model.json (repeatable)");
  ev->add_option("--config", a.config, "Simulation config for delivery/policy");
  ev->add_option("--fit-config", a.fit_config, "Fit config for the hypothesis null model");
  ev->add_option("--seed", a.seed, "Overrides the simulation seed");
  ev->add_option("--partition", a.partition,
                 "subject, read_vs_listen, both_vs_read or random_half");
  ev->add_option("--policy", a.policy,
                 "random, oracle-active, oracle-adversarial or model-active");
  ev->add_option("--student", a.student, "Student id for the hypothesis report");
  ev->add_option("--alt-ndc", a.alt_ndc, "Alternative NDC flags, e.g. dyslexia+spd or nt");
  ev->add_option("--out", a.out, "Output directory");
  ev->add_flag("--quick", a.quick, "500 students when re-simulating");
  ev->add_flag("--force", a.force, "Overwrite a non-empty output directory");

  auto* rep = app.add_subcommand("reproduce", "Run the whole pipeline and write summary.csv");
  rep->add_option("--out", a.out, "Output directory");
  rep->add_option("--seed", a.seed, "Simulation and fit seed");
  rep->add_flag("--quick", a.quick, "500 students");
  rep->add_flag("--force", a.force, "Overwrite a non-empty output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Error& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) {
      cmd_simulate(a, out);
    } else if (fitc->parsed()) {
      cmd_fit(a, out);
    } else if (ev->parsed()) {
      cmd_eval(a, out);
    } else {
      ReproduceOptions opts;
      opts.out = a.out.empty() ? default_out("reproduce") : fs::path(a.out);
      opts.seed = a.seed;
      opts.quick = a.quick;
      opts.force = a.force;
      cmd_reproduce(opts, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace zilm
