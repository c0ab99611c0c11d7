#include "rits/cli.hpp"

#include "rits/delimited.hpp"
#include "rits/http_server.hpp"
#include "rits/json_io.hpp"
#include "rits/replay.hpp"
#include "rits/service.hpp"
#include "rits/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rits::cli {

namespace {

namespace fs = std::filesystem;

struct Values {
  std::string config_file;
  TrialConfig trial;
  TrialConfig replay_trial = ReplayPlan::default_config();  // run-in 60, clipping 0.05
  std::string rho_mode = "as_printed";

  // simulate
  std::string dgp = "high_snr";
  int reps = 1000;
  int n_obs = 200;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::vector<std::string> policies;
  std::vector<int> checkpoints;
  int parallelism = 1;

  // replay
  std::string data;
  int sample_size = 654;
  std::string arm_column = "arm";
  std::vector<std::string> covariates;

  // gen-data
  int rows = 654;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string journal_dir;
  std::string token;

  // export-cs
  std::string journal;
  std::string variant = "aipw";
  std::string cs_out = "-";
};

void add_trial_options(CLI::App* sub, TrialConfig& c, Values& v) {
  sub->add_option("--w", c.w, "efficacy weight of RiTS and of the regret utility")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--n0", c.n0, "equal-randomization run-in");
  sub->add_option("--delta", c.delta, "clipping level");
  sub->add_option("--m", c.m, "confidence-sequence burn-in");
  sub->add_option("--alpha", c.alpha, "miscoverage level");
  sub->add_option("--sigma0_sq", c.sigma0_sq, "likelihood variance of the posterior updates");
  sub->add_option("--M", c.M, "posterior draws per propensity");
  sub->add_option("--lambda", c.lambda, "ridge penalty");
  sub->add_option("--delay", c.delay, "outcome delay in enrollments");
  sub->add_option("--threshold", c.threshold, "minimum clinically significant effect size");
  sub->add_option("--rho_mode", v.rho_mode, "as_printed | variance");
}

void add_run_options(CLI::App* sub, Values& v) {
  sub->add_option("--config", v.config_file, "key = value file; flags override it");
  sub->add_option("--reps", v.reps, "replications")->check(CLI::PositiveNumber);
  sub->add_option("--seed", v.seed, "master seed");
  sub->add_option("--out", v.out, "output directory");
  sub->add_option("--checkpoints", v.checkpoints, "reporting checkpoints")->delimiter(',');
  sub->add_option("--parallelism,-j", v.parallelism, "worker threads")->check(CLI::PositiveNumber);
}

/// Declares every subcommand on `app`, binding into `v`.
void declare(CLI::App& app, Values& v) {
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo experiments on a synthetic DGP");
  add_run_options(sim, v);
  add_trial_options(sim, v.trial, v);
  sim->add_option("--dgp", v.dgp, "high_snr | low_snr");
  sim->add_option("--n_obs", v.n_obs, "participants per trial")->check(CLI::PositiveNumber);
  sim->add_option("--policies,--policy", v.policies, "rand, ts, rits")->delimiter(',');

  auto* rep = app.add_subcommand("replay", "Bootstrap replay of a historical dataset");
  add_run_options(rep, v);
  add_trial_options(rep, v.replay_trial, v);
  rep->add_option("--data", v.data, "dataset file")->required();
  rep->add_option("--policies,--policy", v.policies, "rand, ts, rits")->delimiter(',');
  rep->add_option("--sample_size", v.sample_size, "participants per resample")->check(CLI::PositiveNumber);
  rep->add_option("--arm_column", v.arm_column, "historical arm column");
  rep->add_option("--covariates", v.covariates, "covariate columns (default: all others)")->delimiter(',');

  auto* gen = app.add_subcommand("gen-data", "Synthetic dataset with every potential outcome");
  gen->add_option("--config", v.config_file, "key = value file; flags override it");
  gen->add_option("--dgp", v.dgp, "high_snr | low_snr");
  gen->add_option("--rows", v.rows, "participants")->check(CLI::PositiveNumber);
  gen->add_option("--seed", v.seed, "master seed");
  gen->add_option("--out", v.out, "dataset file")->required();

  auto* serve = app.add_subcommand("serve", "Live trial service over HTTP");
  serve->add_option("--config", v.config_file, "key = value file; flags override it");
  serve->add_option("--host", v.host, "bind address");
  serve->add_option("--port", v.port, "port")->check(CLI::Range(0, 65535));
  serve->add_option("--journal_dir", v.journal_dir, "directory of trial journals");
  serve->add_option("--token", v.token, "static bearer token");

  auto* exp = app.add_subcommand("export-cs", "Confidence sequences of a journal as a table");
  exp->add_option("--journal", v.journal, "journal file")->required();
  exp->add_option("--variant", v.variant, "aipw | ipw | all");
  exp->add_option("--out", v.cs_out, "output file ('-' for stdout)");
}

/// Arguments taken from --config for options the command line leaves unset.
std::vector<std::string> config_arguments(CLI::App& sub, const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("cannot read config file " + path, {{"config", "file not found"}});
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw ConfigError("cannot parse config file " + path + ": " + e.what(), {{"config", "unparseable"}});
  }
  std::vector<std::string> out;
  std::vector<ConfigError::FieldIssue> issues;
  for (const auto& item : items) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub.get_name())) continue;
    if (item.name == "config" || item.name == "++" || item.name == "--") continue;
    const CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr) {
      issues.push_back({item.name, "unknown key in " + path});
      continue;
    }
    if (opt->count() > 0) continue;  // flag given on the command line wins
    if (item.inputs.size() == 1) {
      out.push_back("--" + item.name + "=" + item.inputs.front());
    } else {
      out.push_back("--" + item.name);
      for (const auto& s : item.inputs) out.push_back(s);
    }
  }
  if (!issues.empty()) throw ConfigError("config file has unknown keys", std::move(issues));
  return out;
}

std::vector<PolicyKind> policies_from(const Values& v) {
  std::vector<std::string> names = v.policies;
  if (names.empty()) names = {"rand", "ts", "rits"};
  std::vector<PolicyKind> out;
  for (const auto& name : names) out.push_back(PolicyKind::parse(name, v.trial.w));
  return out;
}

TrialConfig trial_from(const Values& v, TrialConfig c) {
  c.rho_mode = parse_rho_mode(v.rho_mode);
  return c;
}

Json policies_json(const std::vector<PolicyKind>& policies) {
  Json j = Json::array();
  for (const auto& p : policies) j.push_back(to_json(p));
  return j;
}

std::string write_file(const fs::path& dir, const std::string& name, const std::string& content) {
  const fs::path path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error("cannot write " + path.string());
  return name;
}

std::vector<std::string> write_metrics(const fs::path& dir, const Metrics& metrics) {
  fs::create_directories(dir);
  std::vector<std::string> files;
  {
    std::ostringstream s;
    TableWriter t(s, {"method", "arm", "checkpoint", "truth", "bias", "rmse", "variance", "mean_width",
                      "miscoverage", "count"});
    for (const auto& c : metrics.cells) {
      t.cell(c.method).cell(c.arm).cell(c.checkpoint).cell(c.truth).cell(c.bias).cell(c.rmse);
      t.cell(c.variance).cell(c.mean_width).cell(c.miscoverage).cell(c.count).end_row();
    }
    files.push_back(write_file(dir, "metrics.csv", s.str()));
  }
  {
    std::ostringstream s;
    TableWriter t(s, {"method", "checkpoint", "sc", "wa4"});
    for (const auto& x : metrics.selection) t.cell(x.method).cell(x.checkpoint).cell(x.sc).cell(x.wa4).end_row();
    files.push_back(write_file(dir, "selection.csv", s.str()));
  }
  if (!metrics.regrets.empty()) {
    std::ostringstream s;
    TableWriter t(s, {"policy", "criterion", "checkpoint", "mean", "median", "q25", "q75"});
    for (const auto& r : metrics.regrets) {
      t.cell(r.policy).cell(to_string(r.criterion)).cell(r.checkpoint).cell(r.mean).cell(r.median);
      t.cell(r.q25).cell(r.q75).end_row();
    }
    files.push_back(write_file(dir, "regret.csv", s.str()));
  }
  {
    std::ostringstream s;
    TableWriter t(s, {"policy", "arm", "mean_count"});
    for (const auto& a : metrics.allocation) t.cell(a.policy).cell(a.arm).cell(a.mean_count).end_row();
    files.push_back(write_file(dir, "allocation.csv", s.str()));
  }
  return files;
}

void write_manifest(const fs::path& dir, const std::string& command, std::uint64_t seed, Json config,
                    const std::string& started, std::vector<std::string> outputs) {
  outputs.push_back("manifest.json");
  Json j{{"command", command},     {"version", kVersion},   {"master_seed", seed},
         {"config", std::move(config)}, {"started_at", started}, {"finished_at", utc_now()},
         {"outputs", outputs}};
  write_file(dir, "manifest.json", j.dump(2) + "\n");
}

int cmd_simulate(const Values& v) {
  const std::string started = utc_now();
  SimulationPlan plan;
  plan.dgp = DgpSpec::named(v.dgp);
  plan.config = trial_from(v, v.trial);
  plan.config.K = plan.dgp.arms();
  plan.config.d_raw = 2;
  plan.n_obs = v.n_obs;
  plan.policies = policies_from(v);
  if (!v.checkpoints.empty()) plan.checkpoints = v.checkpoints;
  plan.n_sim = v.reps;
  plan.master_seed = v.seed;
  plan.parallelism = v.parallelism;
  plan.validate();

  const Metrics metrics = run_replications(plan);
  const fs::path dir = v.out;
  auto files = write_metrics(dir, metrics);
  {
    std::ostringstream s;
    TableWriter t(s, {"arm", "from_formula", "printed", "discrepant"});
    for (const auto& row : effect_size_report(plan.dgp)) {
      t.cell(row.arm.value()).cell(row.from_formula);
      t.cell(row.printed ? format_double(*row.printed) : std::string("")).cell(row.discrepant ? 1 : 0).end_row();
    }
    files.push_back(write_file(dir, "effect_sizes.csv", s.str()));
  }
  Json config{{"dgp", plan.dgp.name},           {"n_obs", plan.n_obs},     {"reps", plan.n_sim},
              {"policies", policies_json(plan.policies)}, {"checkpoints", plan.checkpoints},
              {"parallelism", plan.parallelism}, {"trial", to_json(plan.config)},
              {"positivity_violations", metrics.positivity_violations}};
  write_manifest(dir, "simulate", plan.master_seed, std::move(config), started, files);
  for (const auto& f : files) std::cout << (dir / f).string() << "\n";
  for (const auto& row : effect_size_report(plan.dgp)) {
    if (row.discrepant)
      std::cerr << "note: arm " << row.arm.value() << " effect size " << format_double(row.from_formula)
                << " from the mean functions differs from the printed " << format_double(*row.printed) << "\n";
  }
  return 0;
}

int cmd_replay(const Values& v) {
  const std::string started = utc_now();
  DatasetSchema schema;
  schema.arm_column = v.arm_column;
  schema.covariate_columns = v.covariates;
  const HistoricalDataset ds = load_dataset(v.data, schema);
  std::cerr << "loaded " << ds.size() << " rows, " << ds.K << " arms, " << ds.d_raw() << " covariates\n";

  ReplayPlan plan;
  plan.config = trial_from(v, v.replay_trial);
  plan.config.K = ds.K;
  plan.config.d_raw = ds.d_raw();
  plan.policies = policies_from(v);
  plan.sample_size = v.sample_size;
  plan.checkpoints = v.checkpoints;
  plan.n_sim = v.reps;
  plan.master_seed = v.seed;
  plan.parallelism = v.parallelism;
  plan.validate(ds);

  const auto summaries = run_replay_summaries(ds, plan);
  const auto truth = dataset_effect_sizes(ds);
  const Metrics metrics = aggregate_metrics(summaries.summaries, plan.config, truth, plan.effective_checkpoints());
  const fs::path dir = v.out;
  auto files = write_metrics(dir, metrics);
  {
    std::ostringstream s;
    TableWriter t(s, {"arm", "dataset_effect"});
    for (std::size_t k = 0; k < truth.size(); ++k) t.cell(static_cast<int>(k) + 2).cell(truth[k]).end_row();
    files.push_back(write_file(dir, "effect_sizes.csv", s.str()));
  }
  Json config{{"data", v.data},
              {"rows", ds.size()},
              {"covariates", ds.covariate_names},
              {"sample_size", plan.sample_size},
              {"reps", plan.n_sim},
              {"policies", policies_json(plan.policies)},
              {"checkpoints", plan.effective_checkpoints()},
              {"parallelism", plan.parallelism},
              {"trial", to_json(plan.config)},
              {"positivity_violations", metrics.positivity_violations},
              {"audit",
               {{"observed_reads", summaries.observed_reads},
                {"counterfactual_reads", summaries.counterfactual_reads},
                {"off_allocation_reads", summaries.off_allocation_reads}}}};
  write_manifest(dir, "replay", plan.master_seed, std::move(config), started, files);
  for (const auto& f : files) std::cout << (dir / f).string() << "\n";
  return summaries.off_allocation_reads == 0 ? 0 : 1;
}

int cmd_gen_data(const Values& v) {
  const DgpSpec spec = DgpSpec::named(v.dgp);
  // replication 0 of the simulation seed schedule
  Rng population(replication_seeds(v.seed, 0).population);
  Rng historical = derive_rng(v.seed, {0, tag(Stream::kHistoricalArm)});
  const auto ds = materialize_dataset(spec, v.rows, population, historical);
  const fs::path path = v.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_dataset(path.string(), ds);
  std::cout << path.string() << ": " << ds.size() << " rows\n";
  return 0;
}

int cmd_serve(const Values& v) {
  ServiceOptions options;
  if (!v.journal_dir.empty()) options.journal_dir = fs::path(v.journal_dir);
  TrialService service(options);
  HttpOptions http;
  http.host = v.host;
  http.port = v.port;
  if (!v.token.empty()) http.token = v.token;
  HttpServer server(service, http);
  std::cerr << "serving " << service.trials().size() << " restored trial(s) on " << v.host << ":" << v.port << "\n";
  server.run();
  return 0;
}

int cmd_export_cs(const Values& v) {
  std::ifstream in(v.journal);
  if (!in) throw ValidationError("cannot open journal " + v.journal);
  const TrialState state = replay_journal(in, true);
  std::vector<Variant> variants;
  if (v.variant == "all") variants = {Variant::kAIPW, Variant::kIPW};
  else variants = {parse_variant(v.variant)};

  std::ostringstream s;
  TableWriter t(s, {"n", "arm", "estimate", "lower", "upper", "sigma_sq", "rho", "variant"});
  for (Variant variant : variants) {
    const CsReport report = confidence_sequences(state, variant);
    if (report.burn_in)
      std::cerr << "burn-in not reached: " << report.complete << " complete of m = " << report.m << "\n";
    for (const auto& series : report.series) {
      for (const auto& p : series.points) {
        t.cell(p.n).cell(p.arm.value()).cell(p.estimate).cell(p.lower).cell(p.upper);
        t.cell(p.sigma_sq_hat).cell(p.rho).cell(to_string(variant)).end_row();
      }
    }
  }
  if (v.cs_out == "-") {
    std::cout << s.str();
  } else {
    std::ofstream out(v.cs_out, std::ios::binary | std::ios::trunc);
    out << s.str();
    if (!out) throw Error("cannot write " + v.cs_out);
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    Values first;
    CLI::App probe{"Risk-inclusive adaptive trial engine", "rits"};
    declare(probe, first);
    try {
      auto copy = argv_rev;
      probe.parse(copy);
    } catch (const CLI::ParseError& e) {
      return probe.exit(e);
    }
    CLI::App* sub = probe.get_subcommands().front();

    Values v;
    CLI::App app{"Risk-inclusive adaptive trial engine", "rits"};
    declare(app, v);
    auto full = args;
    if (!first.config_file.empty()) {
      const auto extra = config_arguments(*sub, first.config_file);
      const auto at = std::find(full.begin(), full.end(), sub->get_name());
      full.insert(at == full.end() ? full.end() : at + 1, extra.begin(), extra.end());
    }
    try {
      std::vector<std::string> rev(full.rbegin(), full.rend());
      app.parse(rev);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "simulate") return cmd_simulate(v);
    if (command == "replay") return cmd_replay(v);
    if (command == "gen-data") return cmd_gen_data(v);
    if (command == "serve") return cmd_serve(v);
    if (command == "export-cs") return cmd_export_cs(v);
    std::cerr << "unknown command " << command << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& f : e.issues()) std::cerr << "  " << f.field << ": " << f.message << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace rits::cli
