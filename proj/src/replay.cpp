#include "rits/replay.hpp"

#include "rits/delimited.hpp"
#include "rits/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace rits {

namespace {

std::string row_text(int row) { return "row " + std::to_string(row) + ": "; }

std::optional<int> arm_suffix(const std::string& column, const std::string& prefix) {
  if (column.size() <= prefix.size() || column.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  const auto v = parse_integer(std::string_view(column).substr(prefix.size()));
  if (!v || *v < 1 || *v > 1000000) return std::nullopt;
  return static_cast<int>(*v);
}

}  // namespace

void HistoricalDataset::validate() const {
  if (K < 2) throw DatasetError("dataset needs at least two arms", 0);
  if (rows.empty()) throw DatasetError("dataset has no rows", 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    const auto& r = rows[i];
    if (static_cast<int>(r.covariates.size()) != d_raw())
      throw DatasetError(row_text(row) + "covariate count differs from the header", row);
    if (!r.historical_arm.valid_for(K))
      throw DatasetError(row_text(row) + "arm " + std::to_string(r.historical_arm.value()) + " outside 1.." +
                             std::to_string(K), row);
    if (static_cast<int>(r.potential_efficacy.size()) != K || static_cast<int>(r.potential_safety.size()) != K)
      throw DatasetError(row_text(row) + "needs one potential outcome per arm", row);
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(r.covariates) || !finite(r.potential_efficacy) || !finite(r.potential_safety))
      throw DatasetError(row_text(row) + "non-finite value", row);
  }
}

HistoricalDataset parse_dataset(std::istream& in, const DatasetSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("dataset is empty (no header)", 0);
  const auto header = split_fields(line);

  std::map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw DatasetError("header has an empty column name", 0);
    if (!position.emplace(header[c], c).second) throw DatasetError("duplicate column " + header[c], 0);
  }
  auto column = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw DatasetError("missing column " + name, 0);
    return it->second;
  };

  int K = 0;
  if (schema.arms) {
    K = *schema.arms;
  } else {
    for (const auto& name : header) {
      if (auto a = arm_suffix(name, schema.efficacy_prefix)) K = std::max(K, *a);
    }
  }
  if (K < 2) throw DatasetError("need efficacy columns for at least two arms", 0);

  const std::size_t arm_col = column(schema.arm_column);
  std::vector<std::size_t> eff_cols, saf_cols;
  for (int a = 1; a <= K; ++a) {
    eff_cols.push_back(column(schema.efficacy_prefix + std::to_string(a)));
    saf_cols.push_back(column(schema.safety_prefix + std::to_string(a)));
  }

  HistoricalDataset ds;
  ds.K = K;
  std::vector<std::size_t> cov_cols;
  if (!schema.covariate_columns.empty()) {
    for (const auto& name : schema.covariate_columns) {
      cov_cols.push_back(column(name));
      ds.covariate_names.push_back(name);
    }
  } else {
    std::vector<bool> claimed(header.size(), false);
    claimed[arm_col] = true;
    for (auto c : eff_cols) claimed[c] = true;
    for (auto c : saf_cols) claimed[c] = true;
    for (const auto& name : header) {
      // potential-outcome columns of arms beyond K are not covariates either
      if (arm_suffix(name, schema.efficacy_prefix) || arm_suffix(name, schema.safety_prefix))
        claimed[position[name]] = true;
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (claimed[c]) continue;
      cov_cols.push_back(c);
      ds.covariate_names.push_back(header[c]);
    }
  }

  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split_fields(line);
    if (cells.size() != header.size())
      throw DatasetError(row_text(row) + "expected " + std::to_string(header.size()) + " cells, found " +
                             std::to_string(cells.size()), row);
    auto number = [&](std::size_t c) {
      const auto v = parse_double(cells[c]);
      if (!v || !std::isfinite(*v))
        throw DatasetError(row_text(row) + "non-numeric cell '" + cells[c] + "' in column " + header[c], row);
      return *v;
    };
    HistoricalRow r;
    for (auto c : cov_cols) r.covariates.push_back(number(c));
    const auto arm = parse_integer(cells[arm_col]);
    if (!arm) throw DatasetError(row_text(row) + "arm '" + cells[arm_col] + "' is not an integer", row);
    if (*arm < 1 || *arm > K)
      throw DatasetError(row_text(row) + "arm " + cells[arm_col] + " outside 1.." + std::to_string(K), row);
    r.historical_arm = ArmId(static_cast<int>(*arm));
    for (auto c : eff_cols) r.potential_efficacy.push_back(number(c));
    for (auto c : saf_cols) r.potential_safety.push_back(number(c));
    ds.rows.push_back(std::move(r));
  }
  if (ds.rows.empty()) throw DatasetError("dataset has no rows", 0);
  ds.validate();
  return ds;
}

HistoricalDataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset " + path, 0);
  return parse_dataset(in, schema);
}

void write_dataset(std::ostream& out, const HistoricalDataset& ds, const DatasetSchema& schema) {
  ds.validate();
  std::vector<std::string> header = ds.covariate_names;
  header.push_back(schema.arm_column);
  for (int a = 1; a <= ds.K; ++a) header.push_back(schema.efficacy_prefix + std::to_string(a));
  for (int a = 1; a <= ds.K; ++a) header.push_back(schema.safety_prefix + std::to_string(a));
  TableWriter table(out, header);
  for (const auto& r : ds.rows) {
    for (double v : r.covariates) table.cell(v);
    table.cell(r.historical_arm.value());
    for (double v : r.potential_efficacy) table.cell(v);
    for (double v : r.potential_safety) table.cell(v);
    table.end_row();
  }
}

void save_dataset(const std::string& path, const HistoricalDataset& ds, const DatasetSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write dataset " + path, 0);
  write_dataset(out, ds, schema);
}

std::vector<int> bootstrap_resample(const HistoricalDataset& ds, int size, Rng& rng) {
  if (ds.rows.empty()) throw ValidationError("cannot resample an empty dataset");
  if (size < 1) throw ConfigError("resample size must be positive", {{"sample_size", ">= 1"}});
  std::uniform_int_distribution<int> pick(0, ds.size() - 1);
  std::vector<int> out(static_cast<std::size_t>(size));
  for (auto& i : out) i = pick(rng);
  return out;
}

HistoricalDataset materialize_dataset(const DgpSpec& spec, int rows, Rng& population, Rng& historical) {
  spec.validate();
  if (rows < 1) throw ConfigError("need at least one row", {{"rows", ">= 1"}});
  HistoricalDataset ds;
  ds.K = spec.arms();
  ds.covariate_names = {"z", "z2"};
  std::uniform_int_distribution<int> arm(1, ds.K);
  for (int i = 0; i < rows; ++i) {
    Profile p = draw_profile(spec, population);
    HistoricalRow r;
    r.covariates = p.x.raw_vector();
    r.historical_arm = ArmId(arm(historical));
    r.potential_efficacy = std::move(p.efficacy);
    r.potential_safety = std::move(p.safety);
    ds.rows.push_back(std::move(r));
  }
  return ds;
}

std::vector<double> dataset_effect_sizes(const HistoricalDataset& ds) {
  ds.validate();
  std::vector<double> out;
  for (int a = 2; a <= ds.K; ++a) {
    double sum = 0.0;
    for (const auto& r : ds.rows) {
      sum += r.potential_efficacy[static_cast<std::size_t>(a - 1)] - r.potential_efficacy[0];
    }
    out.push_back(sum / ds.size());
  }
  return out;
}

DatasetSource::DatasetSource(const HistoricalDataset& ds, std::vector<int> resample)
    : ds_(ds), resample_(std::move(resample)), reads_(resample_.size()) {
  for (int i : resample_) {
    if (i < 0 || i >= ds.size()) throw ValidationError("resample index out of range");
  }
}

Covariates DatasetSource::covariates(int i) {
  return Covariates::from_raw(ds_.rows.at(static_cast<std::size_t>(resample_.at(static_cast<std::size_t>(i)))).covariates);
}

std::pair<double, double> DatasetSource::outcome(int i, ArmId a) {
  auto& slot = reads_.at(static_cast<std::size_t>(i));
  if (slot) throw ValidationError("outcome of position " + std::to_string(i + 1) + " read twice");
  if (!a.valid_for(ds_.K)) throw ValidationError("arm outside the dataset");
  slot = a;
  const auto& row = ds_.rows[static_cast<std::size_t>(resample_[static_cast<std::size_t>(i)])];
  return {row.potential_efficacy[a.index()], row.potential_safety[a.index()]};
}

DatasetSource::Audit DatasetSource::audit(std::span<const ParticipantRecord> records) const {
  Audit out;
  for (std::size_t i = 0; i < reads_.size(); ++i) {
    if (!reads_[i]) {
      ++out.unread_positions;
      continue;
    }
    if (i >= records.size() || records[i].arm != *reads_[i]) {
      ++out.off_allocation_reads;
      continue;
    }
    const auto& row = ds_.rows[static_cast<std::size_t>(resample_[i])];
    if (row.historical_arm == *reads_[i]) ++out.observed_reads;
    else ++out.counterfactual_reads;
  }
  return out;
}

Regrets potential_outcome_regrets(const HistoricalDataset& ds, const std::vector<int>& resample,
                                  std::span<const ParticipantRecord> records, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("regret weight must lie in [0, 1]", {{"w", "[0, 1]"}});
  if (records.size() > resample.size()) throw ValidationError("more records than resampled rows");
  Regrets out;
  double utility = 0.0, efficacy = 0.0, safety = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& row = ds.rows.at(static_cast<std::size_t>(resample[i]));
    const auto chosen = records[i].arm.index();
    double best_u = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < ds.K; ++k) {
      const auto j = static_cast<std::size_t>(k);
      best_u = std::max(best_u, w * row.potential_efficacy[j] + (1.0 - w) * row.potential_safety[j]);
    }
    utility += best_u - (w * row.potential_efficacy[chosen] + (1.0 - w) * row.potential_safety[chosen]);
    efficacy += *std::max_element(row.potential_efficacy.begin(), row.potential_efficacy.end()) -
                row.potential_efficacy[chosen];
    safety += *std::max_element(row.potential_safety.begin(), row.potential_safety.end()) -
              row.potential_safety[chosen];
    out.utility.push_back(utility);
    out.efficacy.push_back(efficacy);
    out.safety.push_back(safety);
  }
  return out;
}

ReplayResult replay_trial(const HistoricalDataset& ds, const std::vector<int>& resample,
                          const TrialConfig& config, const PolicyKind& policy,
                          const std::vector<Evaluator>& evaluators, const std::vector<int>& checkpoints) {
  if (config.K != ds.K) throw ConfigError("K differs from the dataset's arm count", {{"K", "match the dataset"}});
  if (config.d_raw != ds.d_raw())
    throw ConfigError("d_raw differs from the dataset's covariate count", {{"d_raw", "match the dataset"}});
  DatasetSource source(ds, resample);
  ReplayResult out;
  out.result = run_allocation_and_evaluation(source, config, policy, evaluators, checkpoints);
  out.regrets = potential_outcome_regrets(ds, resample, out.result.records, config.w);
  out.audit = source.audit(out.result.records);
  return out;
}

TrialConfig ReplayPlan::default_config() {
  TrialConfig c;
  c.n0 = 60;
  c.delta = 0.05;
  return c;
}

std::vector<int> ReplayPlan::effective_checkpoints() const {
  if (!checkpoints.empty()) return checkpoints;
  std::vector<int> out;
  for (int n = 50; n < sample_size; n += 50) out.push_back(n);
  out.push_back(sample_size);
  return out;
}

void ReplayPlan::validate(const HistoricalDataset& ds) const {
  ds.validate();
  TrialConfig c = config;
  c.K = ds.K;
  c.d_raw = ds.d_raw();
  c.validate();
  if (n_sim < 1) throw ConfigError("need at least one replication", {{"n_sim", ">= 1"}});
  if (sample_size < c.m) throw ConfigError("sample size must reach the burn-in m", {{"sample_size", ">= m"}});
  if (policies.empty()) throw ConfigError("no policies to replay", {{"policies", "non-empty"}});
  if (parallelism < 1) throw ConfigError("parallelism must be positive", {{"parallelism", ">= 1"}});
  for (int cp : effective_checkpoints()) {
    if (cp < 4 || cp > sample_size)
      throw ConfigError("checkpoints must lie in [4, sample_size]", {{"checkpoints", "range"}});
  }
}

ReplaySummaries run_replay_summaries(const HistoricalDataset& ds, const ReplayPlan& plan) {
  plan.validate(ds);
  const auto truth = dataset_effect_sizes(ds);
  const auto checkpoints = plan.effective_checkpoints();
  const auto reps = static_cast<std::size_t>(plan.n_sim);
  ReplaySummaries out;
  out.summaries.resize(reps);
  std::vector<DatasetSource::Audit> audits(reps);

  parallel_for(plan.n_sim, plan.parallelism, [&](int rep) {
    const auto seeds = replication_seeds(plan.master_seed, rep);
    Rng boot = derive_rng(plan.master_seed, {static_cast<std::uint64_t>(rep), tag(Stream::kBootstrap)});
    const auto resample = bootstrap_resample(ds, plan.sample_size, boot);
    TrialConfig config = plan.config;
    config.K = ds.K;
    config.d_raw = ds.d_raw();
    config.seed = seeds.trial;
    auto& slot = out.summaries[static_cast<std::size_t>(rep)];
    auto& audit = audits[static_cast<std::size_t>(rep)];
    for (const auto& policy : plan.policies) {
      const auto r = replay_trial(ds, resample, config, policy, evaluators_for(policy), checkpoints);
      slot.push_back(summarize_trial(r.result, policy, config, truth, checkpoints, &r.regrets));
      audit.observed_reads += r.audit.observed_reads;
      audit.counterfactual_reads += r.audit.counterfactual_reads;
      audit.off_allocation_reads += r.audit.off_allocation_reads;
    }
  });
  for (const auto& a : audits) {
    out.observed_reads += a.observed_reads;
    out.counterfactual_reads += a.counterfactual_reads;
    out.off_allocation_reads += a.off_allocation_reads;
  }
  return out;
}

Metrics run_replay_replications(const HistoricalDataset& ds, const ReplayPlan& plan) {
  const auto s = run_replay_summaries(ds, plan);
  TrialConfig config = plan.config;
  config.K = ds.K;
  config.d_raw = ds.d_raw();
  return aggregate_metrics(s.summaries, config, dataset_effect_sizes(ds), plan.effective_checkpoints());
}

}  // namespace rits
