#pragma once

#include "rits/core.hpp"
#include "rits/dgp.hpp"
#include "rits/metrics.hpp"
#include "rits/rng.hpp"
#include "rits/trial.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rits {

/// Dataset problems: bad schema, bad cell, unreadable file. row is the
/// 1-based data row (0 for header and file problems).
class DatasetError : public ValidationError {
 public:
  DatasetError(const std::string& what, int row) : ValidationError(what), row_(row) {}
  int row() const noexcept { return row_; }

 private:
  int row_;
};

/// One historical participant with every potential outcome filled in. The
/// slot of the historical arm holds the observed outcome.
struct HistoricalRow {
  std::vector<double> covariates;
  ArmId historical_arm{1};
  std::vector<double> potential_efficacy;  // K
  std::vector<double> potential_safety;    // K

  friend bool operator==(const HistoricalRow&, const HistoricalRow&) = default;
};

struct HistoricalDataset {
  int K = 0;
  std::vector<std::string> covariate_names;
  std::vector<HistoricalRow> rows;

  int size() const noexcept { return static_cast<int>(rows.size()); }
  int d_raw() const noexcept { return static_cast<int>(covariate_names.size()); }
  /// Throws DatasetError on the first inconsistent row.
  void validate() const;

  friend bool operator==(const HistoricalDataset&, const HistoricalDataset&) = default;
};

/// Column layout. Potential outcomes live in <prefix><arm> columns, arms
/// counted from 1. Covariates default to every column not claimed otherwise,
/// in file order.
struct DatasetSchema {
  std::string arm_column = "arm";
  std::string efficacy_prefix = "eff_";
  std::string safety_prefix = "saf_";
  std::optional<int> arms;                   // inferred from the efficacy columns when unset
  std::vector<std::string> covariate_columns;
};

HistoricalDataset parse_dataset(std::istream& in, const DatasetSchema& schema = {});
HistoricalDataset load_dataset(const std::string& path, const DatasetSchema& schema = {});

/// Header: covariates, arm, eff_1..eff_K, saf_1..saf_K. Round-trips exactly.
void write_dataset(std::ostream& out, const HistoricalDataset& ds, const DatasetSchema& schema = {});
void save_dataset(const std::string& path, const HistoricalDataset& ds, const DatasetSchema& schema = {});

/// Uniform with-replacement row indices.
std::vector<int> bootstrap_resample(const HistoricalDataset& ds, int size, Rng& rng);

/// Synthetic dataset from a DGP: participant profiles come from `population`
/// exactly as a simulation would draw them, historical arms uniformly from
/// `historical`. Covariate columns are z and z2.
HistoricalDataset materialize_dataset(const DgpSpec& spec, int rows, Rng& population, Rng& historical);

/// theta(a) - theta(1) over the rows of the dataset, arms 2..K.
std::vector<double> dataset_effect_sizes(const HistoricalDataset& ds);

/// Serves a resampled dataset to the trial engine and remembers every
/// potential-outcome read.
class DatasetSource final : public OutcomeSource {
 public:
  DatasetSource(const HistoricalDataset& ds, std::vector<int> resample);

  int size() const override { return static_cast<int>(resample_.size()); }
  Covariates covariates(int i) override;
  /// Each position may be read once.
  std::pair<double, double> outcome(int i, ArmId a) override;

  struct Audit {
    int observed_reads = 0;        // allocated arm matched the historical arm
    int counterfactual_reads = 0;  // imputed slot served
    int off_allocation_reads = 0;  // slot other than the allocated arm (must stay 0)
    int unread_positions = 0;
  };

  /// Compares the reads against the allocations that were made.
  Audit audit(std::span<const ParticipantRecord> records) const;
  const std::vector<int>& resample() const noexcept { return resample_; }

 private:
  const HistoricalDataset& ds_;
  std::vector<int> resample_;
  std::vector<std::optional<ArmId>> reads_;
};

struct ReplayResult {
  TrialResult result;
  Regrets regrets;  // against the row's own potential outcomes
  DatasetSource::Audit audit;
};

/// Cumulative regrets against the potential outcomes of the served rows.
Regrets potential_outcome_regrets(const HistoricalDataset& ds, const std::vector<int>& resample,
                                  std::span<const ParticipantRecord> records, double w);

/// Allocation over the resampled participants, then the simulation's
/// evaluation pipeline.
ReplayResult replay_trial(const HistoricalDataset& ds, const std::vector<int>& resample,
                          const TrialConfig& config, const PolicyKind& policy,
                          const std::vector<Evaluator>& evaluators, const std::vector<int>& checkpoints);

struct ReplayPlan {
  TrialConfig config = default_config();
  std::vector<PolicyKind> policies = {PolicyKind::rand(), PolicyKind::ts(), PolicyKind::rits(0.5)};
  int sample_size = 654;
  std::vector<int> checkpoints;  // empty: every 50 up to sample_size, then sample_size
  int n_sim = 1000;
  std::uint64_t master_seed = 1;
  int parallelism = 1;

  /// Run-in of 60 and clipping at 0.05.
  static TrialConfig default_config();
  std::vector<int> effective_checkpoints() const;
  void validate(const HistoricalDataset& ds) const;
};

struct ReplaySummaries {
  std::vector<std::vector<ReplicationSummary>> summaries;  // [replication][policy]
  long off_allocation_reads = 0;
  long counterfactual_reads = 0;
  long observed_reads = 0;
};

/// Replication r resamples with (master_seed, r, kBootstrap) and allocates
/// with the simulation's trial seed for r. K and d_raw come from the dataset.
ReplaySummaries run_replay_summaries(const HistoricalDataset& ds, const ReplayPlan& plan);

Metrics run_replay_replications(const HistoricalDataset& ds, const ReplayPlan& plan);

}  // namespace rits
