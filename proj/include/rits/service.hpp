#pragma once

#include "rits/inference.hpp"
#include "rits/journal.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace rits {

class NotFound : public Error {
 public:
  using Error::Error;
};

class Conflict : public Error {
 public:
  using Error::Error;
};

struct EnrollmentReceipt {
  int participant_id = 0;
  ArmId arm{1};
  PropensityVector propensities;
};

struct CsReport {
  Variant variant = Variant::kAIPW;
  bool burn_in = true;  // fewer than m complete outcomes
  int complete = 0;     // complete-outcome prefix in enrollment order
  int m = 0;
  std::vector<CsSeries> series;
};

struct StatusReport {
  int enrolled = 0;
  std::vector<int> allocation_counts;
  int recorded = 0;
  int pending = 0;
  int complete = 0;
  bool burn_in = true;
  bool stop = false;              // recommendation: some AIPW lower bound has exceeded the threshold
  std::optional<int> stop_n;      // first n with the recommendation
  std::optional<ArmId> winner;    // highest estimate at stop_n
  std::optional<ArmId> leader;    // highest estimate at the latest n
  bool stopped = false;           // operator confirmed the stop
  std::string stop_reason;
};

struct PreviewReport {
  int n = 0;  // enrollment the preview is for
  double w = 0.0;
  bool run_in = false;
  PropensityVector raw;
  PropensityVector clipped;
};

CsReport confidence_sequences(const TrialState& state, Variant variant);
StatusReport trial_status(const TrialState& state);
/// Same, reusing an AIPW report for this state.
StatusReport trial_status(const TrialState& state, const CsReport& aipw);

Json to_json(const CsReport& r, const std::string& trial_id);
Json to_json(const StatusReport& s, const std::string& trial_id);
Json to_json(const EnrollmentReceipt& r, const std::string& trial_id);
Json to_json(const PreviewReport& p, const std::string& trial_id);

struct ServiceOptions {
  /// Journals are persisted as <dir>/<trial id>.jsonl and reloaded on start.
  std::optional<std::filesystem::path> journal_dir;
  /// UTC timestamps for journal events.
  std::function<std::string()> clock;
};

std::string utc_now();

/// Live trials. Mutations of one trial are serialized; reads work on
/// immutable snapshots.
class TrialService {
 public:
  explicit TrialService(ServiceOptions options = {});
  ~TrialService();

  TrialService(const TrialService&) = delete;
  TrialService& operator=(const TrialService&) = delete;

  std::string create_trial(const TrialConfig& config, const PolicyKind& policy);
  EnrollmentReceipt enroll(const std::string& id, const std::vector<double>& covariates);
  void record_outcome(const std::string& id, int participant_id, double efficacy, double safety);
  /// Operator confirmation of a stop.
  StatusReport stop(const std::string& id, const std::string& reason);

  CsReport cs(const std::string& id, Variant variant) const;
  StatusReport status(const std::string& id) const;
  /// RiTS propensities at weight w for the next enrollment; nothing is
  /// journaled and no arm is drawn.
  PreviewReport preview(const std::string& id, double w, const std::vector<double>& covariates) const;
  std::string journal(const std::string& id) const;
  std::shared_ptr<const TrialState> snapshot(const std::string& id) const;
  std::vector<std::string> trials() const;

  /// Restores a trial from journal text. The id must be new.
  std::string load_journal(std::istream& in);

 private:
  struct Slot;

  std::shared_ptr<Slot> find(const std::string& id) const;
  CsReport cached_cs(const Slot& slot, const TrialState& state, Variant variant) const;
  void append(Slot& slot, EventBody body);
  std::string next_id();

  ServiceOptions options_;
  mutable std::shared_mutex trials_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> trials_;
  long id_counter_ = 0;
};

}  // namespace rits
