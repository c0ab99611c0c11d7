#pragma once

#include "rits/core.hpp"
#include "rits/json_io.hpp"
#include "rits/policy.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rits {

/// Journal that cannot be folded: gaps, unparseable lines, events that
/// contradict the state they apply to.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

struct TrialCreated {
  std::string trial_id;
  TrialConfig config;
  PolicyKind policy;
};

/// Allocation streams of an enrollment: posterior draws keyed by the
/// number of usable outcomes, the arm draw keyed by the enrollment index.
struct RngCheckpoint {
  std::uint64_t seed = 0;
  int posterior_stream = 0;
  int arm_stream = 0;
};

struct ParticipantEnrolled {
  int participant_id = 0;
  std::vector<double> covariates;
  ArmId arm{1};
  PropensityVector propensities;
  RngCheckpoint rng;
};

struct OutcomeRecorded {
  int participant_id = 0;
  double efficacy = 0.0;
  double safety = 0.0;
  int available_at = 0;  // first enrollment allowed to use it
};

struct TrialStopped {
  std::string reason;
  std::optional<int> winner;
};

using EventBody = std::variant<TrialCreated, ParticipantEnrolled, OutcomeRecorded, TrialStopped>;

struct JournalEvent {
  long sequence = 0;  // dense from 1
  std::string timestamp;
  EventBody body;
};

std::string event_kind(const EventBody& body);

/// Records whose outcomes may inform the allocation of enrollment n.
int usable_outcomes(std::span<const ParticipantRecord> records, int n);

Json to_json(const JournalEvent& e);
JournalEvent event_from_json(const Json& j);
/// One line, no trailing newline.
std::string serialize_event(const JournalEvent& e);

struct JournalRead {
  std::vector<JournalEvent> events;
  bool dropped_partial_line = false;  // torn final line without newline
};

/// Parses a line-delimited journal. Sequence numbers must be dense from 1.
JournalRead read_journal(std::istream& in);

/// Trial state as a fold over journal events.
struct TrialState {
  std::string trial_id;
  std::string created_at;
  TrialConfig config;
  PolicyKind policy;
  std::vector<ParticipantRecord> records;
  int recorded = 0;
  bool stopped = false;
  std::string stop_reason;
  std::optional<int> stop_winner;
  long last_sequence = 0;

  int enrolled() const noexcept { return static_cast<int>(records.size()); }
};

/// Applies one event. With verify, enrollments are re-derived from the state
/// and must match the journal exactly.
void apply_event(TrialState& state, const JournalEvent& event, bool verify);

/// Folds a whole journal. An empty journal is an error.
TrialState fold_journal(const std::vector<JournalEvent>& events, bool verify = true);
TrialState replay_journal(std::istream& in, bool verify = true);

}  // namespace rits
