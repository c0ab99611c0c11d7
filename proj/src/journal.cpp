#include "rits/journal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>

namespace rits {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Json body_json(const EventBody& body) {
  return std::visit(
      Overloaded{
          [](const TrialCreated& e) {
            return Json{{"trial_id", e.trial_id}, {"config", to_json(e.config)}, {"policy", to_json(e.policy)}};
          },
          [](const ParticipantEnrolled& e) {
            return Json{{"participant_id", e.participant_id},
                        {"covariates", e.covariates},
                        {"arm", e.arm.value()},
                        {"propensities", e.propensities.values()},
                        {"rng", {{"seed", e.rng.seed}, {"posterior", e.rng.posterior_stream}, {"arm", e.rng.arm_stream}}}};
          },
          [](const OutcomeRecorded& e) {
            return Json{{"participant_id", e.participant_id},
                        {"efficacy", e.efficacy},
                        {"safety", e.safety},
                        {"available_at", e.available_at}};
          },
          [](const TrialStopped& e) {
            Json j{{"reason", e.reason}};
            j["winner"] = e.winner ? Json(*e.winner) : Json(nullptr);
            return j;
          },
      },
      body);
}

}  // namespace

int usable_outcomes(std::span<const ParticipantRecord> records, int n) {
  return static_cast<int>(std::count_if(records.begin(), records.end(),
                                        [n](const ParticipantRecord& r) { return r.usable_at(n); }));
}

std::string event_kind(const EventBody& body) {
  return std::visit(Overloaded{[](const TrialCreated&) { return "TrialCreated"; },
                               [](const ParticipantEnrolled&) { return "ParticipantEnrolled"; },
                               [](const OutcomeRecorded&) { return "OutcomeRecorded"; },
                               [](const TrialStopped&) { return "TrialStopped"; }},
                    body);
}

Json to_json(const JournalEvent& e) {
  Json j = body_json(e.body);
  j["seq"] = e.sequence;
  j["ts"] = e.timestamp;
  j["kind"] = event_kind(e.body);
  return j;
}

JournalEvent event_from_json(const Json& j) {
  try {
    JournalEvent e;
    e.sequence = j.at("seq").get<long>();
    e.timestamp = j.at("ts").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "TrialCreated") {
      e.body = TrialCreated{j.at("trial_id").get<std::string>(), config_from_json(j.at("config")),
                            policy_from_json(j.at("policy"))};
    } else if (kind == "ParticipantEnrolled") {
      ParticipantEnrolled p;
      p.participant_id = j.at("participant_id").get<int>();
      p.covariates = j.at("covariates").get<std::vector<double>>();
      p.arm = ArmId(j.at("arm").get<int>());
      p.propensities = PropensityVector(j.at("propensities").get<std::vector<double>>());
      p.rng.seed = j.at("rng").at("seed").get<std::uint64_t>();
      p.rng.posterior_stream = j.at("rng").at("posterior").get<int>();
      p.rng.arm_stream = j.at("rng").at("arm").get<int>();
      e.body = std::move(p);
    } else if (kind == "OutcomeRecorded") {
      e.body = OutcomeRecorded{j.at("participant_id").get<int>(), j.at("efficacy").get<double>(),
                               j.at("safety").get<double>(), j.at("available_at").get<int>()};
    } else if (kind == "TrialStopped") {
      TrialStopped s;
      s.reason = j.at("reason").get<std::string>();
      if (j.contains("winner") && !j["winner"].is_null()) s.winner = j["winner"].get<int>();
      e.body = std::move(s);
    } else {
      throw CorruptionError("unknown event kind '" + kind + "'");
    }
    return e;
  } catch (const Json::exception& ex) {
    throw CorruptionError(std::string("malformed event: ") + ex.what());
  } catch (const ConfigError& ex) {
    throw CorruptionError(std::string("event carries an invalid config: ") + ex.what());
  }
}

std::string serialize_event(const JournalEvent& e) { return to_json(e).dump(); }

JournalRead read_journal(std::istream& in) {
  JournalRead out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool terminated = !in.eof();
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error&) {
      if (!terminated) {
        // torn append at the very end; everything before it stands
        out.dropped_partial_line = true;
        break;
      }
      throw CorruptionError("journal line " + std::to_string(line_no) + " is not valid JSON");
    }
    JournalEvent e = event_from_json(j);
    const long expected = static_cast<long>(out.events.size()) + 1;
    if (e.sequence != expected)
      throw CorruptionError("sequence gap at journal line " + std::to_string(line_no) + ": expected " +
                            std::to_string(expected) + ", found " + std::to_string(e.sequence));
    out.events.push_back(std::move(e));
  }
  return out;
}

void apply_event(TrialState& state, const JournalEvent& event, bool verify) {
  if (event.sequence != state.last_sequence + 1)
    throw CorruptionError("event " + std::to_string(event.sequence) + " does not follow " +
                          std::to_string(state.last_sequence));
  const bool created = state.last_sequence > 0;
  std::visit(
      Overloaded{
          [&](const TrialCreated& e) {
            if (created) throw CorruptionError("second TrialCreated event");
            state.trial_id = e.trial_id;
            state.created_at = event.timestamp;
            state.config = e.config;
            state.policy = e.policy;
          },
          [&](const ParticipantEnrolled& e) {
            if (!created) throw CorruptionError("enrollment before TrialCreated");
            if (state.stopped) throw CorruptionError("enrollment after TrialStopped");
            const int n = state.enrolled() + 1;
            if (e.participant_id != n)
              throw CorruptionError("participant " + std::to_string(e.participant_id) + " enrolled out of order");
            if (static_cast<int>(e.covariates.size()) != state.config.d_raw)
              throw CorruptionError("participant " + std::to_string(n) + " has the wrong covariate count");
            if (e.propensities.arms() != state.config.K || !e.arm.valid_for(state.config.K))
              throw CorruptionError("participant " + std::to_string(n) + " has an invalid allocation");
            if (e.rng.seed != state.config.seed || e.rng.arm_stream != n ||
                e.rng.posterior_stream != usable_outcomes(state.records, n))
              throw CorruptionError("participant " + std::to_string(n) + " has a foreign rng checkpoint");
            ParticipantRecord r;
            r.id = n;
            r.covariates = Covariates::from_raw(e.covariates);
            r.arm = e.arm;
            r.propensities = e.propensities;
            if (verify) {
              const Allocation a = allocate(state.records, state.config, state.policy, r.covariates);
              if (a.arm != e.arm || a.propensities != e.propensities)
                throw CorruptionError("participant " + std::to_string(n) +
                                      " allocation does not re-derive from the journal");
            }
            state.records.push_back(std::move(r));
          },
          [&](const OutcomeRecorded& e) {
            if (!created) throw CorruptionError("outcome before TrialCreated");
            if (e.participant_id < 1 || e.participant_id > state.enrolled())
              throw CorruptionError("outcome for unknown participant " + std::to_string(e.participant_id));
            auto& r = state.records[static_cast<std::size_t>(e.participant_id - 1)];
            if (r.has_outcomes())
              throw CorruptionError("second outcome for participant " + std::to_string(e.participant_id));
            if (!std::isfinite(e.efficacy) || !std::isfinite(e.safety))
              throw CorruptionError("non-finite outcome for participant " + std::to_string(e.participant_id));
            if (e.available_at <= e.participant_id)
              throw CorruptionError("outcome of participant " + std::to_string(e.participant_id) +
                                    " available before enrollment");
            r.efficacy = e.efficacy;
            r.safety = e.safety;
            r.outcome_available_at = e.available_at;
            ++state.recorded;
          },
          [&](const TrialStopped& e) {
            if (!created) throw CorruptionError("stop before TrialCreated");
            if (state.stopped) throw CorruptionError("second TrialStopped event");
            state.stopped = true;
            state.stop_reason = e.reason;
            state.stop_winner = e.winner;
          },
      },
      event.body);
  state.last_sequence = event.sequence;
}

TrialState fold_journal(const std::vector<JournalEvent>& events, bool verify) {
  if (events.empty()) throw CorruptionError("empty journal: no TrialCreated event");
  if (!std::holds_alternative<TrialCreated>(events.front().body))
    throw CorruptionError("journal must start with TrialCreated");
  TrialState state;
  for (const auto& e : events) apply_event(state, e, verify);
  return state;
}

TrialState replay_journal(std::istream& in, bool verify) { return fold_journal(read_journal(in).events, verify); }

}  // namespace rits
