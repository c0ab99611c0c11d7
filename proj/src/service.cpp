#include "rits/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace rits {

namespace {

Json optional_arm(const std::optional<ArmId>& a) { return a ? Json(a->value()) : Json(nullptr); }

}  // namespace

CsReport confidence_sequences(const TrialState& state, Variant variant) {
  CsReport out;
  out.variant = variant;
  out.m = state.config.m;
  out.complete = complete_prefix(state.records);
  out.burn_in = out.complete < state.config.m;
  if (!out.burn_in) {
    out.series = build_asympcs(std::span(state.records).first(static_cast<std::size_t>(out.complete)),
                               state.config, variant);
  }
  return out;
}

StatusReport trial_status(const TrialState& state) {
  return trial_status(state, confidence_sequences(state, Variant::kAIPW));
}

StatusReport trial_status(const TrialState& state, const CsReport& cs) {
  if (cs.variant != Variant::kAIPW) throw ValidationError("stopping is judged on the AIPW sequences");
  StatusReport s;
  s.enrolled = state.enrolled();
  s.allocation_counts.assign(static_cast<std::size_t>(state.config.K), 0);
  for (const auto& r : state.records) ++s.allocation_counts[r.arm.index()];
  s.recorded = state.recorded;
  s.pending = s.enrolled - s.recorded;
  s.stopped = state.stopped;
  s.stop_reason = state.stop_reason;

  s.complete = cs.complete;
  s.burn_in = cs.burn_in;
  if (cs.burn_in || cs.series.empty()) return s;

  const std::size_t points = cs.series.front().points.size();
  std::vector<CsPoint> current;
  for (std::size_t i = 0; i < points; ++i) {
    current.clear();
    for (const auto& series : cs.series) current.push_back(series.points[i]);
    const auto decision = check_stopping(current, state.config.threshold);
    if (i + 1 == points) s.leader = decision.winner;
    if (decision.stop && !s.stop) {
      s.stop = true;
      s.stop_n = current.front().n;
      s.winner = decision.winner;
    }
  }
  return s;
}

Json to_json(const CsReport& r, const std::string& trial_id) {
  Json series = Json::array();
  for (const auto& s : r.series) series.push_back(to_json(s));
  return Json{{"trial_id", trial_id},
              {"variant", to_string(r.variant)},
              {"status", r.burn_in ? "burn_in" : "ok"},
              {"complete", r.complete},
              {"m", r.m},
              {"series", std::move(series)}};
}

Json to_json(const StatusReport& s, const std::string& trial_id) {
  return Json{{"trial_id", trial_id},
              {"enrolled", s.enrolled},
              {"allocation_counts", s.allocation_counts},
              {"recorded", s.recorded},
              {"pending", s.pending},
              {"complete", s.complete},
              {"burn_in", s.burn_in},
              {"stop", s.stop},
              {"stop_n", s.stop_n ? Json(*s.stop_n) : Json(nullptr)},
              {"winner", optional_arm(s.winner)},
              {"leader", optional_arm(s.leader)},
              {"stopped", s.stopped},
              {"stop_reason", s.stop_reason}};
}

Json to_json(const EnrollmentReceipt& r, const std::string& trial_id) {
  return Json{{"trial_id", trial_id},
              {"participant_id", r.participant_id},
              {"arm", r.arm.value()},
              {"propensities", r.propensities.values()}};
}

Json to_json(const PreviewReport& p, const std::string& trial_id) {
  return Json{{"trial_id", trial_id},        {"n", p.n},
              {"w", p.w},                    {"run_in", p.run_in},
              {"raw_propensities", p.raw.values()}, {"propensities", p.clipped.values()}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

struct TrialService::Slot {
  struct Snapshot {
    TrialState state;
    std::vector<std::string> lines;
  };

  std::mutex writer;
  std::shared_ptr<const Snapshot> current;  // accessed through std::atomic_load/store
  std::optional<std::ofstream> file;

  mutable std::mutex cache_mutex;
  mutable std::map<Variant, std::pair<long, std::shared_ptr<const CsReport>>> cs_cache;

  std::shared_ptr<const Snapshot> load() const { return std::atomic_load(&current); }
  void publish(std::shared_ptr<const Snapshot> s) { std::atomic_store(&current, std::move(s)); }
};

TrialService::TrialService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = utc_now;
  if (!options_.journal_dir) return;
  std::filesystem::create_directories(*options_.journal_dir);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*options_.journal_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    const auto read = read_journal(in);
    auto slot = std::make_shared<Slot>();
    auto snap = std::make_shared<Slot::Snapshot>();
    snap->state = fold_journal(read.events, true);
    for (const auto& e : read.events) snap->lines.push_back(serialize_event(e));
    if (snap->state.trial_id + ".jsonl" != path.filename().string())
      throw CorruptionError("journal " + path.string() + " belongs to trial " + snap->state.trial_id);
    if (read.dropped_partial_line) {
      // rewrite without the torn tail so later appends start on a fresh line
      std::ofstream rewrite(path, std::ios::trunc);
      for (const auto& line : snap->lines) rewrite << line << '\n';
    }
    slot->file.emplace(path, std::ios::app);
    const std::string id = snap->state.trial_id;
    slot->publish(std::move(snap));
    trials_.emplace(id, std::move(slot));
  }
}

TrialService::~TrialService() = default;

std::shared_ptr<TrialService::Slot> TrialService::find(const std::string& id) const {
  std::shared_lock lock(trials_mutex_);
  const auto it = trials_.find(id);
  if (it == trials_.end()) throw NotFound("unknown trial '" + id + "'");
  return it->second;
}

std::string TrialService::next_id() {
  while (true) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trial-%04ld", ++id_counter_);
    if (!trials_.count(buf)) return buf;
  }
}

void TrialService::append(Slot& slot, EventBody body) {
  // caller holds slot.writer
  auto next = std::make_shared<Slot::Snapshot>(*slot.load());
  JournalEvent event{next->state.last_sequence + 1, options_.clock(), std::move(body)};
  apply_event(next->state, event, false);
  std::string line = serialize_event(event);
  if (slot.file) {
    *slot.file << line << '\n';
    slot.file->flush();
    if (!*slot.file) throw Error("journal write failed for trial " + next->state.trial_id);
  }
  next->lines.push_back(std::move(line));
  slot.publish(std::move(next));
}

std::string TrialService::create_trial(const TrialConfig& config, const PolicyKind& policy) {
  config.validate();
  std::unique_lock lock(trials_mutex_);
  const std::string id = next_id();
  auto slot = std::make_shared<Slot>();
  slot->publish(std::make_shared<Slot::Snapshot>());
  if (options_.journal_dir) {
    const auto path = *options_.journal_dir / (id + ".jsonl");
    slot->file.emplace(path, std::ios::app);
    if (!*slot->file) throw Error("cannot open journal " + path.string());
  }
  {
    std::lock_guard writer(slot->writer);
    append(*slot, TrialCreated{id, config, policy});
  }
  trials_.emplace(id, std::move(slot));
  return id;
}

EnrollmentReceipt TrialService::enroll(const std::string& id, const std::vector<double>& covariates) {
  auto slot = find(id);
  std::lock_guard writer(slot->writer);
  const auto snap = slot->load();
  const TrialState& state = snap->state;
  if (state.stopped) throw Conflict("trial " + id + " is stopped");
  if (static_cast<int>(covariates.size()) != state.config.d_raw)
    throw ValidationError("expected " + std::to_string(state.config.d_raw) + " covariates, got " +
                          std::to_string(covariates.size()));
  const Covariates x = Covariates::from_raw(covariates);
  const Allocation alloc = allocate(state.records, state.config, state.policy, x);
  const int n = state.enrolled() + 1;
  ParticipantEnrolled e{n, covariates, alloc.arm, alloc.propensities,
                        {state.config.seed, usable_outcomes(state.records, n), n}};
  append(*slot, e);
  return {n, alloc.arm, alloc.propensities};
}

void TrialService::record_outcome(const std::string& id, int participant_id, double efficacy, double safety) {
  auto slot = find(id);
  std::lock_guard writer(slot->writer);
  const auto snap = slot->load();
  const TrialState& state = snap->state;
  if (participant_id < 1 || participant_id > state.enrolled())
    throw NotFound("trial " + id + " has no participant " + std::to_string(participant_id));
  if (state.records[static_cast<std::size_t>(participant_id - 1)].has_outcomes())
    throw Conflict("outcome of participant " + std::to_string(participant_id) + " already recorded");
  if (!std::isfinite(efficacy) || !std::isfinite(safety)) throw ValidationError("outcomes must be finite");
  append(*slot, OutcomeRecorded{participant_id, efficacy, safety, state.enrolled() + 1});
}

StatusReport TrialService::stop(const std::string& id, const std::string& reason) {
  auto slot = find(id);
  {
    std::lock_guard writer(slot->writer);
    const auto snap = slot->load();
    if (snap->state.stopped) throw Conflict("trial " + id + " is already stopped");
    const StatusReport s = trial_status(snap->state, cached_cs(*slot, snap->state, Variant::kAIPW));
    std::optional<int> winner;
    if (s.winner) winner = s.winner->value();
    else if (s.leader) winner = s.leader->value();
    append(*slot, TrialStopped{reason.empty() ? "operator" : reason, winner});
  }
  return status(id);
}

CsReport TrialService::cached_cs(const Slot& slot, const TrialState& state, Variant variant) const {
  {
    std::lock_guard lock(slot.cache_mutex);
    const auto it = slot.cs_cache.find(variant);
    if (it != slot.cs_cache.end() && it->second.first == state.last_sequence) return *it->second.second;
  }
  auto report = std::make_shared<const CsReport>(confidence_sequences(state, variant));
  std::lock_guard lock(slot.cache_mutex);
  auto& entry = slot.cs_cache[variant];
  if (entry.first <= state.last_sequence) entry = {state.last_sequence, report};
  return *report;
}

CsReport TrialService::cs(const std::string& id, Variant variant) const {
  auto slot = find(id);
  const auto snap = slot->load();
  return cached_cs(*slot, snap->state, variant);
}

StatusReport TrialService::status(const std::string& id) const {
  auto slot = find(id);
  const auto snap = slot->load();
  return trial_status(snap->state, cached_cs(*slot, snap->state, Variant::kAIPW));
}

PreviewReport TrialService::preview(const std::string& id, double w, const std::vector<double>& covariates) const {
  const PolicyKind policy = PolicyKind::rits(w);
  const auto snap = find(id)->load();
  const TrialState& state = snap->state;
  if (static_cast<int>(covariates.size()) != state.config.d_raw)
    throw ValidationError("expected " + std::to_string(state.config.d_raw) + " covariates, got " +
                          std::to_string(covariates.size()));
  const Covariates x = Covariates::from_raw(covariates);
  PreviewReport p;
  p.n = state.enrolled() + 1;
  p.w = w;
  p.run_in = p.n <= state.config.n0;
  const auto bank = posterior_for_enrollment(state.records, p.n, state.config);
  const Allocation a = propensities_for_enrollment(bank, p.n, state.config, policy, x);
  p.raw = a.raw_propensities;
  p.clipped = a.propensities;
  return p;
}

std::string TrialService::journal(const std::string& id) const {
  const auto snap = find(id)->load();
  std::string out;
  for (const auto& line : snap->lines) {
    out += line;
    out += '\n';
  }
  return out;
}

std::shared_ptr<const TrialState> TrialService::snapshot(const std::string& id) const {
  auto snap = find(id)->load();
  return {snap, &snap->state};
}

std::vector<std::string> TrialService::trials() const {
  std::shared_lock lock(trials_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, slot] : trials_) out.push_back(id);
  return out;
}

std::string TrialService::load_journal(std::istream& in) {
  const auto read = read_journal(in);
  auto snap = std::make_shared<Slot::Snapshot>();
  snap->state = fold_journal(read.events, true);
  for (const auto& e : read.events) snap->lines.push_back(serialize_event(e));
  const std::string id = snap->state.trial_id;

  std::unique_lock lock(trials_mutex_);
  if (trials_.count(id)) throw Conflict("trial " + id + " already exists");
  auto slot = std::make_shared<Slot>();
  if (options_.journal_dir) {
    const auto path = *options_.journal_dir / (id + ".jsonl");
    std::ofstream out(path, std::ios::trunc);
    for (const auto& line : snap->lines) out << line << '\n';
    if (!out) throw Error("cannot write journal " + path.string());
    out.close();
    slot->file.emplace(path, std::ios::app);
  }
  slot->publish(std::move(snap));
  trials_.emplace(id, std::move(slot));
  return id;
}

}  // namespace rits
