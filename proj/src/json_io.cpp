#include "rits/json_io.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <type_traits>

namespace rits {

namespace {

const char* const kConfigFields[] = {"K",     "d_raw",  "w",     "n0",        "delta",    "m",        "alpha",
                                     "sigma0_sq", "M", "lambda", "delay", "seed", "threshold", "rho_mode"};

template <class T>
void read_field(const Json& j, const char* name, T& out, std::vector<ConfigError::FieldIssue>& issues) {
  const auto it = j.find(name);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_unsigned()) {
          out = it->template get<T>();
        } else {
          const auto v = it->template get<long long>();
          if (v < 0) throw std::invalid_argument("must be non-negative");
          out = static_cast<T>(v);
        }
      } else {
        const auto v = it->template get<long long>();
        if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max())
          throw std::invalid_argument("out of range");
        out = static_cast<T>(v);
      }
    } else {
      if (!it->is_number()) throw std::invalid_argument("expected a number");
      out = it->template get<T>();
    }
  } catch (const std::exception& e) {
    issues.push_back({name, e.what()});
  }
}

}  // namespace

Json to_json(const TrialConfig& c) {
  return Json{{"K", c.K},          {"d_raw", c.d_raw},   {"w", c.w},           {"n0", c.n0},
              {"delta", c.delta},  {"m", c.m},           {"alpha", c.alpha},   {"sigma0_sq", c.sigma0_sq},
              {"M", c.M},          {"lambda", c.lambda}, {"delay", c.delay},   {"seed", c.seed},
              {"threshold", c.threshold}, {"rho_mode", to_string(c.rho_mode)}};
}

TrialConfig config_from_json(const Json& j, TrialConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object", {{"config", "expected an object"}});
  std::vector<ConfigError::FieldIssue> issues;
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kConfigFields), std::end(kConfigFields), key) == std::end(kConfigFields))
      issues.push_back({key, "unknown field"});
  }
  read_field(j, "K", base.K, issues);
  read_field(j, "d_raw", base.d_raw, issues);
  read_field(j, "w", base.w, issues);
  read_field(j, "n0", base.n0, issues);
  read_field(j, "delta", base.delta, issues);
  read_field(j, "m", base.m, issues);
  read_field(j, "alpha", base.alpha, issues);
  read_field(j, "sigma0_sq", base.sigma0_sq, issues);
  read_field(j, "M", base.M, issues);
  read_field(j, "lambda", base.lambda, issues);
  read_field(j, "delay", base.delay, issues);
  read_field(j, "seed", base.seed, issues);
  read_field(j, "threshold", base.threshold, issues);
  if (const auto it = j.find("rho_mode"); it != j.end()) {
    try {
      if (!it->is_string()) throw std::invalid_argument("expected a string");
      base.rho_mode = parse_rho_mode(it->get<std::string>());
    } catch (const std::exception& e) {
      issues.push_back({"rho_mode", e.what()});
    }
  }
  if (!issues.empty()) throw ConfigError("invalid config", std::move(issues));
  base.validate();
  return base;
}

Json to_json(const PolicyKind& policy) {
  std::string name = policy.name();
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
  Json j{{"name", name}};
  if (policy.kind == PolicyKind::Kind::kRiTS) j["w"] = policy.w;
  return j;
}

PolicyKind policy_from_json(const Json& j) {
  if (j.is_string()) return PolicyKind::parse(j.get<std::string>(), 0.5);
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
    throw ConfigError("policy needs a name", {{"policy", "expected {\"name\": ..., \"w\": ...}"}});
  double w = 0.5;
  if (j.contains("w")) {
    if (!j["w"].is_number()) throw ConfigError("policy weight must be a number", {{"policy.w", "expected a number"}});
    w = j["w"].get<double>();
  }
  return PolicyKind::parse(j["name"].get<std::string>(), w);
}

Json to_json(const CsPoint& p) {
  return Json{{"n", p.n},         {"arm", p.arm.value()},       {"estimate", p.estimate},
              {"lower", p.lower}, {"upper", p.upper},           {"sigma_sq", p.sigma_sq_hat},
              {"rho", p.rho}};
}

Json to_json(const CsSeries& s) {
  Json points = Json::array();
  for (const auto& p : s.points) points.push_back(to_json(p));
  return Json{{"arm", s.arm.value()}, {"points", std::move(points)}};
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace rits
