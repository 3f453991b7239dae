// JSON experiment files. Every object is checked key by key so that a typo
// fails loudly instead of silently falling back to a default.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

#include "lrhp/errors.hpp"
#include "lrhp/harness.hpp"

namespace lrhp {

namespace {

using json = nlohmann::json;

struct Field {
  const char* name;
  std::function<void(SystemConfig&, const json&)> read;
  std::function<json(const SystemConfig&)> write;
};

template <typename T, typename Member>
Field plain(const char* name, Member member) {
  return {name, [member](SystemConfig& c, const json& v) { c.*member = v.get<T>(); },
          [member](const SystemConfig& c) { return json(c.*member); }};
}

const std::vector<Field>& config_fields() {
  static const std::vector<Field> fields = {
      plain<int>("n_tx", &SystemConfig::n_tx),
      plain<int>("m_rf", &SystemConfig::m_rf),
      plain<int>("n_users", &SystemConfig::n_users),
      plain<int>("n_subcarriers", &SystemConfig::n_subcarriers),
      plain<int>("analog_bits", &SystemConfig::analog_bits),
      plain<int>("quant_levels", &SystemConfig::quant_levels),
      plain<double>("total_power_dbm", &SystemConfig::total_power_dbm),
      plain<double>("carrier_ghz", &SystemConfig::carrier_ghz),
      plain<double>("noise_figure_db", &SystemConfig::noise_figure_db),
      plain<double>("subcarrier_bandwidth_hz", &SystemConfig::subcarrier_bandwidth_hz),
      plain<double>("rician_k_db", &SystemConfig::rician_k_db),
      plain<int>("n_taps_minus_one", &SystemConfig::n_taps_minus_one),
      plain<std::array<double, 2>>("distance_range_m", &SystemConfig::distance_range_m),
      plain<std::array<double, 2>>("angle_range_rad", &SystemConfig::angle_range_rad),
      plain<int>("n_sym", &SystemConfig::n_sym),
      plain<double>("fronthaul_budget_bits_per_symbol", &SystemConfig::fronthaul_budget_bits_per_symbol),
      plain<double>("ep_damping", &SystemConfig::ep_damping),
      plain<int>("ep_max_iter", &SystemConfig::ep_max_iter),
      plain<double>("ep_tol", &SystemConfig::ep_tol),
      plain<double>("outer_tol", &SystemConfig::outer_tol),
      plain<int>("outer_max_iter", &SystemConfig::outer_max_iter),
      plain<double>("bisection_tol", &SystemConfig::bisection_tol),
      {"power_convention",
       [](SystemConfig& c, const json& v) {
         const auto s = v.get<std::string>();
         if (s == "equal_split") c.power_convention = PowerConvention::EqualSplit;
         else if (s == "per_subcarrier") c.power_convention = PowerConvention::PerSubcarrier;
         else throw ParameterError("power_convention must be equal_split or per_subcarrier");
       },
       [](const SystemConfig& c) {
         return json(c.power_convention == PowerConvention::EqualSplit ? "equal_split" : "per_subcarrier");
       }},
  };
  return fields;
}

void read_config(SystemConfig& c, const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ParameterError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    const auto& fields = config_fields();
    auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return key == f.name; });
    if (it == fields.end()) throw ParameterError("unknown key '" + key + "' in " + where);
    it->read(c, value);
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ParameterError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ParameterError("unknown key '" + key + "' in " + where);
  }
}

void read_sweep(Sweep& sweep, const json& obj) {
  reject_unknown(obj, {"parameter", "values"}, "sweep");
  if (obj.contains("parameter")) sweep.parameter = obj.at("parameter").get<std::string>();
  if (obj.contains("values")) sweep.values = obj.at("values").get<std::vector<double>>();
}

DeltaSchedule schedule_from(const std::string& s) {
  if (s == "per_outer_iteration") return DeltaSchedule::PerOuterIteration;
  if (s == "first_iteration_only") return DeltaSchedule::FirstIterationOnly;
  throw ParameterError("delta_schedule must be per_outer_iteration or first_iteration_only");
}

ExperimentSpec parse_checked(const json& j, const std::optional<std::string>& preset) {
  reject_unknown(j,
                 {"schema_version", "name", "base", "sweep", "schemes", "n_trials", "seed", "outputs",
                  "delta_schedule", "presets"},
                 "experiment");
  if (!j.contains("schema_version")) throw ParameterError("missing schema_version");
  if (j.at("schema_version").get<int>() != kSpecSchemaVersion)
    throw ParameterError("unsupported schema_version " + j.at("schema_version").dump());

  ExperimentSpec spec;
  if (j.contains("name")) spec.name = j.at("name").get<std::string>();
  if (j.contains("base")) read_config(spec.base, j.at("base"), "base");
  if (j.contains("sweep")) read_sweep(spec.sweep, j.at("sweep"));
  if (j.contains("schemes")) {
    spec.schemes.clear();
    for (const auto& s : j.at("schemes")) spec.schemes.push_back(scheme_from_string(s.get<std::string>()));
  }
  if (j.contains("n_trials")) spec.n_trials = j.at("n_trials").get<int>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("outputs")) {
    spec.outputs.clear();
    for (const auto& m : j.at("outputs")) spec.outputs.push_back(metric_from_string(m.get<std::string>()));
  }
  if (j.contains("delta_schedule")) spec.delta_schedule = schedule_from(j.at("delta_schedule").get<std::string>());

  if (j.contains("presets")) {
    const json& presets = j.at("presets");
    if (!presets.is_object()) throw ParameterError("presets must be an object");
    for (const auto& [name, body] : presets.items())
      reject_unknown(body, {"base", "n_trials", "sweep"}, "preset " + name);
  }
  if (preset) {
    if (!j.contains("presets") || !j.at("presets").contains(*preset))
      throw ParameterError("preset '" + *preset + "' is not defined in " + spec.name);
    const json& body = j.at("presets").at(*preset);
    if (body.contains("base")) read_config(spec.base, body.at("base"), "preset " + *preset);
    if (body.contains("n_trials")) spec.n_trials = body.at("n_trials").get<int>();
    if (body.contains("sweep")) read_sweep(spec.sweep, body.at("sweep"));
  }
  spec.base.seed = spec.seed;
  spec.validate();
  return spec;
}

}  // namespace

ExperimentSpec parse_spec(const std::string& json_text, const std::optional<std::string>& preset) {
  try {
    return parse_checked(json::parse(json_text), preset);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("experiment file: ") + e.what());
  }
}

ExperimentSpec load_spec(const std::filesystem::path& path, const std::optional<std::string>& preset) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str(), preset);
}

std::string spec_to_json(const ExperimentSpec& spec) {
  json base = json::object();
  for (const auto& f : config_fields()) base[f.name] = f.write(spec.base);
  json j;
  j["schema_version"] = kSpecSchemaVersion;
  j["name"] = spec.name;
  j["base"] = base;
  j["sweep"] = {{"parameter", spec.sweep.parameter}, {"values", spec.sweep.values}};
  j["schemes"] = json::array();
  for (Scheme s : spec.schemes) j["schemes"].push_back(to_string(s));
  j["n_trials"] = spec.n_trials;
  j["seed"] = spec.seed;
  j["outputs"] = json::array();
  for (Metric m : spec.outputs) j["outputs"].push_back(to_string(m));
  j["delta_schedule"] =
      spec.delta_schedule == DeltaSchedule::PerOuterIteration ? "per_outer_iteration" : "first_iteration_only";
  return j.dump();  // std::map-backed object: keys come out sorted
}

std::string config_hash(const ExperimentSpec& spec) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : spec_to_json(spec)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lrhp
