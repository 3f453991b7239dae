#include "lrhp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "lrhp/baselines.hpp"
#include "lrhp/errors.hpp"
#include "lrhp/wmmse.hpp"

#ifndef LRHP_GIT_DESCRIBE
#define LRHP_GIT_DESCRIBE "unknown"
#endif

namespace lrhp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

constexpr std::pair<Scheme, const char*> kSchemeNames[] = {
    {Scheme::SdHybrid, "sd-hybrid"},
    {Scheme::EpHybrid, "ep-hybrid"},
    {Scheme::Altmin1, "altmin1"},
    {Scheme::Altmin1Quantized, "altmin1-q"},
    {Scheme::Altmin2Quantized, "altmin2-q"},
    {Scheme::FullyDigital, "fully-digital"},
    {Scheme::NpAnalogEpDigital, "np-analog-ep-digital"},
    {Scheme::EpAnalogNpDigital, "ep-analog-np-digital"},
    {Scheme::DynamicSd, "dynamic-sd"},
    {Scheme::DynamicEp, "dynamic-ep"},
};

constexpr std::pair<Metric, const char*> kMetricNames[] = {
    {Metric::SumRateAvg, "sum_rate_avg"},
    {Metric::SumRateTotal, "sum_rate_total"},
    {Metric::Mse, "mse"},
    {Metric::Runtime, "runtime"},
    {Metric::Trace, "trace"},
};

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

int as_int(const std::string& parameter, double value) {
  if (!is_integral(value)) throw ParameterError("sweep parameter " + parameter + " needs integer values");
  return static_cast<int>(value);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Splits "trace:12" into ("trace", 12); other metrics get index -1.
std::pair<std::string, long> metric_key(const std::string& metric) {
  const auto colon = metric.find(':');
  if (colon == std::string::npos) return {metric, -1};
  return {metric.substr(0, colon), std::stol(metric.substr(colon + 1))};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

HybridOptions hybrid_options(const SystemConfig& config, SolverKind solver, DeltaSchedule schedule) {
  HybridOptions o = HybridOptions::from_config(config, solver);
  o.delta_schedule = schedule;
  return o;
}

}  // namespace

std::string to_string(Scheme s) {
  for (const auto& [k, name] : kSchemeNames)
    if (k == s) return name;
  return "unknown";
}

std::string to_string(Metric m) {
  for (const auto& [k, name] : kMetricNames)
    if (k == m) return name;
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  for (const auto& [k, n] : kSchemeNames)
    if (name == n) return k;
  throw ParameterError("unknown scheme '" + name + "'");
}

Metric metric_from_string(const std::string& name) {
  for (const auto& [k, n] : kMetricNames)
    if (name == n) return k;
  throw ParameterError("unknown metric '" + name + "'");
}

void apply_sweep_value(SystemConfig& c, const std::string& p, double v) {
  if (p == "total_power_dbm") c.total_power_dbm = v;
  else if (p == "n_subcarriers") c.n_subcarriers = as_int(p, v);
  else if (p == "m_rf") c.m_rf = as_int(p, v);
  else if (p == "analog_bits") c.analog_bits = as_int(p, v);
  else if (p == "quant_levels") c.quant_levels = as_int(p, v);
  else if (p == "n_tx") c.n_tx = as_int(p, v);
  else if (p == "n_users") c.n_users = as_int(p, v);
  else if (p == "rician_k_db") c.rician_k_db = v;
  else if (p == "n_sym") c.n_sym = as_int(p, v);
  else if (p == "fronthaul_budget_bits_per_symbol") c.fronthaul_budget_bits_per_symbol = v;
  else throw ParameterError("unknown sweep parameter '" + p + "'");
}

void ExperimentSpec::validate() const {
  if (name.empty() || name.find_first_of(",\"\n\r") != std::string::npos)
    throw ParameterError("experiment name must be nonempty and free of commas, quotes and newlines");
  if (sweep.values.empty()) throw ParameterError("sweep values must be nonempty");
  if (n_trials < 1) throw ParameterError("n_trials must be at least 1");
  if (schemes.empty()) throw ParameterError("scheme list must be nonempty");
  if (outputs.empty()) throw ParameterError("output metric list must be nonempty");
  for (double v : sweep.values) {
    SystemConfig c = base;
    apply_sweep_value(c, sweep.parameter, v);
    c.validate();
  }
}

bool is_timing_metric(const std::string& metric) { return metric == "runtime"; }

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::make_tuple(std::cref(a.experiment), std::cref(a.scheme), a.sweep_value, a.trial, metric_key(a.metric)) <
           std::make_tuple(std::cref(b.experiment), std::cref(b.scheme), b.sweep_value, b.trial, metric_key(b.metric));
  });
}

SchemeOutcome run_scheme(Scheme scheme, const CMatrix& f_fd, const SystemConfig& config, DeltaSchedule schedule) {
  const auto start = Clock::now();
  SchemeOutcome out;
  const double p_s = config.subcarrier_power_w();
  auto quantized = [&](const ContinuousHybrid& c) {
    HybridPrecoder q = quantize_baseline(c.f_rf, c.f_bb, make_analog_alphabet(config.analog_bits), config.quant_levels,
                                         DeltaRule::gaussian_fit(), config.n_users, config.n_subcarriers, p_s);
    out.f_rf = std::move(q.f_rf);
    out.f_bb = std::move(q.f_bb);
    out.trace = c.trace.objective_per_outer_iter;
  };
  auto hybrid = [&](const std::pair<HybridPrecoder, SolveTrace>& r) {
    out.f_rf = r.first.f_rf;
    out.f_bb = r.first.f_bb;
    out.trace = r.second.objective_per_outer_iter;
  };

  switch (scheme) {
    case Scheme::SdHybrid:
      hybrid(alternate(f_fd, config, hybrid_options(config, SolverKind::Sesd, schedule)));
      break;
    case Scheme::EpHybrid:
      hybrid(alternate(f_fd, config, hybrid_options(config, SolverKind::Ep, schedule)));
      break;
    case Scheme::DynamicSd:
      hybrid(alternate_dynamic(f_fd, config, hybrid_options(config, SolverKind::Sesd, schedule)));
      break;
    case Scheme::DynamicEp:
      hybrid(alternate_dynamic(f_fd, config, hybrid_options(config, SolverKind::Ep, schedule)));
      break;
    case Scheme::Altmin1: {
      ContinuousHybrid c = altmin1(f_fd, config);
      out.f_rf = std::move(c.f_rf);
      out.f_bb = std::move(c.f_bb);
      out.trace = std::move(c.trace.objective_per_outer_iter);
      break;
    }
    case Scheme::Altmin1Quantized:
      quantized(altmin1(f_fd, config));
      break;
    case Scheme::Altmin2Quantized:
      quantized(altmin2(f_fd, config));
      break;
    case Scheme::NpAnalogEpDigital: {
      HybridPrecoder h = np_analog_finite_digital(f_fd, config, hybrid_options(config, SolverKind::Ep, schedule));
      out.f_rf = std::move(h.f_rf);
      out.f_bb = std::move(h.f_bb);
      break;
    }
    case Scheme::EpAnalogNpDigital: {
      HybridPrecoder h = finite_analog_np_digital(f_fd, config, hybrid_options(config, SolverKind::Ep, schedule));
      out.f_rf = std::move(h.f_rf);
      out.f_bb = std::move(h.f_bb);
      break;
    }
    case Scheme::FullyDigital:
      out.f_bb = f_fd;
      break;
  }
  out.wall_time_ms = ms_since(start);
  return out;
}

namespace {

std::vector<ResultRow> run_point(const ExperimentSpec& spec, double sweep_value, int trial) {
  SystemConfig config = spec.base;
  apply_sweep_value(config, spec.sweep.parameter, sweep_value);
  config.seed = spec.seed;
  const double n0 = config.noise_power_w();
  const double p_s = config.subcarrier_power_w();

  std::vector<ResultRow> rows;
  auto emit = [&](Scheme scheme, const std::string& metric, double value, double ms) {
    rows.push_back({spec.name, to_string(scheme), sweep_value, trial, spec.seed, metric, value, ms});
  };
  auto wants = [&](Metric m) { return std::find(spec.outputs.begin(), spec.outputs.end(), m) != spec.outputs.end(); };

  ChannelSet channel;
  FullyDigitalPrecoder target;
  WmmseTrace wtrace;
  double target_ms = 0.0;
  try {
    channel = draw_channel(config, static_cast<std::uint64_t>(trial));
    const auto start = Clock::now();
    std::tie(target, wtrace) = wmmse_fully_digital(channel, p_s, n0);
    target_ms = ms_since(start);
  } catch (const std::exception&) {
    for (Scheme s : spec.schemes) emit(s, "error", std::nan(""), 0.0);
    return rows;
  }

  for (Scheme scheme : spec.schemes) {
    SchemeOutcome outcome;
    try {
      outcome = run_scheme(scheme, target.f, config, spec.delta_schedule);
      if (scheme == Scheme::FullyDigital) {
        outcome.wall_time_ms = target_ms;
        outcome.trace = wtrace.utility;
      }
    } catch (const std::exception&) {
      emit(scheme, "error", std::nan(""), 0.0);
      continue;
    }
    const double ms = outcome.wall_time_ms;
    const CMatrix eff = outcome.effective();
    if (wants(Metric::SumRateAvg) || wants(Metric::SumRateTotal)) {
      const RateReport rate = sum_rate(channel, eff, n0);
      if (wants(Metric::SumRateAvg)) emit(scheme, "sum_rate_avg", rate.sum_rate_per_subcarrier_avg, ms);
      if (wants(Metric::SumRateTotal)) emit(scheme, "sum_rate_total", rate.total_sum_rate, ms);
    }
    if (wants(Metric::Mse)) emit(scheme, "mse", (target.f - eff).squaredNorm(), ms);
    if (wants(Metric::Runtime)) emit(scheme, "runtime", ms, ms);
    if (wants(Metric::Trace))
      for (std::size_t i = 0; i < outcome.trace.size(); ++i)
        emit(scheme, "trace:" + std::to_string(i), outcome.trace[i], ms);
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, int parallelism) {
  spec.validate();
  if (parallelism < 1) throw ParameterError("parallelism must be at least 1");
  struct Item {
    double value;
    int trial;
  };
  std::vector<Item> items;
  for (double v : spec.sweep.values)
    for (int t = 0; t < spec.n_trials; ++t) items.push_back({v, t});

  std::vector<std::vector<ResultRow>> partial(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) partial[i] = run_point(spec, items[i].value, items[i].trial);
  };
  const int n_threads = std::min<int>(parallelism, static_cast<int>(items.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<ResultRow> rows;
  for (auto& p : partial) rows.insert(rows.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  sort_rows(rows);
  return rows;
}

std::string csv_string(std::vector<ResultRow> rows) {
  sort_rows(rows);
  std::ostringstream out;
  out << "experiment,scheme,sweep_value,trial,seed,metric,value\n";
  for (const auto& r : rows) {
    if (is_timing_metric(r.metric)) continue;
    out << r.experiment << ',' << r.scheme << ',' << format_double(r.sweep_value) << ',' << r.trial << ',' << r.seed
        << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
  return out.str();
}

void emit_csv(std::vector<ResultRow> rows, const std::filesystem::path& path) {
  write_text(path, csv_string(std::move(rows)));
}

void emit_timing_csv(std::vector<ResultRow> rows, const std::filesystem::path& path) {
  sort_rows(rows);
  std::ostringstream out;
  out << "experiment,scheme,sweep_value,trial,wall_time_ms\n";
  for (const auto& r : rows) {
    if (!is_timing_metric(r.metric)) continue;
    out << r.experiment << ',' << r.scheme << ',' << format_double(r.sweep_value) << ',' << r.trial << ','
        << format_double(r.wall_time_ms) << '\n';
  }
  write_text(path, out.str());
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "experiment,scheme,sweep_value,trial,seed,metric,value")
    throw ParameterError("unexpected CSV header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw ParameterError("malformed CSV line: " + line);
    ResultRow r;
    r.experiment = f[0];
    r.scheme = f[1];
    r.sweep_value = std::strtod(f[2].c_str(), nullptr);
    r.trial = std::stoi(f[3]);
    r.seed = std::stoull(f[4]);
    r.metric = f[5];
    r.value = std::strtod(f[6].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string git_describe() { return LRHP_GIT_DESCRIBE; }

void emit_manifest(const RunManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["experiment"] = m.experiment;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["git_describe"] = m.git_describe;
  j["preset"] = m.preset;
  j["n_trials"] = m.n_trials;
  j["n_rows"] = m.n_rows;
  j["n_errors"] = m.n_errors;
  j["wall_clock_s"] = m.wall_clock_s;
  write_text(path, j.dump(2) + "\n");
}

std::vector<RuntimeRow> runtime_benchmark(const std::vector<int>& m_rf_list, const SystemConfig& config, int n_trials,
                                          const std::vector<Scheme>& schemes) {
  if (m_rf_list.empty()) throw ParameterError("runtime benchmark needs at least one RF-chain count");
  if (schemes.empty()) throw ParameterError("runtime benchmark needs at least one scheme");
  if (n_trials < 1) throw ParameterError("n_trials must be at least 1");
  for (Scheme s : schemes)
    if (s != Scheme::SdHybrid && s != Scheme::EpHybrid && s != Scheme::DynamicSd && s != Scheme::DynamicEp)
      throw ParameterError("runtime benchmark covers the finite-alphabet designs only");

  std::vector<RuntimeRow> out;
  for (int m : m_rf_list) {
    SystemConfig c = config;
    c.m_rf = m;
    c.validate();
    std::vector<CMatrix> targets;
    for (int t = 0; t < n_trials; ++t) {
      const ChannelSet h = draw_channel(c, static_cast<std::uint64_t>(t));
      targets.push_back(wmmse_fully_digital(h, c.subcarrier_power_w(), c.noise_power_w()).first.f);
    }
    for (Scheme s : schemes) {
      const SolverKind solver = (s == Scheme::SdHybrid || s == Scheme::DynamicSd) ? SolverKind::Sesd : SolverKind::Ep;
      const bool dynamic = s == Scheme::DynamicSd || s == Scheme::DynamicEp;
      RuntimeRow row{to_string(s), m, n_trials, 0.0, 0.0, 0.0};
      for (const CMatrix& fd : targets) {
        const HybridOptions o = HybridOptions::from_config(c, solver);
        const auto start = Clock::now();
        const auto result = dynamic ? alternate_dynamic(fd, c, o) : alternate(fd, c, o);
        row.mean_ms += ms_since(start);
        row.analog_ms += 1e3 * result.second.analog_time_s;
        row.digital_ms += 1e3 * result.second.digital_time_s;
      }
      row.mean_ms /= n_trials;
      row.analog_ms /= n_trials;
      row.digital_ms /= n_trials;
      out.push_back(row);
    }
  }
  return out;
}

}  // namespace lrhp
