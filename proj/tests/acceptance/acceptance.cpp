// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers as arguments
// to run a subset.

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "lrhp/baselines.hpp"
#include "lrhp/detect.hpp"
#include "lrhp/harness.hpp"
#include "lrhp/hybrid.hpp"
#include "lrhp/wmmse.hpp"

using namespace lrhp;

namespace {

// Tolerances and thresholds.
constexpr double kOracleTol = 1e-10;
constexpr double kOracleBudgetS = 60.0;
constexpr int kOracleInstances = 500;
constexpr int kEpInstances = 200;
constexpr double kEpRatio = 1.05;
constexpr double kEpFraction = 0.90;
constexpr int kMaxOuterIterations = 25;
constexpr double kTraceSlack = 1e-6;
constexpr double kReferenceSdRate = 18.40;
constexpr double kRateBand = 0.20;
constexpr int kMonteCarloTrials = 20;
constexpr double kSdGrowth = 5.0;
constexpr double kEpSpread = 2.0;
constexpr double kMrtTol = 1e-6;
constexpr double kRealifyTol = 1e-12;
constexpr double kGradientTol = 1e-5;
constexpr double kNpGap = 0.05;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
    pass = pass && ok;
  }
};

CMatrix random_cmatrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5) * scale);
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = {n(rng), n(rng)};
  return m;
}

CMatrix wmmse_target(const SystemConfig& c, int trial) {
  return wmmse_fully_digital(draw_channel(c, trial), c.subcarrier_power_w(), c.noise_power_w()).first.f;
}

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Per-(scheme, sweep value) samples of one metric, indexed by trial.
using Samples = std::map<std::pair<std::string, double>, std::vector<double>>;

Samples collect(const std::vector<ResultRow>& rows, const std::string& metric, int n_trials, int& errors) {
  Samples out;
  for (const auto& r : rows) {
    if (r.metric == "error") ++errors;
    if (r.metric != metric) continue;
    auto& v = out[{r.scheme, r.sweep_value}];
    v.resize(static_cast<std::size_t>(n_trials), NAN);
    v[static_cast<std::size_t>(r.trial)] = r.value;
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double paired_standard_error(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  const double m = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
}

// 1. Sphere decoder against exhaustive search.
Verdict oracle_exactness() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  const Alphabet alphabets[] = {make_analog_alphabet(1), make_analog_alphabet(2), make_digital_alphabet(2, 1.0),
                                make_digital_alphabet(4, 1.0)};
  int agree = 0;
  double worst = 0.0;
  for (int i = 0; i < kOracleInstances; ++i) {
    const int m = 2 + i % 3;
    const Alphabet& a = alphabets[(i / 3) % 4];
    const CMatrix g = random_cmatrix(rng, m + 2, m);
    const CVector c = random_cmatrix(rng, m + 2, 1, 2.0).col(0);
    const SolveResult bf = brute_force_ml(c, g, a);
    const SolveResult sd = sesd_solve(prepare_triangular_auto(g, c), a);
    const double f_bf = ls_objective(c, g, bf.z), f_sd = ls_objective(c, g, sd.z);
    const double gap = std::abs(f_sd - f_bf) / std::max(1.0, f_bf);
    worst = std::max(worst, gap);
    agree += gap <= kOracleTol;
  }
  const double elapsed = seconds_since(start);
  Verdict v;
  v.require(agree == kOracleInstances, fmt("%d/%d instances agree (worst gap %.2e)", agree, kOracleInstances, worst));
  v.require(elapsed < kOracleBudgetS, fmt("%.2f s", elapsed));
  return v;
}

// 2. EP against the sphere decoder on analog subproblems of a 4-chain design.
Verdict ep_near_optimality() {
  SystemConfig c;
  c.m_rf = 4;
  int close = 0, total = 0;
  for (int trial = 0; total < kEpInstances; ++trial) {
    const Alphabet a = make_analog_alphabet(1 + trial % 2);
    const CMatrix f = wmmse_target(c, trial);
    const CMatrix g = digital_least_squares(f, init_analog_svd(f, c.m_rf)).transpose();
    for (int n = 0; n < 50 && total < kEpInstances; ++n, ++total) {
      const CVector target = f.row(n).transpose();
      const double ep = ep_solve(target, g, a).objective;
      const double sd = sesd_solve(prepare_triangular_auto(g, target), a).objective;
      close += ep <= kEpRatio * sd;
    }
  }
  // Unstructured targets, reported for reference only.
  std::mt19937_64 rng(2);
  const Alphabet qam = make_digital_alphabet(4, 1.0);
  int close_random = 0;
  for (int i = 0; i < kEpInstances; ++i) {
    const CMatrix g = random_cmatrix(rng, 8, 4);
    const CVector t = random_cmatrix(rng, 8, 1, 2.0).col(0);
    close_random += ep_solve(t, g, qam).objective <= kEpRatio * sesd_solve(prepare_triangular_auto(g, t), qam).objective;
  }
  Verdict v;
  v.require(close >= kEpFraction * total, fmt("%d/%d design subproblems within %.2fx of optimum", close, total, kEpRatio));
  v.detail += fmt("; reference, unstructured Gaussian targets: %d/%d", close_random, kEpInstances);
  return v;
}

// 3. Convergence of both alternations on a single default draw.
Verdict convergence() {
  const SystemConfig c;
  const CMatrix f = wmmse_target(c, 0);
  const auto [sd, sd_trace] = alternate(f, c, HybridOptions::from_config(c, SolverKind::Sesd));
  const auto [ep, ep_trace] = alternate(f, c, HybridOptions::from_config(c, SolverKind::Ep));
  const auto& obj = sd_trace.objective_per_outer_iter;
  bool monotone = true;
  for (std::size_t i = 1; i < obj.size(); ++i) monotone = monotone && obj[i] <= obj[i - 1] * (1.0 + kTraceSlack);
  const double sd_mse = mse_to_target(f, sd.f_rf, sd.f_bb), ep_mse = mse_to_target(f, ep.f_rf, ep.f_bb);
  Verdict v;
  v.require(sd_trace.converged && obj.size() <= kMaxOuterIterations, fmt("SD stops after %zu iterations", obj.size()));
  v.require(ep_trace.converged && ep_trace.objective_per_outer_iter.size() <= kMaxOuterIterations,
            fmt("EP stops after %zu iterations", ep_trace.objective_per_outer_iter.size()));
  v.require(monotone, "SD trace non-increasing");
  v.require(sd_mse < ep_mse, fmt("final MSE SD %.6g vs EP %.6g", sd_mse, ep_mse));
  return v;
}

// 4. Sum-rate ordering at 50 dBm with an unquantized digital precoder.
Verdict sum_rate_ordering() {
  ExperimentSpec spec;
  spec.name = "acceptance_sum_rate";
  spec.base.quant_levels = 0;
  spec.sweep = {"total_power_dbm", {50.0}};
  spec.schemes = {Scheme::SdHybrid, Scheme::EpHybrid, Scheme::Altmin1Quantized, Scheme::Altmin2Quantized};
  spec.n_trials = kMonteCarloTrials;
  spec.outputs = {Metric::SumRateAvg};
  int errors = 0;
  const Samples s = collect(run_experiment(spec, workers()), "sum_rate_avg", spec.n_trials, errors);
  const double sd = mean(s.at({"sd-hybrid", 50.0})), ep = mean(s.at({"ep-hybrid", 50.0}));
  const double a1 = mean(s.at({"altmin1-q", 50.0})), a2 = mean(s.at({"altmin2-q", 50.0}));
  Verdict v;
  v.require(errors == 0, fmt("%d failed designs", errors));
  v.require(sd > ep && ep > a2 && ep > a1,
            fmt("mean bps/Hz SD %.2f, EP %.2f, AltMin2-Q %.2f, AltMin1-Q %.2f", sd, ep, a2, a1));
  v.require(std::abs(sd - kReferenceSdRate) <= kRateBand * kReferenceSdRate, fmt("SD within 20%% of %.2f", kReferenceSdRate));
  return v;
}

// 5. Fronthaul arithmetic.
Verdict fronthaul() {
  auto two_dp = [](double x, double want) { return std::abs(std::round(x * 100.0) / 100.0 - want) < 1e-9; };
  SystemConfig c;
  c.quant_levels = 2;
  const LinkBudget b2 = fronthaul_accounting(c, 16, 12);
  c.quant_levels = 4;
  const LinkBudget b4 = fronthaul_accounting(c, 16, 12);
  SystemConfig c15, c30;
  c15.fronthaul_budget_bits_per_symbol = 15.0;
  c30.fronthaul_budget_bits_per_symbol = 30.0;
  Verdict v;
  v.require(two_dp(b2.precoder_update_bits_per_symbol, 14.63), fmt("R_update %.2f", b2.precoder_update_bits_per_symbol));
  v.require(two_dp(b2.proposed_total, 526.63), fmt("B_prop(L=2) %.2f", b2.proposed_total));
  v.require(two_dp(b4.proposed_total, 541.26), fmt("B_prop(L=4) %.2f", b4.proposed_total));
  v.require(two_dp(b2.conventional_total, 6144.0), fmt("B_conv %.2f", b2.conventional_total));
  v.require(max_supported_levels(c15) == 2 && max_supported_levels(c30) == 4,
            fmt("L at C_F=15: %d, at C_F=30: %d", max_supported_levels(c15), max_supported_levels(c30)));
  return v;
}

// 6. Link-budget constants.
Verdict link_budget() {
  const double pl = path_loss_db(150.0, 28.0);
  const double noise = noise_power_dbm(SystemConfig{});
  Verdict v;
  v.require(std::abs(pl - 104.8) <= 0.1, fmt("path loss at 150 m %.3f dB", pl));
  v.require(noise == -94.0, fmt("noise power %.6f dBm", noise));
  return v;
}

// 7. Design time against the number of RF chains.
Verdict runtime_trend() {
  const auto rows = runtime_benchmark({4, 6, 8}, SystemConfig{}, kMonteCarloTrials);
  std::map<std::string, std::map<int, double>> ms;
  for (const auto& r : rows) ms[r.scheme][r.m_rf] = r.mean_ms;
  const auto& sd = ms.at("sd-hybrid");
  const auto& ep = ms.at("ep-hybrid");
  double ep_lo = INFINITY, ep_hi = 0.0;
  for (const auto& [m, t] : ep) {
    ep_lo = std::min(ep_lo, t);
    ep_hi = std::max(ep_hi, t);
  }
  Verdict v;
  v.require(sd.at(8) >= kSdGrowth * sd.at(4),
            fmt("SD ms %.1f/%.1f/%.1f, growth %.1fx", sd.at(4), sd.at(6), sd.at(8), sd.at(8) / sd.at(4)));
  v.require(ep_hi <= kEpSpread * ep_lo,
            fmt("EP ms %.1f/%.1f/%.1f, spread %.2fx", ep.at(4), ep.at(6), ep.at(8), ep_hi / ep_lo));
  return v;
}

// 8. WMMSE against maximum ratio transmission and trace monotonicity.
Verdict wmmse_sanity() {
  SystemConfig one;
  one.n_users = 1;
  one.n_subcarriers = 1;
  one.m_rf = 1;
  const ChannelSet h = draw_channel(one, 0);
  const double p = one.subcarrier_power_w(), n0 = one.noise_power_w();
  const double rate = sum_rate(h, wmmse_fully_digital(h, p, n0).first.f, n0).total_sum_rate;
  const double mrt = std::log2(1.0 + p * h.h.squaredNorm() / n0);

  int monotone = 0;
  for (int t = 0; t < 100; ++t) {
    SystemConfig c;
    c.n_tx = 16;
    c.n_users = 2 + t % 3;
    c.m_rf = c.n_users;
    c.n_subcarriers = 2;
    const auto trace = wmmse_fully_digital(draw_channel(c, t), c.subcarrier_power_w(), c.noise_power_w()).second;
    bool ok = true;
    for (std::size_t i = 1; i < trace.utility.size(); ++i) ok = ok && trace.utility[i] >= trace.utility[i - 1] * (1 - 1e-9);
    monotone += ok;
  }
  Verdict v;
  v.require(std::abs(rate - mrt) <= kMrtTol * mrt, fmt("single-user rate %.9f vs MRT %.9f", rate, mrt));
  v.require(monotone == 100, fmt("%d/100 utility traces monotone", monotone));
  return v;
}

// 9. Invariants across modules.
Verdict invariants() {
  Verdict v;
  SystemConfig c;
  c.n_tx = 16;
  c.n_subcarriers = 8;
  c.quant_levels = 4;
  c.analog_bits = 2;
  const Alphabet analog = make_analog_alphabet(c.analog_bits);
  const double p_s = c.subcarrier_power_w();

  bool members = true, feasible = true;
  double worst_ratio = 0.0;
  for (int t = 0; t < 5; ++t) {
    const CMatrix f = wmmse_target(c, t);
    for (Scheme s : {Scheme::SdHybrid, Scheme::EpHybrid, Scheme::DynamicSd, Scheme::Altmin1Quantized,
                     Scheme::Altmin2Quantized, Scheme::NpAnalogEpDigital, Scheme::EpAnalogNpDigital}) {
      const SchemeOutcome o = run_scheme(s, f, c);
      const bool dynamic = s == Scheme::DynamicSd;
      for (Eigen::Index i = 0; i < o.f_rf.size(); ++i)
        members = members && (analog.contains(o.f_rf(i)) || (dynamic && o.f_rf(i) == cplx(0.0)));
      const double ratio = max_power_ratio(o.f_rf, o.f_bb, c.n_users, c.n_subcarriers, p_s);
      worst_ratio = std::max(worst_ratio, ratio);
      feasible = feasible && ratio <= 1.0 + c.bisection_tol;
    }
    // Digital entries on the quantization grid.
    const auto [pre, trace] = alternate(f, c, HybridOptions::from_config(c, SolverKind::Sesd));
    const Alphabet grid = make_digital_alphabet(c.quant_levels, pre.delta);
    for (Eigen::Index i = 0; i < pre.f_bb.size(); ++i)
      members = members && std::abs(nearest_label(pre.f_bb(i), grid) - pre.f_bb(i)) < 1e-12 * pre.delta;
  }
  v.require(members, "alphabet membership");
  v.require(feasible, fmt("power ratio max %.6f", worst_ratio));

  std::mt19937_64 rng(3);
  double realify_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const CMatrix r = random_cmatrix(rng, 6, 4);
    const CVector z = random_cmatrix(rng, 4, 1).col(0);
    const auto [zr, rr] = realify(z, CMatrix(r.topRows(4)));
    realify_err = std::max(realify_err, std::abs(zr.squaredNorm() - z.squaredNorm()) / z.squaredNorm());
    realify_err = std::max(realify_err, (rr * zr - realify(CVector(r.topRows(4) * z))).norm() / z.norm());
  }
  v.require(realify_err <= kRealifyTol, fmt("realify error %.1e", realify_err));

  double grad_err = 0.0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const CMatrix f = random_cmatrix(rng, 4, 3), b = random_cmatrix(rng, 2, 3);
    const CMatrix x = retract_unit_modulus(random_cmatrix(rng, 4, 2));
    RMatrix theta(4, 2);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = n(rng);
    auto curve = [&](double s) {
      CMatrix y = x;
      for (Eigen::Index i = 0; i < y.size(); ++i) y(i) *= std::polar(1.0, s * theta(i));
      return (f - y * b).squaredNorm();
    };
    const double h = 1e-5, fd = (curve(h) - curve(-h)) / (2 * h);
    const CMatrix g = riemannian_gradient(f, x, b);
    double analytic = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) analytic += std::real(std::conj(g(i)) * cplx(0, theta(i)) * x(i));
    grad_err = std::max(grad_err, std::abs(analytic - fd) / std::max(1.0, std::abs(fd)));
  }
  v.require(grad_err <= kGradientTol, fmt("gradient check %.1e", grad_err));

  ExperimentSpec spec;
  spec.name = "acceptance_replay";
  spec.base = c;
  spec.base.n_tx = 8;
  spec.base.m_rf = 3;
  spec.base.n_subcarriers = 4;
  spec.sweep = {"total_power_dbm", {30.0, 40.0}};
  spec.schemes = {Scheme::SdHybrid, Scheme::EpHybrid, Scheme::Altmin1Quantized, Scheme::FullyDigital};
  spec.n_trials = 4;
  spec.outputs = {Metric::SumRateAvg, Metric::Mse, Metric::Trace, Metric::Runtime};
  const auto dir = std::filesystem::temp_directory_path();
  emit_csv(run_experiment(spec, 1), dir / "lrhp_replay_1.csv");
  emit_csv(run_experiment(spec, 8), dir / "lrhp_replay_8.csv");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const std::string a = slurp(dir / "lrhp_replay_1.csv"), b = slurp(dir / "lrhp_replay_8.csv");
  v.require(!a.empty() && a == b, fmt("replay CSV %zu bytes identical at parallelism 1 and 8", a.size()));
  return v;
}

// 10. Resolution trends for the EP design and the nearest-point analog variant.
Verdict resolution_trends() {
  auto sweep = [](const std::string& parameter, std::vector<double> values, int bits, int levels) {
    ExperimentSpec spec;
    spec.name = "acceptance_resolution";
    spec.base.analog_bits = bits;
    spec.base.quant_levels = levels;
    spec.sweep = {parameter, std::move(values)};
    spec.schemes = {Scheme::EpHybrid, Scheme::NpAnalogEpDigital};
    spec.n_trials = kMonteCarloTrials;
    spec.outputs = {Metric::SumRateAvg};
    return spec;
  };
  int errors = 0;
  const std::vector<double> levels{2, 4, 8, 16, 32}, bits{1, 2, 3, 4};
  const Samples by_l =
      collect(run_experiment(sweep("quant_levels", levels, 1, 2), workers()), "sum_rate_avg", kMonteCarloTrials, errors);
  const Samples by_b =
      collect(run_experiment(sweep("analog_bits", bits, 1, 32), workers()), "sum_rate_avg", kMonteCarloTrials, errors);

  Verdict v;
  v.require(errors == 0, fmt("%d failed designs", errors));
  auto trend = [&](const Samples& s, const std::vector<double>& xs, const char* name) {
    bool ok = true;
    std::string means;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& cur = s.at({"ep-hybrid", xs[i]});
      means += fmt("%s%.2f", i ? "/" : "", mean(cur));
      if (i == 0) continue;
      const auto& prev = s.at({"ep-hybrid", xs[i - 1]});
      ok = ok && mean(cur) >= mean(prev) - paired_standard_error(prev, cur);
    }
    v.require(ok, fmt("EP rate vs %s %s", name, means.c_str()));
  };
  trend(by_l, levels, "L (b=1)");
  trend(by_b, bits, "b (L=32)");
  bool close = true;
  std::string gaps;
  for (double b : {2.0, 3.0, 4.0}) {
    const double ep = mean(by_b.at({"ep-hybrid", b})), np = mean(by_b.at({"np-analog-ep-digital", b}));
    const double gap = (ep - np) / ep;
    gaps += fmt("%sb=%g %.1f%%", gaps.empty() ? "" : ", ", b, 100.0 * gap);
    close = close && gap <= kNpGap;
  }
  v.require(close, "NP analog within 5% of EP at L=32: " + gaps);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"oracle exactness", oracle_exactness},
      {"EP near-optimality", ep_near_optimality},
      {"convergence", convergence},
      {"sum-rate ordering", sum_rate_ordering},
      {"fronthaul accounting", fronthaul},
      {"link budget constants", link_budget},
      {"runtime trend", runtime_trend},
      {"WMMSE sanity", wmmse_sanity},
      {"invariant suite", invariants},
      {"resolution trends", resolution_trends},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += !v.pass;
    std::printf("criterion %2d %s  %s: %s (%.1f s)\n", id, v.pass ? "PASS" : "FAIL", criteria[i].first,
                v.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
