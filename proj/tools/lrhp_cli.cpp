// Command-line front end: experiment runs, the sphere-decoder oracle check,
// the runtime benchmark and fronthaul budget arithmetic.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>

#include "CLI11.hpp"
#include "lrhp/detect.hpp"
#include "lrhp/errors.hpp"
#include "lrhp/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSpec = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitAcceptance = 4;

using namespace lrhp;

int cmd_run(const std::string& spec_file, const std::string& out_dir, int parallel, const std::string& preset) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentSpec spec = load_spec(spec_file, preset.empty() ? std::nullopt : std::optional<std::string>(preset));
  const std::vector<ResultRow> rows = run_experiment(spec, parallel);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base = std::filesystem::path(out_dir) / spec.name;
  emit_csv(rows, base.string() + ".csv");
  emit_timing_csv(rows, base.string() + "_timing.csv");

  RunManifest m;
  m.experiment = spec.name;
  m.config_hash = config_hash(spec);
  m.seed = spec.seed;
  m.git_describe = git_describe();
  m.preset = preset.empty() ? "none" : preset;
  m.n_trials = spec.n_trials;
  m.n_rows = rows.size();
  for (const auto& r : rows) m.n_errors += r.metric == "error";
  m.wall_clock_s = elapsed;
  emit_manifest(m, base.string() + "_manifest.json");

  // Per-scheme means of the first scalar metric for a quick look.
  std::map<std::pair<std::string, double>, std::pair<double, int>> means;
  for (const auto& r : rows)
    if (r.metric == "sum_rate_avg" || r.metric == "sum_rate_total" || r.metric == "mse") {
      auto& acc = means[{r.scheme + " " + r.metric, r.sweep_value}];
      acc.first += r.value;
      ++acc.second;
    }
  for (const auto& [key, acc] : means)
    std::printf("%-36s %s=%-8g mean=%.6g (n=%d)\n", key.first.c_str(), spec.sweep.parameter.c_str(), key.second,
                acc.first / acc.second, acc.second);
  std::printf("wrote %s.csv (%zu rows, %zu errors) in %.1f s\n", base.string().c_str(), rows.size(), m.n_errors, elapsed);
  return kExitOk;
}

int cmd_oracle_check(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::uniform_int_distribution<int> pick(0, 3);
  int mismatches = 0;
  for (int i = 0; i < instances; ++i) {
    const int m = 2 + i % 3;
    const int n = m + 2;
    const int kind = pick(rng);
    const Alphabet a = kind == 0   ? make_analog_alphabet(1)
                       : kind == 1 ? make_analog_alphabet(2)
                       : kind == 2 ? make_digital_alphabet(2, 1.0)
                                   : make_digital_alphabet(4, 1.0);
    CMatrix g(n, m);
    CVector c(n);
    for (Eigen::Index j = 0; j < g.size(); ++j) g(j) = cplx(normal(rng), normal(rng));
    for (Eigen::Index j = 0; j < c.size(); ++j) c(j) = cplx(normal(rng), normal(rng)) * 2.0;
    const SolveResult bf = brute_force_ml(c, g, a);
    const SolveResult sd = sesd_solve(prepare_triangular_auto(g, c), a);
    const double f_bf = ls_objective(c, g, bf.z), f_sd = ls_objective(c, g, sd.z);
    if (std::abs(f_bf - f_sd) > 1e-10 * std::max(1.0, f_bf)) {
      ++mismatches;
      std::printf("instance %d: brute force %.12g, sphere decoder %.12g\n", i, f_bf, f_sd);
    }
  }
  std::printf("oracle-check: %d/%d instances agree\n", instances - mismatches, instances);
  return mismatches == 0 ? kExitOk : kExitAcceptance;
}

int cmd_bench(const std::vector<int>& rf, int trials, const std::string& preset) {
  SystemConfig c;
  if (preset == "desk") {
    c.n_tx = 16;
    c.n_subcarriers = 8;
  } else if (preset != "paper") {
    throw ParameterError("preset must be desk or paper");
  }
  std::printf("%-10s %5s %8s %12s %12s %12s\n", "scheme", "M_T", "trials", "mean_ms", "analog_ms", "digital_ms");
  for (const auto& r : runtime_benchmark(rf, c, trials))
    std::printf("%-10s %5d %8d %12.2f %12.2f %12.2f\n", r.scheme.c_str(), r.m_rf, r.n_trials, r.mean_ms, r.analog_ms,
                r.digital_ms);
  return kExitOk;
}

int cmd_budget(int levels, int nsym, int rf, int users, int subcarriers, double cf, int mod, int iq_bits) {
  SystemConfig c;
  c.quant_levels = levels;
  c.n_sym = nsym;
  c.m_rf = rf;
  c.n_users = users;
  c.n_subcarriers = subcarriers;
  c.fronthaul_budget_bits_per_symbol = cf;
  c.n_tx = std::max(c.n_tx, rf);
  const LinkBudget b = fronthaul_accounting(c, mod, iq_bits);
  std::printf("data_bits_per_symbol            %.2f\n", b.data_bits_per_symbol);
  std::printf("precoder_update_bits_per_symbol %.2f\n", b.precoder_update_bits_per_symbol);
  std::printf("proposed_total                  %.2f\n", b.proposed_total);
  std::printf("conventional_total              %.2f\n", b.conventional_total);
  std::printf("max_levels_log2                 %.4f\n", b.max_levels_log2);
  std::printf("max_supported_levels            %d\n", max_supported_levels(c));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-resolution hybrid precoding experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment file");
  std::string spec_file, out_dir = "results", preset;
  int parallel = 1;
  run->add_option("spec", spec_file, "Experiment JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--preset", preset, "Named preset defined in the experiment file");

  auto* oracle = app.add_subcommand("oracle-check", "Compare the sphere decoder against exhaustive search");
  int instances = 500;
  std::uint64_t oracle_seed = 1;
  oracle->add_option("--instances", instances)->check(CLI::PositiveNumber);
  oracle->add_option("--seed", oracle_seed);

  auto* bench = app.add_subcommand("bench-runtime", "Mean design time per number of RF chains");
  std::vector<int> rf_list{4, 6, 8};
  int bench_trials = 20;
  std::string bench_preset = "paper";
  bench->add_option("--rf", rf_list)->delimiter(',');
  bench->add_option("--trials", bench_trials)->check(CLI::PositiveNumber);
  bench->add_option("--preset", bench_preset);

  auto* budget = app.add_subcommand("budget", "Fronthaul accounting");
  int levels = 2, nsym = 140, rf = 8, users = 2, subcarriers = 64, mod = 16, iq_bits = 12;
  double cf = 15.0;
  budget->add_option("--levels", levels)->required();
  budget->add_option("--nsym", nsym)->required();
  budget->add_option("--rf", rf);
  budget->add_option("--users", users);
  budget->add_option("--subcarriers", subcarriers);
  budget->add_option("--cf", cf);
  budget->add_option("--mod", mod);
  budget->add_option("--iq-bits", iq_bits);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSpec;
  }

  try {
    if (*run) return cmd_run(spec_file, out_dir, parallel, preset);
    if (*oracle) return cmd_oracle_check(instances, oracle_seed);
    if (*bench) return cmd_bench(rf_list, bench_trials, bench_preset);
    if (*budget) return cmd_budget(levels, nsym, rf, users, subcarriers, cf, mod, iq_bits);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSpec;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
