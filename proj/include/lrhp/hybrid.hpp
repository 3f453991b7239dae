#pragma once

// Alternating design of limited-resolution hybrid precoders: the analog
// (phase-shifter) and digital (quantized baseband) matrices are refined in
// turn, each step posed as a finite-alphabet least-squares problem.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "lrhp/alphabets.hpp"
#include "lrhp/channel.hpp"
#include "lrhp/detect.hpp"
#include "lrhp/wmmse.hpp"

namespace lrhp {

enum class SolverKind { Sesd, Ep, BruteForce };
enum class HybridMode { FullyConnected, DynamicConnected };

using SwitchMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct HybridPrecoder {
  CMatrix f_rf;  // N_T x M_T
  CMatrix f_bb;  // M_T x (K*S), user-major columns
  /// Digital quantization step; 0 when the digital precoder is unquantized.
  double delta = 0.0;
  HybridMode mode = HybridMode::FullyConnected;
  SwitchMatrix switch_matrix;  // dynamic mode only
  CVector phase_diag;          // dynamic mode only

  CMatrix effective() const { return f_rf * f_bb; }
};

struct SolverStats {
  std::int64_t solves = 0;
  std::int64_t nodes_visited = 0;
  std::int64_t ep_iterations = 0;
  std::int64_t truncated = 0;
  double wall_time_s = 0.0;

  void add(const SolveResult& r) {
    ++solves;
    nodes_visited += r.nodes_visited;
    ep_iterations += r.iterations;
    truncated += r.truncated ? 1 : 0;
    wall_time_s += r.wall_time_s;
  }
  void merge(const SolverStats& o) {
    solves += o.solves;
    nodes_visited += o.nodes_visited;
    ep_iterations += o.ep_iterations;
    truncated += o.truncated;
    wall_time_s += o.wall_time_s;
  }
};

struct SolveTrace {
  std::vector<double> objective_per_outer_iter;
  std::vector<double> mu_per_subcarrier;
  std::vector<int> inner_bisection_iters;  // last digital step, per sub-carrier
  std::vector<double> delta_per_outer_iter;
  SolverStats analog_stats;
  SolverStats digital_stats;
  double analog_time_s = 0.0;
  double digital_time_s = 0.0;
  double total_time_s = 0.0;
  int delta_shrinks = 0;
  bool converged = false;
  bool truncated = false;
};

enum class DeltaSchedule { PerOuterIteration, FirstIterationOnly };

struct HybridOptions {
  SolverKind analog_solver = SolverKind::Sesd;
  SolverKind digital_solver = SolverKind::Sesd;
  EpOptions ep;
  DeltaRule delta_rule = DeltaRule::gaussian_fit();
  DeltaSchedule delta_schedule = DeltaSchedule::PerOuterIteration;
  double outer_tol = 0.01;
  int outer_max_iter = 50;
  double bisection_tol = 1e-3;
  /// Optional starting analog precoder; the SVD initialization is used otherwise.
  std::optional<CMatrix> initial_analog;

  static HybridOptions from_config(const SystemConfig& config, SolverKind solver);
};

struct AnalogStep {
  CMatrix f_rf;
  SolverStats stats;
};

struct DigitalStep {
  CMatrix f_bb;
  double delta = 0.0;
  std::vector<double> mu;
  std::vector<int> bisection_iters;
  int delta_shrinks = 0;
  SolverStats stats;
};

/// exp(j arg(U~ Sigma~)) from the leading M_T singular pairs of F_FD.
CMatrix init_analog_svd(const CMatrix& f_fd, int m_rf);

/// Per-antenna solve of min ||a_n - F_BB^T x_n||^2 over the analog alphabet.
AnalogStep optimize_analog(const CMatrix& f_fd, const CMatrix& f_bb, SolverKind solver, const Alphabet& alphabet,
                           const EpOptions& ep = {});

struct DigitalProblem {
  int n_users = 0;
  int n_subcarriers = 0;
  double p_s = 0.0;
  int levels = 2;  // 0: unquantized
  DeltaRule delta_rule = DeltaRule::gaussian_fit();
  /// Use this step instead of selecting one from the least-squares solution.
  std::optional<double> fixed_delta;
  double bisection_tol = 1e-3;
  SolverKind solver = SolverKind::Sesd;
  EpOptions ep;
};

/// Digital least squares F_RF^+ F_FD (diagonal loading on rank deficiency).
CMatrix digital_least_squares(const CMatrix& f_fd, const CMatrix& f_rf);

/// Quantized digital precoder under the per-sub-carrier power budget via
/// per-sub-carrier Lagrange multipliers found by bisection.
DigitalStep optimize_digital(const CMatrix& f_fd, const CMatrix& f_rf, const DigitalProblem& problem);

/// Sum over users of ||F_RF b_{k,s}||^2 as a function of the multiplier,
/// exposed for monotonicity checks. Returns the digital columns as well.
struct MultiplierProbe {
  double power = 0.0;
  CMatrix columns;  // M_T x K
};
MultiplierProbe probe_multiplier(const CMatrix& f_fd, const CMatrix& f_rf, int n_users, int n_subcarriers, int s,
                                 double mu, double delta, int levels, SolverKind solver, const EpOptions& ep = {});

/// Fully-connected alternation (digital step, then analog step, per iteration).
std::pair<HybridPrecoder, SolveTrace> alternate(const CMatrix& f_fd, const SystemConfig& config,
                                                const HybridOptions& options);

/// Per-antenna binary connection pattern on the rotated target, followed by
/// repair to distinct nonzero columns.
SwitchMatrix optimize_switch(const CMatrix& f_fd, const CVector& phase_diag, const CMatrix& f_bb, SolverKind solver,
                             const EpOptions& ep = {});

/// Raw per-antenna switch rows before repair.
SwitchMatrix solve_switch_rows(const CMatrix& f_fd, const CVector& phase_diag, const CMatrix& f_bb, SolverKind solver,
                               const EpOptions& ep = {});

/// Flips single entries (least residual increase first) until columns are
/// distinct and nonzero. Throws NumericalError naming the RF chains on failure.
void repair_switch(SwitchMatrix& sw, const CMatrix& f_fd, const CVector& phase_diag, const CMatrix& f_bb);

bool switch_columns_valid(const SwitchMatrix& sw);

/// One-dimensional search over the analog alphabet for every antenna phase.
CVector optimize_phase_diag(const CMatrix& f_fd, const SwitchMatrix& sw, const CMatrix& f_bb, const Alphabet& alphabet);

CMatrix dynamic_analog(const CVector& phase_diag, const SwitchMatrix& sw);

/// Dynamic-connected alternation: digital step, switch step, phase step.
std::pair<HybridPrecoder, SolveTrace> alternate_dynamic(const CMatrix& f_fd, const SystemConfig& config,
                                                        const HybridOptions& options);

/// Largest per-sub-carrier power of F_RF F_BB relative to p_s.
double max_power_ratio(const CMatrix& f_rf, const CMatrix& f_bb, int n_users, int n_subcarriers, double p_s);

}  // namespace lrhp
