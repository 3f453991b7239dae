#include "lrhp/hybrid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "lrhp/errors.hpp"

namespace lrhp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Scalar>
TriangularSystemT<Scalar> factor_gram(const MatrixT<Scalar>& gram, const VectorT<Scalar>& gh_c, double c_norm2) {
  double ridge = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    try {
      return prepare_triangular_from_gram(gram, gh_c, c_norm2, ridge);
    } catch (const SingularGramError& e) {
      ridge = e.suggested_ridge();
    }
  }
  throw NumericalError("Gram matrix remained singular after diagonal loading");
}

SolveResult solve_complex(const CVector& c, const CMatrix& g, const CMatrix& gram, const CVector& gh_c,
                          const Alphabet& alphabet, SolverKind solver, const EpOptions& ep) {
  switch (solver) {
    case SolverKind::Sesd:
      return sesd_solve(factor_gram<cplx>(gram, gh_c, c.squaredNorm()), alphabet);
    case SolverKind::Ep:
      return ep_run(gram, gh_c, c.squaredNorm(), alphabet, ep).result;
    case SolverKind::BruteForce:
      return brute_force_ml(c, g, alphabet);
  }
  throw ParameterError("unknown solver");
}

// Real-valued digital subproblem for one (user, sub-carrier) column, with the
// shared factorization of realify(F_RF)^T realify(F_RF).
struct RealDigitalSystem {
  RMatrix g;     // realify(F_RF), 2N x 2M
  RMatrix gram;  // g^T g
  RealTriangularSystem base;  // factor of gram (+ ridge), d unused
  bool factored = false;

  explicit RealDigitalSystem(const CMatrix& f_rf, bool need_factor) {
    g = realify(CVector::Zero(f_rf.cols()), f_rf).second;
    gram = g.transpose() * g;
    if (need_factor) {
      base = factor_gram<double>(gram, RVector::Zero(gram.rows()), 0.0);
      factored = true;
    }
  }

  SolveResult solve(const RVector& c_r, double mu, const Alphabet& real_alphabet, SolverKind solver,
                    const EpOptions& ep) const {
    const double scale = std::sqrt(1.0 + mu);
    const RVector y = g.transpose() * c_r;
    const double cn = c_r.squaredNorm() / (1.0 + mu);
    switch (solver) {
      case SolverKind::Sesd: {
        RealTriangularSystem sys;
        sys.r = scale * base.r;
        sys.d = base.r.transpose().triangularView<Eigen::Lower>().solve(y) / scale;
        sys.ridge = (1.0 + mu) * base.ridge;
        sys.constant_offset = cn - sys.d.squaredNorm();
        return sesd_solve(sys, real_alphabet);
      }
      case SolverKind::Ep:
        return ep_run(RMatrix((1.0 + mu) * gram), y, cn, real_alphabet, ep).result;
      case SolverKind::BruteForce:
        return brute_force_ml(RVector(c_r / scale), RMatrix(scale * g), real_alphabet);
    }
    throw ParameterError("unknown solver");
  }
};

double column_power(const CMatrix& f_rf, const CMatrix& cols) { return (f_rf * cols).squaredNorm(); }

}  // namespace

HybridOptions HybridOptions::from_config(const SystemConfig& config, SolverKind solver) {
  HybridOptions o;
  o.analog_solver = solver;
  o.digital_solver = solver;
  o.ep.damping = config.ep_damping;
  o.ep.max_iter = config.ep_max_iter;
  o.ep.tol = config.ep_tol;
  o.outer_tol = config.outer_tol;
  o.outer_max_iter = config.outer_max_iter;
  o.bisection_tol = config.bisection_tol;
  return o;
}

CMatrix digital_least_squares(const CMatrix& f_fd, const CMatrix& f_rf) {
  const CMatrix gram = f_rf.adjoint() * f_rf;
  const CMatrix rhs = f_rf.adjoint() * f_fd;
  double ridge = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    CMatrix loaded = gram;
    loaded.diagonal().array() += ridge;
    Eigen::LLT<CMatrix> llt(loaded);
    if (llt.info() == Eigen::Success) {
      CMatrix x = llt.solve(rhs);
      if (x.allFinite()) return x;
    }
    ridge = ridge > 0.0 ? ridge * 100.0 : suggested_ridge(std::real(gram.trace()), gram.rows());
  }
  throw NumericalError("least-squares digital precoder failed");
}

CMatrix init_analog_svd(const CMatrix& f_fd, int m_rf) {
  if (m_rf < 1 || m_rf > std::min(f_fd.rows(), f_fd.cols()))
    throw ParameterError("SVD initialization needs M_T <= min(N_T, K*S)");
  Eigen::BDCSVD<CMatrix> svd(f_fd, Eigen::ComputeThinU);
  const CMatrix& u = svd.matrixU();
  const RVector& sv = svd.singularValues();
  CMatrix out(f_fd.rows(), m_rf);
  if (!u.allFinite() || !sv.allFinite()) {
    std::cerr << "lrhp: SVD of the fully-digital precoder failed; using random phases\n";
    RngStream rng(0, 0, 0);
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = std::polar(1.0, rng.uniform(0.0, 2.0 * M_PI));
    return out;
  }
  const double tiny = sv.size() > 0 ? 1e-12 * sv(0) : 0.0;
  for (int m = 0; m < m_rf; ++m) {
    // Directions without energy carry no phase information; reuse the leading one.
    const int src = sv(m) > tiny ? m : 0;
    for (Eigen::Index n = 0; n < f_fd.rows(); ++n) {
      const cplx v = u(n, src) * sv(src);
      out(n, m) = std::abs(v) > 0.0 ? v / std::abs(v) : cplx(1.0, 0.0);
    }
  }
  return out;
}

AnalogStep optimize_analog(const CMatrix& f_fd, const CMatrix& f_bb, SolverKind solver, const Alphabet& alphabet,
                           const EpOptions& ep) {
  if (f_bb.cols() != f_fd.cols()) throw ParameterError("digital precoder and target disagree in column count");
  const CMatrix b = f_bb.transpose();  // KS x M
  const CMatrix gram = b.adjoint() * b;
  const CMatrix gh_all = b.adjoint() * f_fd.transpose();  // M x N_T
  AnalogStep out;
  out.f_rf.resize(f_fd.rows(), f_bb.rows());
  for (Eigen::Index n = 0; n < f_fd.rows(); ++n) {
    const CVector a = f_fd.row(n).transpose();
    try {
      SolveResult r = solve_complex(a, b, gram, gh_all.col(n), alphabet, solver, ep);
      out.f_rf.row(n) = r.z.transpose();
      out.stats.add(r);
    } catch (const NumericalError& e) {
      throw NumericalError("analog subproblem for antenna " + std::to_string(n) + ": " + e.what(), e.iteration());
    }
  }
  return out;
}

MultiplierProbe probe_multiplier(const CMatrix& f_fd, const CMatrix& f_rf, int n_users, int n_subcarriers, int s,
                                 double mu, double delta, int levels, SolverKind solver, const EpOptions& ep) {
  const Alphabet real_alphabet = make_digital_alphabet(levels, delta, false);
  RealDigitalSystem sys(f_rf, solver == SolverKind::Sesd);
  MultiplierProbe p;
  p.columns.resize(f_rf.cols(), n_users);
  for (int k = 0; k < n_users; ++k) {
    const RVector c_r = realify(CVector(f_fd.col(static_cast<Eigen::Index>(k) * n_subcarriers + s)));
    p.columns.col(k) = complexify(sys.solve(c_r, mu, real_alphabet, solver, ep).z.real());
  }
  p.power = column_power(f_rf, p.columns);
  return p;
}

DigitalStep optimize_digital(const CMatrix& f_fd, const CMatrix& f_rf, const DigitalProblem& pr) {
  const int n_users = pr.n_users, n_sc = pr.n_subcarriers;
  if (f_fd.cols() != static_cast<Eigen::Index>(n_users) * n_sc || f_rf.rows() != f_fd.rows())
    throw ParameterError("digital step dimension mismatch");
  if (!(pr.p_s > 0.0)) throw ParameterError("per-sub-carrier power must be positive");
  if (f_rf.squaredNorm() == 0.0) throw ParameterError("analog precoder is zero");

  DigitalStep out;
  out.mu.assign(n_sc, 0.0);
  out.bisection_iters.assign(n_sc, 0);
  const CMatrix ls = digital_least_squares(f_fd, f_rf);

  if (pr.levels == 0) {
    out.f_bb = ls;
    for (int s = 0; s < n_sc; ++s) {
      double p = 0.0;
      for (int k = 0; k < n_users; ++k)
        p += (f_rf * ls.col(static_cast<Eigen::Index>(k) * n_sc + s)).squaredNorm();
      if (p > pr.p_s) {
        const double shrink = std::sqrt(pr.p_s / p);
        out.mu[s] = 1.0 / shrink - 1.0;
        for (int k = 0; k < n_users; ++k) out.f_bb.col(static_cast<Eigen::Index>(k) * n_sc + s) *= shrink;
      }
    }
    return out;
  }

  double delta = pr.fixed_delta
                     ? *pr.fixed_delta
                     : choose_delta(std::span<const cplx>(ls.data(), static_cast<std::size_t>(ls.size())), pr.levels,
                                    pr.delta_rule);
  const RealDigitalSystem sys(f_rf, pr.solver == SolverKind::Sesd);
  std::vector<RVector> targets(static_cast<std::size_t>(n_users) * n_sc);
  for (Eigen::Index j = 0; j < f_fd.cols(); ++j) targets[static_cast<std::size_t>(j)] = realify(CVector(f_fd.col(j)));

  const double upper = pr.p_s * (1.0 + pr.bisection_tol);
  for (int shrink = 0; shrink <= 8; ++shrink) {
    const Alphabet real_alphabet = make_digital_alphabet(pr.levels, delta, false);
    out.f_bb.setZero(f_rf.cols(), f_fd.cols());
    out.stats = {};
    bool feasible = true;

    for (int s = 0; s < n_sc && feasible; ++s) {
      auto solve_at = [&](double mu) {
        MultiplierProbe p;
        p.columns.resize(f_rf.cols(), n_users);
        for (int k = 0; k < n_users; ++k) {
          SolveResult r = sys.solve(targets[static_cast<std::size_t>(k) * n_sc + s], mu, real_alphabet, pr.solver, pr.ep);
          out.stats.add(r);
          p.columns.col(k) = complexify(r.z.real());
        }
        p.power = column_power(f_rf, p.columns);
        return p;
      };
      int iters = 1;
      MultiplierProbe chosen = solve_at(0.0);
      double mu = 0.0;
      if (chosen.power > upper) {
        // Bracket: double until feasible.
        double lo = 0.0, hi = 1.0;
        MultiplierProbe at_hi = solve_at(hi);
        ++iters;
        int doublings = 0;
        while (at_hi.power > pr.p_s && doublings < 60) {
          lo = hi;
          hi *= 2.0;
          at_hi = solve_at(hi);
          ++iters;
          ++doublings;
        }
        if (at_hi.power > upper) {
          feasible = false;
          break;
        }
        bool accepted = false;
        while (hi - lo > 1e-8 * std::max(1.0, hi)) {
          const double mid = 0.5 * (lo + hi);
          MultiplierProbe at_mid = solve_at(mid);
          ++iters;
          if (std::abs(at_mid.power - pr.p_s) < pr.bisection_tol * pr.p_s) {
            chosen = std::move(at_mid);
            mu = mid;
            accepted = true;
            break;
          }
          if (at_mid.power > pr.p_s) {
            lo = mid;
          } else {
            hi = mid;
            at_hi = std::move(at_mid);
          }
        }
        if (!accepted) {
          chosen = std::move(at_hi);
          mu = hi;
        }
      }
      out.mu[s] = mu;
      out.bisection_iters[s] = iters;
      for (int k = 0; k < n_users; ++k) out.f_bb.col(static_cast<Eigen::Index>(k) * n_sc + s) = chosen.columns.col(k);
    }

    if (feasible) {
      out.delta = delta;
      out.delta_shrinks = shrink;
      return out;
    }
    delta *= 0.5;
  }
  throw NumericalError("digital precoder infeasible: smallest labels exceed the power budget after 8 step reductions");
}

double max_power_ratio(const CMatrix& f_rf, const CMatrix& f_bb, int n_users, int n_subcarriers, double p_s) {
  const CMatrix eff = f_rf * f_bb;
  double worst = 0.0;
  for (int s = 0; s < n_subcarriers; ++s) worst = std::max(worst, subcarrier_power(eff, n_users, n_subcarriers, s) / p_s);
  return worst;
}

namespace {

DigitalProblem digital_problem(const SystemConfig& config, const HybridOptions& options) {
  DigitalProblem dp;
  dp.n_users = config.n_users;
  dp.n_subcarriers = config.n_subcarriers;
  dp.p_s = config.subcarrier_power_w();
  dp.levels = config.quant_levels;
  dp.delta_rule = options.delta_rule;
  dp.bisection_tol = options.bisection_tol;
  dp.solver = options.digital_solver;
  dp.ep = options.ep;
  return dp;
}

struct Candidate {
  double objective = INFINITY;
  HybridPrecoder precoder;
};

void check_outer_preconditions(const CMatrix& f_fd, const SystemConfig& config) {
  config.validate();
  if (config.m_rf > config.n_users * config.n_subcarriers)
    throw ParameterError("hybrid design needs M_T <= K*S");
  if (f_fd.rows() != config.n_tx || f_fd.cols() != static_cast<Eigen::Index>(config.n_users) * config.n_subcarriers)
    throw ParameterError("fully-digital target does not match the configuration");
}

}  // namespace

std::pair<HybridPrecoder, SolveTrace> alternate(const CMatrix& f_fd, const SystemConfig& config,
                                                const HybridOptions& options) {
  const auto start = Clock::now();
  check_outer_preconditions(f_fd, config);
  const Alphabet analog_alphabet = make_analog_alphabet(config.analog_bits);
  DigitalProblem dp = digital_problem(config, options);
  const double p_s = dp.p_s;
  const double feasible_ratio = 1.0 + options.bisection_tol;

  CMatrix f_rf = options.initial_analog ? *options.initial_analog : init_analog_svd(f_fd, config.m_rf);
  if (f_rf.rows() != config.n_tx || f_rf.cols() != config.m_rf) throw ParameterError("initial analog precoder has wrong shape");

  SolveTrace trace;
  Candidate best;
  DigitalStep last_digital;
  auto consider = [&](const CMatrix& rf, const DigitalStep& dig, double objective) {
    if (objective >= best.objective) return;
    if (max_power_ratio(rf, dig.f_bb, config.n_users, config.n_subcarriers, p_s) > feasible_ratio) return;
    best.objective = objective;
    best.precoder.f_rf = rf;
    best.precoder.f_bb = dig.f_bb;
    best.precoder.delta = dig.delta;
  };

  for (int it = 1; it <= options.outer_max_iter; ++it) {
    auto t0 = Clock::now();
    DigitalStep dig = optimize_digital(f_fd, f_rf, dp);
    trace.digital_time_s += seconds_since(t0);
    trace.digital_stats.merge(dig.stats);
    trace.delta_shrinks += dig.delta_shrinks;
    if (options.delta_schedule == DeltaSchedule::FirstIterationOnly && dig.delta > 0.0) dp.fixed_delta = dig.delta;
    if (it > 1) {
      // The multiplier search is not exact on a discrete set; never accept a
      // digital step that is worse than the one already paired with f_rf.
      if (mse_to_target(f_fd, f_rf, dig.f_bb) > trace.objective_per_outer_iter.back()) dig = last_digital;
      consider(f_rf, dig, mse_to_target(f_fd, f_rf, dig.f_bb));
    }
    trace.delta_per_outer_iter.push_back(dig.delta);

    t0 = Clock::now();
    AnalogStep an = optimize_analog(f_fd, dig.f_bb, options.analog_solver, analog_alphabet, options.ep);
    trace.analog_time_s += seconds_since(t0);
    trace.analog_stats.merge(an.stats);

    const double objective = mse_to_target(f_fd, an.f_rf, dig.f_bb);
    trace.objective_per_outer_iter.push_back(objective);
    consider(an.f_rf, dig, objective);
    f_rf = std::move(an.f_rf);
    last_digital = std::move(dig);

    const auto& obj = trace.objective_per_outer_iter;
    if (it > 1) {
      const double prev = obj[obj.size() - 2];
      if (std::abs(objective - prev) < options.outer_tol * std::max(prev, 1e-300)) {
        trace.converged = true;
        break;
      }
    }
  }
  trace.truncated = !trace.converged;
  trace.mu_per_subcarrier = last_digital.mu;
  trace.inner_bisection_iters = last_digital.bisection_iters;

  if (!std::isfinite(best.objective)) {
    // Every post-analog pair violated the budget; restore feasibility for the last analog precoder.
    DigitalStep dig = optimize_digital(f_fd, f_rf, dp);
    trace.digital_stats.merge(dig.stats);
    best.precoder.f_rf = f_rf;
    best.precoder.f_bb = dig.f_bb;
    best.precoder.delta = dig.delta;
  }
  best.precoder.mode = HybridMode::FullyConnected;
  trace.total_time_s = seconds_since(start);
  return {std::move(best.precoder), std::move(trace)};
}

CMatrix dynamic_analog(const CVector& phase_diag, const SwitchMatrix& sw) {
  if (phase_diag.size() != sw.rows()) throw ParameterError("phase diagonal and switch disagree in antenna count");
  return phase_diag.asDiagonal() * sw.cast<cplx>();
}

bool switch_columns_valid(const SwitchMatrix& sw) {
  for (Eigen::Index m = 0; m < sw.cols(); ++m) {
    if (sw.col(m).sum() == 0) return false;
    for (Eigen::Index j = 0; j < m; ++j)
      if (sw.col(m) == sw.col(j)) return false;
  }
  return true;
}

SwitchMatrix solve_switch_rows(const CMatrix& f_fd, const CVector& phase_diag, const CMatrix& f_bb, SolverKind solver,
                               const EpOptions& ep) {
  for (Eigen::Index n = 0; n < phase_diag.size(); ++n)
    if (std::abs(std::abs(phase_diag(n)) - 1.0) > 1e-9) throw ParameterError("phase diagonal entries must be unit modulus");
  const Alphabet binary = make_switch_alphabet();
  const CMatrix b = f_bb.transpose();
  const CMatrix gram = b.adjoint() * b;
  SwitchMatrix sw(f_fd.rows(), f_bb.rows());
  for (Eigen::Index n = 0; n < f_fd.rows(); ++n) {
    const CVector target = (std::conj(phase_diag(n)) * f_fd.row(n)).transpose();
    const CVector gh_c = b.adjoint() * target;
    const SolveResult r = solve_complex(target, b, gram, gh_c, binary, solver, ep);
    for (Eigen::Index m = 0; m < sw.cols(); ++m) sw(n, m) = static_cast<int>(r.indices[static_cast<std::size_t>(m)]);
  }
  return sw;
}

void repair_switch(SwitchMatrix& sw, const CMatrix& f_fd, const CVector& phase_diag, const CMatrix& f_bb) {
  const CMatrix b = f_bb.transpose();
  auto row_cost = [&](Eigen::Index n) {
    const CVector target = (std::conj(phase_diag(n)) * f_fd.row(n)).transpose();
    return (target - b * sw.row(n).transpose().cast<cplx>()).squaredNorm();
  };
  auto column_ok = [&](Eigen::Index m) {
    if (sw.col(m).sum() == 0) return false;
    for (Eigen::Index j = 0; j < sw.cols(); ++j)
      if (j != m && sw.col(j) == sw.col(m)) return false;
    return true;
  };

  const Eigen::Index limit = sw.size() + 1;
  for (Eigen::Index step = 0; step < limit; ++step) {
    Eigen::Index bad = -1;
    for (Eigen::Index m = 0; m < sw.cols() && bad < 0; ++m) {
      if (sw.col(m).sum() == 0) bad = m;
      for (Eigen::Index j = 0; j < m && bad < 0; ++j)
        if (sw.col(m) == sw.col(j)) bad = m;
    }
    if (bad < 0) return;

    double best_increase = INFINITY;
    Eigen::Index best_n = -1;
    for (Eigen::Index n = 0; n < sw.rows(); ++n) {
      const double before = row_cost(n);
      sw(n, bad) ^= 1;
      if (column_ok(bad)) {
        const double increase = row_cost(n) - before;
        if (increase < best_increase) {
          best_increase = increase;
          best_n = n;
        }
      }
      sw(n, bad) ^= 1;
    }
    if (best_n < 0) {
      std::ostringstream msg;
      msg << "switch matrix cannot be repaired; RF chain " << bad << " duplicates another chain or is unconnected";
      throw NumericalError(msg.str());
    }
    sw(best_n, bad) ^= 1;
  }
  if (!switch_columns_valid(sw)) throw NumericalError("switch repair did not converge");
}

SwitchMatrix optimize_switch(const CMatrix& f_fd, const CVector& phase_diag, const CMatrix& f_bb, SolverKind solver,
                             const EpOptions& ep) {
  SwitchMatrix sw = solve_switch_rows(f_fd, phase_diag, f_bb, solver, ep);
  repair_switch(sw, f_fd, phase_diag, f_bb);
  return sw;
}

CVector optimize_phase_diag(const CMatrix& f_fd, const SwitchMatrix& sw, const CMatrix& f_bb, const Alphabet& alphabet) {
  if (!switch_columns_valid(sw)) throw ParameterError("switch matrix must have distinct nonzero columns");
  const CMatrix bt = f_bb.transpose() * sw.transpose().cast<cplx>();  // KS x N_T
  CVector out(f_fd.rows());
  for (Eigen::Index n = 0; n < f_fd.rows(); ++n) {
    const CVector a = f_fd.row(n).transpose();
    std::size_t best = 0;
    double best_cost = INFINITY;
    for (std::size_t l = 0; l < alphabet.size(); ++l) {
      const double cost = (a - bt.col(n) * alphabet[l]).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = l;
      }
    }
    out(n) = alphabet[best];
  }
  return out;
}

std::pair<HybridPrecoder, SolveTrace> alternate_dynamic(const CMatrix& f_fd, const SystemConfig& config,
                                                        const HybridOptions& options) {
  const auto start = Clock::now();
  check_outer_preconditions(f_fd, config);
  const Alphabet analog_alphabet = make_analog_alphabet(config.analog_bits);
  DigitalProblem dp = digital_problem(config, options);
  const double p_s = dp.p_s;
  const double feasible_ratio = 1.0 + options.bisection_tol;

  // Start from a one-chain-per-antenna pattern carrying the quantized SVD phases.
  const CMatrix init = options.initial_analog ? *options.initial_analog : init_analog_svd(f_fd, config.m_rf);
  SwitchMatrix sw = SwitchMatrix::Zero(config.n_tx, config.m_rf);
  CVector phase(config.n_tx);
  for (int n = 0; n < config.n_tx; ++n) {
    sw(n, n % config.m_rf) = 1;
    phase(n) = nearest_label(init(n, n % config.m_rf), analog_alphabet);
  }

  SolveTrace trace;
  Candidate best;
  DigitalStep last_digital;
  auto consider = [&](const CVector& ph, const SwitchMatrix& s, const DigitalStep& dig, double objective) {
    if (objective >= best.objective) return;
    const CMatrix rf = dynamic_analog(ph, s);
    if (max_power_ratio(rf, dig.f_bb, config.n_users, config.n_subcarriers, p_s) > feasible_ratio) return;
    best.objective = objective;
    best.precoder.f_rf = rf;
    best.precoder.f_bb = dig.f_bb;
    best.precoder.delta = dig.delta;
    best.precoder.switch_matrix = s;
    best.precoder.phase_diag = ph;
  };

  for (int it = 1; it <= options.outer_max_iter; ++it) {
    auto t0 = Clock::now();
    DigitalStep dig = optimize_digital(f_fd, dynamic_analog(phase, sw), dp);
    trace.digital_time_s += seconds_since(t0);
    trace.digital_stats.merge(dig.stats);
    trace.delta_shrinks += dig.delta_shrinks;
    if (options.delta_schedule == DeltaSchedule::FirstIterationOnly && dig.delta > 0.0) dp.fixed_delta = dig.delta;
    if (it > 1 && mse_to_target(f_fd, dynamic_analog(phase, sw), dig.f_bb) > trace.objective_per_outer_iter.back())
      dig = last_digital;
    trace.delta_per_outer_iter.push_back(dig.delta);
    consider(phase, sw, dig, mse_to_target(f_fd, dynamic_analog(phase, sw), dig.f_bb));

    t0 = Clock::now();
    sw = optimize_switch(f_fd, phase, dig.f_bb, options.analog_solver, options.ep);
    phase = optimize_phase_diag(f_fd, sw, dig.f_bb, analog_alphabet);
    trace.analog_time_s += seconds_since(t0);

    const double objective = mse_to_target(f_fd, dynamic_analog(phase, sw), dig.f_bb);
    trace.objective_per_outer_iter.push_back(objective);
    consider(phase, sw, dig, objective);
    last_digital = std::move(dig);

    const auto& obj = trace.objective_per_outer_iter;
    if (it > 1) {
      const double prev = obj[obj.size() - 2];
      if (std::abs(objective - prev) < options.outer_tol * std::max(prev, 1e-300)) {
        trace.converged = true;
        break;
      }
    }
  }
  trace.truncated = !trace.converged;
  trace.mu_per_subcarrier = last_digital.mu;
  trace.inner_bisection_iters = last_digital.bisection_iters;
  if (!std::isfinite(best.objective)) {
    DigitalStep dig = optimize_digital(f_fd, dynamic_analog(phase, sw), dp);
    trace.digital_stats.merge(dig.stats);
    best.precoder.f_rf = dynamic_analog(phase, sw);
    best.precoder.f_bb = dig.f_bb;
    best.precoder.delta = dig.delta;
    best.precoder.switch_matrix = sw;
    best.precoder.phase_diag = phase;
  }
  best.precoder.mode = HybridMode::DynamicConnected;
  trace.total_time_s = seconds_since(start);
  return {std::move(best.precoder), std::move(trace)};
}

}  // namespace lrhp
