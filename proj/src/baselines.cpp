#include "lrhp/baselines.hpp"

#include <cmath>

#include "lrhp/detect.hpp"
#include "lrhp/errors.hpp"
#include "lrhp/wmmse.hpp"

namespace lrhp {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Altmin1: return "altmin1";
    case BaselineKind::Altmin1Quantized: return "altmin1_quantized";
    case BaselineKind::Altmin2: return "altmin2";
    case BaselineKind::Altmin2Quantized: return "altmin2_quantized";
    case BaselineKind::FullyDigital: return "fully_digital";
  }
  return "unknown";
}

namespace {

void check_baseline_inputs(const CMatrix& f_fd, const SystemConfig& config) {
  config.validate();
  if (config.m_rf > config.n_users * config.n_subcarriers) throw ParameterError("AltMin needs M_T <= K*S");
  if (f_fd.rows() != config.n_tx || f_fd.cols() != static_cast<Eigen::Index>(config.n_users) * config.n_subcarriers)
    throw ParameterError("fully-digital target does not match the configuration");
}

// min_X ||F - X B||^2 without constraints: X = F B^H (B B^H)^{-1}.
CMatrix analog_least_squares(const CMatrix& f_fd, const CMatrix& f_bb) {
  const CMatrix gram = f_bb * f_bb.adjoint();
  const CMatrix rhs = f_bb * f_fd.adjoint();
  double ridge = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    CMatrix loaded = gram;
    loaded.diagonal().array() += ridge;
    Eigen::LLT<CMatrix> llt(loaded);
    if (llt.info() == Eigen::Success) {
      const CMatrix xh = llt.solve(rhs);
      if (xh.allFinite()) return xh.adjoint();
    }
    ridge = ridge > 0.0 ? ridge * 100.0 : suggested_ridge(std::real(gram.trace()), gram.rows());
  }
  throw NumericalError("least-squares analog step failed");
}

CMatrix phase_of(const CMatrix& x) {
  CMatrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = std::abs(x(i)) > 0.0 ? x(i) / std::abs(x(i)) : cplx(1.0, 0.0);
  return out;
}

double objective(const CMatrix& f_fd, const CMatrix& x, const CMatrix& b) { return (f_fd - x * b).squaredNorm(); }

bool small_relative_change(double prev, double next, double tol) {
  return std::abs(next - prev) < tol * std::max(prev, 1e-300);
}

// Armijo-backtracked Riemannian descent from x; returns false if the line
// search never produced sufficient decrease.
bool manifold_descent(const CMatrix& f_fd, CMatrix& x, const CMatrix& b, int max_steps) {
  double f = objective(f_fd, x, b);
  double step = 1.0 / std::max(2.0 * b.squaredNorm(), 1e-300);
  for (int it = 0; it < max_steps; ++it) {
    const CMatrix g = riemannian_gradient(f_fd, x, b);
    const double g2 = g.squaredNorm();
    if (g2 <= 1e-24 * std::max(f, 1e-300) || g2 == 0.0) return true;
    step *= 4.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const CMatrix trial = retract_unit_modulus(x - step * g);
      const double ft = objective(f_fd, trial, b);
      if (ft <= f - 1e-4 * step * g2) {
        const double decrease = f - ft;
        x = trial;
        f = ft;
        accepted = true;
        if (decrease <= 1e-12 * std::max(f, 1e-300)) return true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return it > 0;
  }
  return true;
}

template <typename AnalogStep>
ContinuousHybrid run_altmin(const CMatrix& f_fd, const SystemConfig& config, AnalogStep&& analog_step) {
  check_baseline_inputs(f_fd, config);
  ContinuousHybrid out;
  CMatrix x = init_analog_svd(f_fd, config.m_rf);
  CMatrix best_x = x;
  double best = objective(f_fd, x, digital_least_squares(f_fd, x));
  out.trace.objective_per_outer_iter.push_back(best);

  for (int it = 0; it < config.outer_max_iter; ++it) {
    const CMatrix b = digital_least_squares(f_fd, x);
    if (!analog_step(x, b)) ++out.trace.line_search_failures;
    const double obj = objective(f_fd, x, b);
    const double prev = out.trace.objective_per_outer_iter.back();
    out.trace.objective_per_outer_iter.push_back(obj);
    if (obj < best) {
      best = obj;
      best_x = x;
    }
    if (small_relative_change(prev, obj, config.outer_tol)) {
      out.trace.converged = true;
      break;
    }
  }
  out.f_rf = best_x;
  out.f_bb = digital_least_squares(f_fd, best_x);
  rescale_to_budget(out.f_rf, out.f_bb, config.n_users, config.n_subcarriers, config.subcarrier_power_w());
  return out;
}

}  // namespace

CMatrix riemannian_gradient(const CMatrix& f_fd, const CMatrix& x, const CMatrix& f_bb) {
  const CMatrix euclid = -2.0 * (f_fd - x * f_bb) * f_bb.adjoint();
  CMatrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) g(i) = euclid(i) - std::real(euclid(i) * std::conj(x(i))) * x(i);
  return g;
}

CMatrix retract_unit_modulus(const CMatrix& x) { return phase_of(x); }

void rescale_to_budget(const CMatrix& f_rf, CMatrix& f_bb, int n_users, int n_subcarriers, double p_s) {
  for (int s = 0; s < n_subcarriers; ++s) {
    double p = 0.0;
    for (int k = 0; k < n_users; ++k) p += (f_rf * f_bb.col(static_cast<Eigen::Index>(k) * n_subcarriers + s)).squaredNorm();
    if (p > p_s) {
      const double scale = std::sqrt(p_s / p);
      for (int k = 0; k < n_users; ++k) f_bb.col(static_cast<Eigen::Index>(k) * n_subcarriers + s) *= scale;
    }
  }
}

ContinuousHybrid altmin2(const CMatrix& f_fd, const SystemConfig& config) {
  return run_altmin(f_fd, config, [&](CMatrix& x, const CMatrix& b) {
    x = phase_of(analog_least_squares(f_fd, b));
    return true;
  });
}

ContinuousHybrid altmin1(const CMatrix& f_fd, const SystemConfig& config) {
  return run_altmin(f_fd, config, [&](CMatrix& x, const CMatrix& b) { return manifold_descent(f_fd, x, b, 100); });
}

HybridPrecoder quantize_baseline(const CMatrix& f_rf, const CMatrix& f_bb, const Alphabet& analog_alphabet, int levels,
                                 const DeltaRule& rule, int n_users, int n_subcarriers, double p_s) {
  if (!f_rf.allFinite() || !f_bb.allFinite()) throw ParameterError("baseline precoder has non-finite entries");
  HybridPrecoder out;
  out.f_rf.resize(f_rf.rows(), f_rf.cols());
  for (Eigen::Index i = 0; i < f_rf.size(); ++i) out.f_rf(i) = nearest_label(f_rf(i), analog_alphabet);

  if (levels == 0) {
    out.f_bb = f_bb;
    rescale_to_budget(out.f_rf, out.f_bb, n_users, n_subcarriers, p_s);
    return out;
  }

  double delta = choose_delta(std::span<const cplx>(f_bb.data(), static_cast<std::size_t>(f_bb.size())), levels, rule);
  const double limit = p_s * (1.0 + 1e-9);
  for (int shrink = 0; shrink <= 60; ++shrink, delta *= 0.5) {
    const Alphabet axis = make_digital_alphabet(levels, delta, false);
    out.f_bb.resize(f_bb.rows(), f_bb.cols());
    for (Eigen::Index i = 0; i < f_bb.size(); ++i)
      out.f_bb(i) = cplx(std::real(nearest_label(cplx(f_bb(i).real(), 0.0), axis)),
                         std::real(nearest_label(cplx(f_bb(i).imag(), 0.0), axis)));
    out.delta = delta;
    if (max_power_ratio(out.f_rf, out.f_bb, n_users, n_subcarriers, p_s) * p_s <= limit) return out;
  }
  return out;
}

HybridPrecoder np_analog_finite_digital(const CMatrix& f_fd, const SystemConfig& config, const HybridOptions& options) {
  const ContinuousHybrid cont = altmin2(f_fd, config);
  const Alphabet analog_alphabet = make_analog_alphabet(config.analog_bits);
  HybridPrecoder out;
  out.f_rf.resize(cont.f_rf.rows(), cont.f_rf.cols());
  for (Eigen::Index i = 0; i < cont.f_rf.size(); ++i) out.f_rf(i) = nearest_label(cont.f_rf(i), analog_alphabet);

  DigitalProblem dp;
  dp.n_users = config.n_users;
  dp.n_subcarriers = config.n_subcarriers;
  dp.p_s = config.subcarrier_power_w();
  dp.levels = config.quant_levels;
  dp.delta_rule = options.delta_rule;
  dp.bisection_tol = options.bisection_tol;
  dp.solver = options.digital_solver;
  dp.ep = options.ep;
  DigitalStep dig = optimize_digital(f_fd, out.f_rf, dp);
  out.f_bb = std::move(dig.f_bb);
  out.delta = dig.delta;
  return out;
}

HybridPrecoder finite_analog_np_digital(const CMatrix& f_fd, const SystemConfig& config, const HybridOptions& options) {
  check_baseline_inputs(f_fd, config);
  const Alphabet analog_alphabet = make_analog_alphabet(config.analog_bits);
  CMatrix x = init_analog_svd(f_fd, config.m_rf);
  CMatrix best_x;
  double best = INFINITY, prev = INFINITY;
  for (int it = 0; it < options.outer_max_iter; ++it) {
    const CMatrix b = digital_least_squares(f_fd, x);
    x = optimize_analog(f_fd, b, options.analog_solver, analog_alphabet, options.ep).f_rf;
    const double obj = objective(f_fd, x, b);
    if (obj < best) {
      best = obj;
      best_x = x;
    }
    if (it > 0 && small_relative_change(prev, obj, options.outer_tol)) break;
    prev = obj;
  }
  const CMatrix b = digital_least_squares(f_fd, best_x);
  return quantize_baseline(best_x, b, analog_alphabet, config.quant_levels, options.delta_rule, config.n_users,
                           config.n_subcarriers, config.subcarrier_power_w());
}

}  // namespace lrhp
