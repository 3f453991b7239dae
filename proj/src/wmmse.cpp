#include "lrhp/wmmse.hpp"

#include <algorithm>
#include <cmath>

#include "lrhp/errors.hpp"

namespace lrhp {

double sinr(const ChannelSet& h, const CMatrix& f, int k, int s, double n0) {
  const auto g = h.column(k, s);
  double signal = 0.0, interference = 0.0;
  for (int i = 0; i < h.n_users; ++i) {
    const cplx y = g.transpose() * f.col(static_cast<Eigen::Index>(i) * h.n_subcarriers + s);
    (i == k ? signal : interference) += std::norm(y);
  }
  return signal / (interference + n0);
}

RateReport sum_rate(const ChannelSet& h, const CMatrix& f, double n0) {
  if (f.rows() != h.h.rows() || f.cols() != h.h.cols()) throw ParameterError("precoder/channel dimension mismatch");
  RateReport r;
  r.per_user_per_subcarrier.resize(h.n_users, h.n_subcarriers);
  for (int k = 0; k < h.n_users; ++k)
    for (int s = 0; s < h.n_subcarriers; ++s)
      r.per_user_per_subcarrier(k, s) = std::log2(1.0 + sinr(h, f, k, s, n0));
  r.total_sum_rate = r.per_user_per_subcarrier.sum();
  r.sum_rate_per_subcarrier_avg = r.total_sum_rate / h.n_subcarriers;
  return r;
}

double mse_to_target(const CMatrix& f_fd, const CMatrix& f_rf, const CMatrix& f_bb) {
  if (f_rf.cols() != f_bb.rows() || f_rf.rows() != f_fd.rows() || f_bb.cols() != f_fd.cols())
    throw ParameterError("dimension mismatch in factorization error");
  return (f_fd - f_rf * f_bb).squaredNorm();
}

double subcarrier_power(const CMatrix& f, int n_users, int n_subcarriers, int s) {
  double p = 0.0;
  for (int k = 0; k < n_users; ++k) p += f.col(static_cast<Eigen::Index>(k) * n_subcarriers + s).squaredNorm();
  return p;
}

CMatrix matched_filter_precoder(const ChannelSet& h, double p_s) {
  CMatrix f = CMatrix::Zero(h.h.rows(), h.h.cols());
  for (int s = 0; s < h.n_subcarriers; ++s) {
    int active = 0;
    for (int k = 0; k < h.n_users; ++k) active += h.column(k, s).squaredNorm() > 0.0;
    if (active == 0) continue;
    const double per_user = p_s / active;
    for (int k = 0; k < h.n_users; ++k) {
      const auto g = h.column(k, s);
      const double norm = g.norm();
      if (norm > 0.0) f.col(static_cast<Eigen::Index>(k) * h.n_subcarriers + s) = g.conjugate() * (std::sqrt(per_user) / norm);
    }
  }
  return f;
}

namespace {

double rate_of(const CMatrix& g, const CMatrix& f, double n0) {
  const CMatrix t = g.transpose() * f;
  double rate = 0.0;
  for (Eigen::Index k = 0; k < t.rows(); ++k) {
    const double total = t.row(k).squaredNorm();
    const double signal = std::norm(t(k, k));
    rate += std::log2(1.0 + signal / (total - signal + n0));
  }
  return rate;
}

// Solves min_F sum_k w_k E|u_k y_k - x_k|^2 s.t. ||F||^2 <= p via the
// eigendecomposition of the weighted covariance and a bisected multiplier.
CMatrix precoder_step(const CMatrix& g, const RVector& w, const CVector& u, double p) {
  const Eigen::Index n = g.rows(), k_users = g.cols();
  CMatrix a = CMatrix::Zero(n, n);
  CMatrix b(n, k_users);
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const CVector gc = g.col(k).conjugate();
    a += (w(k) * std::norm(u(k))) * gc * gc.adjoint();
    b.col(k) = (w(k) * std::conj(u(k))) * gc;
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(a);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in WMMSE precoder step");
  const RVector& d = eig.eigenvalues();
  const CMatrix c = eig.eigenvectors().adjoint() * b;
  const double threshold = 1e-12 * std::max(d.maxCoeff(), 0.0);
  RVector coef_energy(n);
  for (Eigen::Index j = 0; j < n; ++j) coef_energy(j) = d(j) > threshold ? c.row(j).squaredNorm() : 0.0;

  auto power = [&](double mu) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (coef_energy(j) > 0.0) total += coef_energy(j) / ((d(j) + mu) * (d(j) + mu));
    return total;
  };

  double mu = 0.0;
  if (power(0.0) > p) {
    double lo = 0.0, hi = std::sqrt(coef_energy.sum() / p);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (power(mid) > p ? lo : hi) = mid;
    }
    mu = hi;
  }
  CMatrix scaled = CMatrix::Zero(n, k_users);
  for (Eigen::Index j = 0; j < n; ++j)
    if (coef_energy(j) > 0.0) scaled.row(j) = c.row(j) / (d(j) + mu);
  return eig.eigenvectors() * scaled;
}

}  // namespace

std::pair<FullyDigitalPrecoder, WmmseTrace> wmmse_fully_digital(const ChannelSet& h, double p_s, double n0,
                                                                const WmmseOptions& options) {
  if (!(p_s > 0.0)) throw ParameterError("per-sub-carrier power must be positive");
  if (!(n0 > 0.0)) throw ParameterError("noise power must be positive");
  const int n_users = h.n_users, n_sc = h.n_subcarriers;
  const Eigen::Index nt = h.h.rows();

  FullyDigitalPrecoder out;
  out.n_users = n_users;
  out.n_subcarriers = n_sc;
  out.f = matched_filter_precoder(h, p_s);

  WmmseTrace trace;
  trace.iterations_per_subcarrier.assign(n_sc, 0);
  std::vector<std::vector<double>> rates(n_sc);

  for (int s = 0; s < n_sc; ++s) {
    CMatrix g(nt, n_users), f(nt, n_users);
    for (int k = 0; k < n_users; ++k) {
      g.col(k) = h.column(k, s);
      f.col(k) = out.column(k, s);
    }
    double rate = rate_of(g, f, n0);
    rates[s].push_back(rate);
    CMatrix best = f;
    double best_rate = rate;
    bool converged = false;

    for (int it = 0; it < options.max_iter; ++it) {
      const CMatrix t = g.transpose() * f;
      RVector w(n_users);
      CVector u(n_users);
      for (int k = 0; k < n_users; ++k) {
        const double denom = t.row(k).squaredNorm() + n0;
        u(k) = std::conj(t(k, k)) / denom;
        w(k) = 1.0 / (1.0 - std::norm(t(k, k)) / denom);
      }
      f = precoder_step(g, w, u, p_s);
      const double next = rate_of(g, f, n0);
      if (!std::isfinite(next)) throw NumericalError("non-finite rate in WMMSE", it);
      rates[s].push_back(next);
      ++trace.iterations_per_subcarrier[s];
      if (next >= best_rate) {
        best_rate = next;
        best = f;
      }
      const bool small_change = std::abs(next - rate) <= options.tol * std::max(std::abs(rate), 1e-300);
      rate = next;
      if (small_change) {
        converged = true;
        break;
      }
    }
    if (!converged) trace.truncated = true;
    for (int k = 0; k < n_users; ++k) out.f.col(static_cast<Eigen::Index>(k) * n_sc + s) = best.col(k);
  }

  std::size_t longest = 0;
  for (const auto& r : rates) longest = std::max(longest, r.size());
  trace.utility.assign(longest, 0.0);
  for (const auto& r : rates)
    for (std::size_t t = 0; t < longest; ++t) trace.utility[t] += r[std::min(t, r.size() - 1)];
  return {std::move(out), std::move(trace)};
}

}  // namespace lrhp
