#include "lrhp/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lrhp/errors.hpp"

namespace lrhp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Scalar>
Scalar label_as(cplx z) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return z.real();
  } else {
    return z;
  }
}

template <typename Scalar>
std::vector<Scalar> labels_as(const Alphabet& alphabet) {
  if constexpr (std::is_same_v<Scalar, double>) {
    if (!alphabet.is_real()) throw ParameterError("real-valued solver needs a real alphabet");
  }
  std::vector<Scalar> out;
  out.reserve(alphabet.size());
  for (const auto& z : alphabet.labels()) out.push_back(label_as<Scalar>(z));
  return out;
}

template <typename Scalar>
double abs2(Scalar v) {
  return std::norm(v);
}

template <typename Scalar>
void fill_labels(SolveResult& res, const Alphabet& alphabet) {
  res.z.resize(static_cast<Eigen::Index>(res.indices.size()));
  for (std::size_t i = 0; i < res.indices.size(); ++i) {
    const cplx label = alphabet[res.indices[i]];
    if constexpr (std::is_same_v<Scalar, double>) {
      res.z(static_cast<Eigen::Index>(i)) = cplx(label.real(), 0.0);
    } else {
      res.z(static_cast<Eigen::Index>(i)) = label;
    }
  }
}

template <typename Scalar>
VectorT<Scalar> to_scalar_vector(const CVector& z) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return z.real();
  } else {
    return z;
  }
}

template <typename Scalar>
TriangularSystemT<Scalar> from_gram(const MatrixT<Scalar>& gram, const VectorT<Scalar>& gh_c, double c_norm2,
                                    double ridge) {
  const Eigen::Index m = gram.rows();
  if (m < 1 || gram.cols() != m || gh_c.size() != m) throw ParameterError("inconsistent Gram system dimensions");
  if (ridge < 0.0) throw ParameterError("ridge must be nonnegative");
  const double trace = std::real(gram.trace());
  MatrixT<Scalar> loaded = gram;
  loaded.diagonal().array() += Scalar(ridge);

  Eigen::LLT<MatrixT<Scalar>> llt(loaded);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const VectorT<Scalar> diag = llt.matrixLLT().diagonal();
    const double floor = 1e-13 * std::max(trace / static_cast<double>(m), 0.0);
    for (Eigen::Index i = 0; i < m && ok; ++i) {
      const double v = std::real(diag(i));
      ok = std::isfinite(v) && v > 0.0 && v * v > floor;
    }
  }
  if (!ok) {
    const double next = ridge > 0.0 ? ridge * 100.0 : suggested_ridge(trace, m);
    throw SingularGramError("Gram matrix is numerically singular", next);
  }

  TriangularSystemT<Scalar> sys;
  sys.r = llt.matrixU();
  sys.d = llt.matrixL().solve(gh_c);
  sys.constant_offset = c_norm2 - sys.d.squaredNorm();
  sys.ridge = ridge;
  return sys;
}

template <typename Scalar>
TriangularSystemT<Scalar> prepare(const MatrixT<Scalar>& g, const VectorT<Scalar>& c, double ridge) {
  if (g.rows() < 1 || g.cols() < 1 || c.size() != g.rows()) throw ParameterError("inconsistent system dimensions");
  const MatrixT<Scalar> gram = g.adjoint() * g;
  const VectorT<Scalar> gh_c = g.adjoint() * c;
  return from_gram<Scalar>(gram, gh_c, c.squaredNorm(), ridge);
}

template <typename Scalar>
TriangularSystemT<Scalar> prepare_auto(const MatrixT<Scalar>& g, const VectorT<Scalar>& c) {
  double ridge = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    try {
      return prepare<Scalar>(g, c, ridge);
    } catch (const SingularGramError& e) {
      ridge = e.suggested_ridge();
    }
  }
  throw NumericalError("Gram matrix remained singular after diagonal loading");
}

template <typename Scalar>
SolveResult brute_force(const VectorT<Scalar>& c, const MatrixT<Scalar>& g, const Alphabet& alphabet) {
  const auto start = Clock::now();
  const Eigen::Index m = g.cols();
  if (c.size() != g.rows() || m < 1) throw ParameterError("inconsistent system dimensions");
  const auto labels = labels_as<Scalar>(alphabet);
  const std::size_t q = labels.size();
  double space = std::pow(static_cast<double>(q), static_cast<double>(m));
  if (space > static_cast<double>(kBruteForceGuard)) throw SearchSpaceError("exhaustive search space exceeds 2^24");

  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  VectorT<Scalar> z(m);
  SolveResult res;
  double best = INFINITY;
  std::int64_t visited = 0;
  while (true) {
    for (Eigen::Index i = 0; i < m; ++i) z(i) = labels[idx[static_cast<std::size_t>(i)]];
    const double obj = (c - g * z).squaredNorm();
    ++visited;
    if (obj < best) {
      best = obj;
      res.indices = idx;
    }
    // Odometer with the last entry fastest: lexicographic order.
    Eigen::Index pos = m - 1;
    while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == q) idx[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  res.objective = best;
  res.nodes_visited = visited;
  fill_labels<Scalar>(res, alphabet);
  res.wall_time_s = seconds_since(start);
  return res;
}

template <typename Scalar>
class SphereSearch {
 public:
  SphereSearch(const TriangularSystemT<Scalar>& sys, const std::vector<Scalar>& labels)
      : r_(sys.r), d_(sys.d), labels_(labels), m_(sys.r.rows()), current_(static_cast<std::size_t>(m_)),
        best_(static_cast<std::size_t>(m_)), z_(m_), order_(static_cast<std::size_t>(m_)),
        increments_(static_cast<std::size_t>(m_)) {
    for (auto& o : order_) o.resize(labels_.size());
    for (auto& v : increments_) v.resize(labels_.size());
  }

  // Incumbent from rounding the unconstrained solution r^{-1} d.
  void seed_incumbent() {
    const VectorT<Scalar> unconstrained = r_.template triangularView<Eigen::Upper>().solve(d_);
    double cost = 0.0;
    for (Eigen::Index i = m_ - 1; i >= 0; --i) {
      std::size_t best = 0;
      double best_dist = INFINITY;
      for (std::size_t l = 0; l < labels_.size(); ++l) {
        const double dist = abs2(unconstrained(i) - labels_[l]);
        if (dist < best_dist) {
          best_dist = dist;
          best = l;
        }
      }
      best_[static_cast<std::size_t>(i)] = best;
      z_(i) = labels_[best];
      cost += abs2(residual_at(i) - r_(i, i) * z_(i));
    }
    radius_ = std::isfinite(cost) ? cost : INFINITY;
  }

  void run() { descend(m_ - 1, 0.0); }

  const std::vector<std::size_t>& best() const { return best_; }
  std::int64_t nodes() const { return nodes_; }

 private:
  Scalar residual_at(Eigen::Index i) const {
    Scalar acc = d_(i);
    for (Eigen::Index j = i + 1; j < m_; ++j) acc -= r_(i, j) * z_(j);
    return acc;
  }

  void descend(Eigen::Index level, double cost) {
    const Scalar acc = residual_at(level);
    const Scalar diag = r_(level, level);
    auto& order = order_[static_cast<std::size_t>(level)];
    auto& inc = increments_[static_cast<std::size_t>(level)];
    for (std::size_t l = 0; l < labels_.size(); ++l) inc[l] = abs2(acc - diag * labels_[l]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return inc[a] < inc[b]; });

    for (std::size_t l : order) {
      const double total = cost + inc[l];
      if (!(total < radius_)) break;
      ++nodes_;
      current_[static_cast<std::size_t>(level)] = l;
      z_(level) = labels_[l];
      if (level == 0) {
        radius_ = total;
        best_ = current_;
      } else {
        descend(level - 1, total);
      }
    }
  }

  const MatrixT<Scalar>& r_;
  const VectorT<Scalar>& d_;
  const std::vector<Scalar>& labels_;
  Eigen::Index m_;
  std::vector<std::size_t> current_, best_;
  VectorT<Scalar> z_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::vector<double>> increments_;
  double radius_ = INFINITY;
  std::int64_t nodes_ = 0;
};

template <typename Scalar>
SolveResult sphere_decode(const TriangularSystemT<Scalar>& sys, const Alphabet& alphabet) {
  const auto start = Clock::now();
  if (sys.r.rows() < 1 || sys.r.cols() != sys.r.rows() || sys.d.size() != sys.r.rows())
    throw ParameterError("invalid triangular system");
  if (alphabet.size() == 0) throw ParameterError("empty alphabet");
  const auto labels = labels_as<Scalar>(alphabet);
  SphereSearch<Scalar> search(sys, labels);
  search.seed_incumbent();
  search.run();

  SolveResult res;
  res.indices = search.best();
  res.nodes_visited = search.nodes();
  fill_labels<Scalar>(res, alphabet);
  const VectorT<Scalar> z = to_scalar_vector<Scalar>(res.z);
  res.objective = (sys.d - sys.r * z).squaredNorm() + sys.constant_offset - sys.ridge * z.squaredNorm();
  res.ridge = sys.ridge;
  res.wall_time_s = seconds_since(start);
  return res;
}

template <typename Scalar>
double gram_objective(const MatrixT<Scalar>& gram, const VectorT<Scalar>& gh_c, double c_norm2,
                      const VectorT<Scalar>& z) {
  const double quad = std::real(z.dot(gram * z));
  const double cross = std::real(z.dot(gh_c));
  return std::max(c_norm2 - 2.0 * cross + quad, 0.0);
}

template <typename Scalar>
EpOutcomeT<Scalar> expectation_propagation(const MatrixT<Scalar>& gram_in, const VectorT<Scalar>& gh_c_in,
                                           double c_norm2, const Alphabet& alphabet, const EpOptions& opt) {
  const auto start = Clock::now();
  const Eigen::Index m = gram_in.rows();
  if (m < 1 || gram_in.cols() != m || gh_c_in.size() != m) throw ParameterError("inconsistent EP system dimensions");
  if (!(opt.damping >= 0.0 && opt.damping <= 1.0)) throw ParameterError("EP damping must lie in [0, 1]");
  if (opt.max_iter < 1) throw ParameterError("EP needs at least one iteration");
  if (alphabet.size() == 0) throw ParameterError("empty alphabet");

  // Work in units where the alphabet has unit RMS: z = scale * z'.
  const double scale = alphabet.rms() > 0.0 ? alphabet.rms() : 1.0;
  const auto raw_labels = labels_as<Scalar>(alphabet);
  std::vector<Scalar> labels(raw_labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = raw_labels[i] / scale;
  const MatrixT<Scalar> gram = gram_in * (scale * scale);
  const VectorT<Scalar> gh_c = gh_c_in * scale;

  // Real model: density exp(-(z-v)^2 / (2 var)); complex: exp(-|z-v|^2 / var).
  constexpr double kShape = std::is_same_v<Scalar, double> ? 2.0 : 1.0;
  const double sigma2_floor = kEpVarianceFloor * std::max(c_norm2 / static_cast<double>(m), 1e-300);

  EpOutcomeT<Scalar> out;
  auto& st = out.state;
  st.lambda = RVector::Ones(m);
  st.gamma = VectorT<Scalar>::Zero(m);
  st.sigma2_hat = 1.0;
  st.cavity_var = RVector::Zero(m);
  st.cavity_mean = VectorT<Scalar>::Zero(m);
  st.tilted_mean = VectorT<Scalar>::Zero(m);
  st.tilted_var = RVector::Zero(m);

  auto update_moments = [&](int iteration) {
    MatrixT<Scalar> precision = gram / st.sigma2_hat;
    for (Eigen::Index i = 0; i < m; ++i) precision(i, i) += st.lambda(i);
    Eigen::LLT<MatrixT<Scalar>> llt(precision);
    if (llt.info() != Eigen::Success) throw NumericalError("EP precision matrix lost definiteness", iteration);
    st.sigma = llt.solve(MatrixT<Scalar>::Identity(m, m));
    st.mu = st.sigma * (gh_c / st.sigma2_hat + st.gamma);
    if (!st.sigma.allFinite() || !st.mu.allFinite())
      throw NumericalError("non-finite EP posterior moments", iteration);
  };

  SolveResult& best = out.result;
  best.objective = INFINITY;
  best.indices.assign(static_cast<std::size_t>(m), 0);
  std::vector<std::size_t> decision(static_cast<std::size_t>(m));
  VectorT<Scalar> z(m);
  auto consider = [&]() {
    for (Eigen::Index i = 0; i < m; ++i) {
      std::size_t arg = 0;
      double d = INFINITY;
      for (std::size_t l = 0; l < labels.size(); ++l) {
        const double dist = abs2(st.mu(i) - labels[l]);
        if (dist < d) {
          d = dist;
          arg = l;
        }
      }
      decision[static_cast<std::size_t>(i)] = arg;
      z(i) = labels[arg];
    }
    const double obj = gram_objective<Scalar>(gram, gh_c, c_norm2, z);
    if (obj < best.objective) {
      best.objective = obj;
      best.indices = decision;
    }
  };

  update_moments(0);
  consider();

  std::vector<double> logp(labels.size());
  bool converged = false;
  int t = 0;
  for (t = 1; t <= opt.max_iter; ++t) {
    const VectorT<Scalar> mu_prev = st.mu;
    const RVector var_prev = st.sigma.diagonal().real();
    VectorT<Scalar> rho = st.mu;

    for (Eigen::Index i = 0; i < m; ++i) {
      const double sii = std::real(st.sigma(i, i));
      const double zeta = sii / (1.0 - sii * st.lambda(i));
      if (!(zeta > 0.0) || !std::isfinite(zeta)) continue;  // cavity undefined; keep this factor
      const Scalar nu = zeta * (st.mu(i) / sii - st.gamma(i));
      st.cavity_var(i) = zeta;
      st.cavity_mean(i) = nu;

      double peak = -INFINITY;
      for (std::size_t l = 0; l < labels.size(); ++l) {
        logp[l] = -abs2(labels[l] - nu) / (kShape * zeta);
        peak = std::max(peak, logp[l]);
      }
      double total = 0.0;
      for (auto& v : logp) total += (v = std::exp(v - peak));
      Scalar mean = Scalar(0);
      for (std::size_t l = 0; l < labels.size(); ++l) mean += (logp[l] / total) * labels[l];
      double var = 0.0;
      for (std::size_t l = 0; l < labels.size(); ++l) var += (logp[l] / total) * abs2(labels[l] - mean);
      var = std::max(var, kEpVarianceFloor);
      st.tilted_mean(i) = mean;
      st.tilted_var(i) = var;
      rho(i) = mean;

      double lambda_new = 1.0 / var - 1.0 / zeta;
      Scalar gamma_new = mean / var - nu / zeta;
      if (!(lambda_new > 0.0)) {
        lambda_new = kEpPrecisionFloor;
        gamma_new = st.gamma(i);
      }
      st.lambda(i) = (1.0 - opt.damping) * lambda_new + opt.damping * st.lambda(i);
      st.gamma(i) = (1.0 - opt.damping) * gamma_new + opt.damping * st.gamma(i);
    }

    st.sigma2_hat = std::max(gram_objective<Scalar>(gram, gh_c, c_norm2, rho) / static_cast<double>(m), sigma2_floor);
    if (!std::isfinite(st.sigma2_hat)) throw NumericalError("non-finite EP error variance", t);
    update_moments(t);
    st.iteration = t;
    consider();

    const double mu_change = (st.mu - mu_prev).norm() / std::max(mu_prev.norm(), 1e-300);
    const RVector var_now = st.sigma.diagonal().real();
    const double var_change = (var_now - var_prev).norm() / std::max(var_prev.norm(), 1e-300);
    if (mu_change < opt.tol && var_change < opt.tol) {
      converged = true;
      break;
    }
  }

  best.iterations = std::min(t, opt.max_iter);
  best.truncated = !converged;
  fill_labels<Scalar>(best, alphabet);
  {
    const VectorT<Scalar> zl = to_scalar_vector<Scalar>(best.z);
    best.objective = gram_objective<Scalar>(gram_in, gh_c_in, c_norm2, zl);
  }
  best.wall_time_s = seconds_since(start);
  return out;
}

template <typename Scalar>
SolveResult ep_direct(const VectorT<Scalar>& c, const MatrixT<Scalar>& g, const Alphabet& alphabet,
                      const EpOptions& options) {
  if (c.size() != g.rows() || g.cols() < 1) throw ParameterError("inconsistent system dimensions");
  const MatrixT<Scalar> gram = g.adjoint() * g;
  const VectorT<Scalar> gh_c = g.adjoint() * c;
  auto out = expectation_propagation<Scalar>(gram, gh_c, c.squaredNorm(), alphabet, options);
  out.result.objective = (c - g * to_scalar_vector<Scalar>(out.result.z)).squaredNorm();
  return out.result;
}

}  // namespace

double suggested_ridge(double gram_trace, Eigen::Index m) {
  const double r = 1e-10 * gram_trace / static_cast<double>(std::max<Eigen::Index>(m, 1));
  return r > 0.0 && std::isfinite(r) ? r : 1e-10;
}

TriangularSystem prepare_triangular(const CMatrix& g, const CVector& c, double ridge) {
  return prepare<cplx>(g, c, ridge);
}
RealTriangularSystem prepare_triangular(const RMatrix& g, const RVector& c, double ridge) {
  return prepare<double>(g, c, ridge);
}
TriangularSystem prepare_triangular_from_gram(const CMatrix& gram, const CVector& gh_c, double c_norm2, double ridge) {
  return from_gram<cplx>(gram, gh_c, c_norm2, ridge);
}
RealTriangularSystem prepare_triangular_from_gram(const RMatrix& gram, const RVector& gh_c, double c_norm2,
                                                  double ridge) {
  return from_gram<double>(gram, gh_c, c_norm2, ridge);
}
TriangularSystem prepare_triangular_auto(const CMatrix& g, const CVector& c) { return prepare_auto<cplx>(g, c); }
RealTriangularSystem prepare_triangular_auto(const RMatrix& g, const RVector& c) { return prepare_auto<double>(g, c); }

std::pair<RVector, RMatrix> realify(const CVector& d, const CMatrix& r) {
  if (r.cols() != d.size() && r.rows() != d.size()) throw ParameterError("inconsistent dimensions in realify");
  const Eigen::Index n = r.rows(), m = r.cols();
  RMatrix big(2 * n, 2 * m);
  big.topLeftCorner(n, m) = r.real();
  big.topRightCorner(n, m) = -r.imag();
  big.bottomLeftCorner(n, m) = r.imag();
  big.bottomRightCorner(n, m) = r.real();
  return {realify(d), std::move(big)};
}

RVector realify(const CVector& v) {
  RVector out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

CVector complexify(const RVector& v) {
  if (v.size() % 2 != 0) throw ParameterError("complexify needs an even-length vector");
  const Eigen::Index m = v.size() / 2;
  CVector out(m);
  for (Eigen::Index i = 0; i < m; ++i) out(i) = cplx(v(i), v(i + m));
  return out;
}

SolveResult brute_force_ml(const CVector& c, const CMatrix& g, const Alphabet& alphabet) {
  return brute_force<cplx>(c, g, alphabet);
}
SolveResult brute_force_ml(const RVector& c, const RMatrix& g, const Alphabet& alphabet) {
  return brute_force<double>(c, g, alphabet);
}

SolveResult sesd_solve(const TriangularSystem& sys, const Alphabet& alphabet) {
  return sphere_decode<cplx>(sys, alphabet);
}
SolveResult sesd_solve(const RealTriangularSystem& sys, const Alphabet& alphabet) {
  return sphere_decode<double>(sys, alphabet);
}

SolveResult ep_solve(const CVector& c, const CMatrix& g, const Alphabet& alphabet, const EpOptions& options) {
  return ep_direct<cplx>(c, g, alphabet, options);
}
SolveResult ep_solve(const RVector& c, const RMatrix& g, const Alphabet& alphabet, const EpOptions& options) {
  return ep_direct<double>(c, g, alphabet, options);
}

EpOutcomeT<cplx> ep_run(const CMatrix& gram, const CVector& gh_c, double c_norm2, const Alphabet& alphabet,
                        const EpOptions& options) {
  return expectation_propagation<cplx>(gram, gh_c, c_norm2, alphabet, options);
}
EpOutcomeT<double> ep_run(const RMatrix& gram, const RVector& gh_c, double c_norm2, const Alphabet& alphabet,
                          const EpOptions& options) {
  return expectation_propagation<double>(gram, gh_c, c_norm2, alphabet, options);
}

double ls_objective(const CVector& c, const CMatrix& g, const CVector& z) { return (c - g * z).squaredNorm(); }
double ls_objective(const RVector& c, const RMatrix& g, const CVector& z) {
  return (c - g * z.real()).squaredNorm();
}

double full_tree_size(std::size_t alphabet_size, Eigen::Index m) {
  double total = 0.0, level = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) total += (level *= static_cast<double>(alphabet_size));
  return total;
}

}  // namespace lrhp
