#pragma once

// Finite-alphabet least-squares solvers for min_z ||c - G z||^2, z in A^M.
//
// Every solver has a complex overload (labels used as-is) and a real overload
// (the alphabet must be real; imaginary parts are ignored). Gram-form entry
// points take G^H G, G^H c and c^H c so that a factorization can be shared by
// many right-hand sides.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lrhp/alphabets.hpp"
#include "lrhp/channel.hpp"

namespace lrhp {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// min ||d - r z||^2 + constant_offset is the original objective.
template <typename Scalar>
struct TriangularSystemT {
  MatrixT<Scalar> r;  // upper triangular, positive real diagonal
  VectorT<Scalar> d;
  double constant_offset = 0.0;
  double ridge = 0.0;
};
using TriangularSystem = TriangularSystemT<cplx>;
using RealTriangularSystem = TriangularSystemT<double>;

struct SolveResult {
  CVector z;
  std::vector<std::size_t> indices;  // label index of each entry
  double objective = 0.0;
  std::int64_t nodes_visited = 0;
  int iterations = 0;
  double wall_time_s = 0.0;
  bool truncated = false;
  double ridge = 0.0;
};

struct EpOptions {
  double damping = 0.5;
  int max_iter = 30;
  double tol = 1e-4;
};

/// Parameters of the Gaussian approximation after the last iteration.
/// Means and variances are in units where the alphabet has unit RMS.
template <typename Scalar>
struct EPStateT {
  RVector lambda;
  VectorT<Scalar> gamma;
  MatrixT<Scalar> sigma;
  VectorT<Scalar> mu;
  double sigma2_hat = 1.0;
  RVector cavity_var;
  VectorT<Scalar> cavity_mean;
  VectorT<Scalar> tilted_mean;
  RVector tilted_var;
  int iteration = 0;
};

template <typename Scalar>
struct EpOutcomeT {
  SolveResult result;
  EPStateT<Scalar> state;
};

inline constexpr double kEpPrecisionFloor = 1e-8;
inline constexpr double kEpVarianceFloor = 1e-12;
inline constexpr std::uint64_t kBruteForceGuard = std::uint64_t{1} << 24;

// -- triangular preprocessing ------------------------------------------------

/// Cholesky of G^H G + ridge*I. With ridge = 0 and a numerically singular
/// Gram matrix, throws SingularGramError carrying the suggested ridge.
TriangularSystem prepare_triangular(const CMatrix& g, const CVector& c, double ridge = 0.0);
RealTriangularSystem prepare_triangular(const RMatrix& g, const RVector& c, double ridge = 0.0);

TriangularSystem prepare_triangular_from_gram(const CMatrix& gram, const CVector& gh_c, double c_norm2,
                                              double ridge = 0.0);
RealTriangularSystem prepare_triangular_from_gram(const RMatrix& gram, const RVector& gh_c, double c_norm2,
                                                  double ridge = 0.0);

/// Retries with the suggested ridge when the Gram matrix is singular.
TriangularSystem prepare_triangular_auto(const CMatrix& g, const CVector& c);
RealTriangularSystem prepare_triangular_auto(const RMatrix& g, const RVector& c);

/// 1e-10 * trace(gram) / M
double suggested_ridge(double gram_trace, Eigen::Index m);

/// [Re d; Im d] and [[Re r, -Im r], [Im r, Re r]].
std::pair<RVector, RMatrix> realify(const CVector& d, const CMatrix& r);
RVector realify(const CVector& v);
CVector complexify(const RVector& v);

// -- solvers ---------------------------------------------------------------

/// Exhaustive search; ties resolve to the lexicographically smallest index vector.
SolveResult brute_force_ml(const CVector& c, const CMatrix& g, const Alphabet& alphabet);
SolveResult brute_force_ml(const RVector& c, const RMatrix& g, const Alphabet& alphabet);

/// Schnorr-Euchner depth-first sphere decoder; exact minimizer.
SolveResult sesd_solve(const TriangularSystem& sys, const Alphabet& alphabet);
SolveResult sesd_solve(const RealTriangularSystem& sys, const Alphabet& alphabet);

/// Expectation propagation; returns the best hard decision seen during the run.
SolveResult ep_solve(const CVector& c, const CMatrix& g, const Alphabet& alphabet, const EpOptions& options = {});
SolveResult ep_solve(const RVector& c, const RMatrix& g, const Alphabet& alphabet, const EpOptions& options = {});

EpOutcomeT<cplx> ep_run(const CMatrix& gram, const CVector& gh_c, double c_norm2, const Alphabet& alphabet,
                        const EpOptions& options = {});
EpOutcomeT<double> ep_run(const RMatrix& gram, const RVector& gh_c, double c_norm2, const Alphabet& alphabet,
                          const EpOptions& options = {});

/// ||c - G z||^2 evaluated directly.
double ls_objective(const CVector& c, const CMatrix& g, const CVector& z);
double ls_objective(const RVector& c, const RMatrix& g, const CVector& z);

/// Number of nodes in the full enumeration tree: sum_{i=1..M} |A|^i.
double full_tree_size(std::size_t alphabet_size, Eigen::Index m);

}  // namespace lrhp
