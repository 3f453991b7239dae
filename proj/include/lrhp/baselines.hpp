#pragma once

// Reference hybrid precoders: continuous alternating minimization (AltMin 1
// with a manifold analog step, AltMin 2 with phase projection) and their
// nearest-point-quantized counterparts.

#include <string>
#include <vector>

#include "lrhp/alphabets.hpp"
#include "lrhp/channel.hpp"
#include "lrhp/hybrid.hpp"

namespace lrhp {

enum class BaselineKind { Altmin1, Altmin1Quantized, Altmin2, Altmin2Quantized, FullyDigital };

std::string to_string(BaselineKind kind);

struct BaselineTrace {
  std::vector<double> objective_per_outer_iter;  // before the final power rescale
  int line_search_failures = 0;
  bool converged = false;
};

struct ContinuousHybrid {
  CMatrix f_rf;
  CMatrix f_bb;
  BaselineTrace trace;
};

/// Least-squares digital step, phase-projected least-squares analog step.
ContinuousHybrid altmin2(const CMatrix& f_fd, const SystemConfig& config);

/// Least-squares digital step, Riemannian gradient descent analog step.
ContinuousHybrid altmin1(const CMatrix& f_fd, const SystemConfig& config);

/// Riemannian gradient of ||F_FD - X F_BB||_F^2 on the product of unit circles
/// (Euclidean gradient -2 (F_FD - X B) B^H with its radial part removed).
CMatrix riemannian_gradient(const CMatrix& f_fd, const CMatrix& x, const CMatrix& f_bb);

/// Entry-wise renormalization to unit modulus.
CMatrix retract_unit_modulus(const CMatrix& x);

/// Scales each sub-carrier's digital columns so that ||F_RF F_BB[s]||^2 <= p_s.
void rescale_to_budget(const CMatrix& f_rf, CMatrix& f_bb, int n_users, int n_subcarriers, double p_s);

/// Nearest-point quantization of a continuous design. With levels == 0 the
/// digital part is left unquantized (power rescale only).
HybridPrecoder quantize_baseline(const CMatrix& f_rf, const CMatrix& f_bb, const Alphabet& analog_alphabet, int levels,
                                 const DeltaRule& rule, int n_users, int n_subcarriers, double p_s);

/// AltMin 2, nearest-point analog, then the finite-alphabet digital step.
HybridPrecoder np_analog_finite_digital(const CMatrix& f_fd, const SystemConfig& config, const HybridOptions& options);

/// Alternation of least-squares digital and finite-alphabet analog steps,
/// followed by nearest-point quantization of the digital part.
HybridPrecoder finite_analog_np_digital(const CMatrix& f_fd, const SystemConfig& config, const HybridOptions& options);

}  // namespace lrhp
