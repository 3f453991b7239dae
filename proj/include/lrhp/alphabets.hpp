#pragma once

// Discrete label sets for phase shifters, quantized digital precoder entries
// and switch states.

#include <complex>
#include <map>
#include <span>
#include <vector>

namespace lrhp {

using cplx = std::complex<double>;

enum class AlphabetKind { AnalogPhase, DigitalComplex, DigitalReal, Binary };

class Alphabet {
 public:
  AlphabetKind kind() const noexcept { return kind_; }
  std::span<const cplx> labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  const cplx& operator[](std::size_t i) const { return labels_[i]; }

  int resolution_bits() const noexcept { return bits_; }
  int levels_per_dim() const noexcept { return levels_; }
  /// Quantization step; 0 for analog and binary alphabets.
  double step() const noexcept { return step_; }

  /// True when every label has zero imaginary part.
  bool is_real() const noexcept;

  /// Real labels of a DigitalComplex alphabet (its per-dimension set);
  /// the alphabet itself for the other kinds.
  Alphabet real_component() const;

  bool contains(cplx value) const noexcept;

  /// Root-mean-square label magnitude.
  double rms() const noexcept;

  friend Alphabet make_analog_alphabet(int bits);
  friend Alphabet make_digital_alphabet(int levels, double delta, bool complex_labels);
  friend Alphabet make_switch_alphabet();

 private:
  Alphabet(AlphabetKind kind, std::vector<cplx> labels, int bits, int levels, double step)
      : kind_(kind), labels_(std::move(labels)), bits_(bits), levels_(levels), step_(step) {}

  AlphabetKind kind_;
  std::vector<cplx> labels_;
  int bits_ = 0;
  int levels_ = 0;
  double step_ = 0.0;
};

/// 2^bits unit-modulus phases e^{j l pi / 2^(bits-1)}, l = 0..2^bits-1.
Alphabet make_analog_alphabet(int bits);

/// Uniform labels delta*(i - (L-1)/2). With complex_labels the result is the
/// Cartesian square p_R + j p_I, ordered with the real part varying fastest.
Alphabet make_digital_alphabet(int levels, double delta, bool complex_labels = true);

/// {0, 1}, used for RF-chain to antenna switch states.
Alphabet make_switch_alphabet();

struct DeltaRule {
  enum class Method { Fixed, GaussianFit };
  Method method = Method::GaussianFit;
  double fixed_value = 1.0;
  /// Overrides for c(L); levels not listed fall back to gaussian_step_coefficient.
  std::map<int, double> gaussian_coefficients;

  static DeltaRule fixed(double value);
  static DeltaRule gaussian_fit();
};

/// Step of the L-level uniform midrise quantizer minimizing E[(q(x)-x)^2]
/// for x ~ N(0,1). Computed once per L and cached.
double gaussian_step_coefficient(int levels);

/// Step for quantizing `reference_entries` with `levels` labels per real
/// dimension. Under gaussian-fit this is c(L) times the RMS of the pooled
/// real and imaginary parts.
double choose_delta(std::span<const cplx> reference_entries, int levels, const DeltaRule& rule);

/// Closest label; ties go to the lowest label index.
cplx nearest_label(cplx value, const Alphabet& alphabet);
std::size_t nearest_label_index(cplx value, const Alphabet& alphabet);

}  // namespace lrhp
