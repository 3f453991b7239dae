#include "lrhp/alphabets.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "lrhp/errors.hpp"

namespace lrhp {

bool Alphabet::is_real() const noexcept {
  return std::all_of(labels_.begin(), labels_.end(), [](cplx z) { return z.imag() == 0.0; });
}

Alphabet Alphabet::real_component() const {
  if (kind_ != AlphabetKind::DigitalComplex) return *this;
  return make_digital_alphabet(levels_, step_, false);
}

bool Alphabet::contains(cplx value) const noexcept {
  return std::find(labels_.begin(), labels_.end(), value) != labels_.end();
}

double Alphabet::rms() const noexcept {
  double acc = 0.0;
  for (const auto& z : labels_) acc += std::norm(z);
  return std::sqrt(acc / static_cast<double>(labels_.size()));
}

Alphabet make_analog_alphabet(int bits) {
  if (bits < 1 || bits > 16) throw ParameterError("analog resolution must be in [1, 16] bits");
  const std::size_t n = std::size_t{1} << bits;
  std::vector<cplx> labels(n);
  const double step = std::numbers::pi / static_cast<double>(n / 2);
  for (std::size_t l = 0; l < n; ++l) {
    // Exact values on the axes so that b=1,2 alphabets are {±1, ±j}.
    switch ((4 * l) % n == 0 ? (4 * l) / n : 4) {
      case 0: labels[l] = {1.0, 0.0}; break;
      case 1: labels[l] = {0.0, 1.0}; break;
      case 2: labels[l] = {-1.0, 0.0}; break;
      case 3: labels[l] = {0.0, -1.0}; break;
      default: labels[l] = std::polar(1.0, step * static_cast<double>(l));
    }
  }
  return Alphabet(AlphabetKind::AnalogPhase, std::move(labels), bits, 0, 0.0);
}

Alphabet make_digital_alphabet(int levels, double delta, bool complex_labels) {
  if (levels < 2) throw ParameterError("digital alphabet needs at least 2 levels");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("quantization step must be positive");
  std::vector<double> real(static_cast<std::size_t>(levels));
  for (int i = 0; i < levels; ++i) real[i] = delta * (i - 0.5 * (levels - 1));

  std::vector<cplx> labels;
  if (complex_labels) {
    labels.reserve(real.size() * real.size());
    for (double im : real)
      for (double re : real) labels.emplace_back(re, im);
  } else {
    labels.assign(real.begin(), real.end());
  }
  return Alphabet(complex_labels ? AlphabetKind::DigitalComplex : AlphabetKind::DigitalReal,
                  std::move(labels), 0, levels, delta);
}

Alphabet make_switch_alphabet() {
  return Alphabet(AlphabetKind::Binary, {cplx{0.0, 0.0}, cplx{1.0, 0.0}}, 1, 0, 0.0);
}

DeltaRule DeltaRule::fixed(double value) {
  if (!(value > 0.0)) throw ParameterError("fixed quantization step must be positive");
  DeltaRule r;
  r.method = Method::Fixed;
  r.fixed_value = value;
  return r;
}

DeltaRule DeltaRule::gaussian_fit() { return DeltaRule{}; }

namespace {

double normal_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Closed-form E[(q(x)-x)^2] for x ~ N(0,1) and the uniform midrise quantizer.
double gaussian_quantizer_mse(int levels, double delta) {
  double mse = 0.0;
  for (int i = 0; i < levels; ++i) {
    const double p = delta * (i - 0.5 * (levels - 1));
    const double a = i == 0 ? -INFINITY : p - 0.5 * delta;
    const double b = i == levels - 1 ? INFINITY : p + 0.5 * delta;
    const double mass = normal_cdf(b) - normal_cdf(a);
    const double first = normal_pdf(a) - normal_pdf(b);
    const double a_term = std::isinf(a) ? 0.0 : a * normal_pdf(a);
    const double b_term = std::isinf(b) ? 0.0 : b * normal_pdf(b);
    const double second = mass + a_term - b_term;
    mse += second - 2.0 * p * first + p * p * mass;
  }
  return mse;
}

}  // namespace

double gaussian_step_coefficient(int levels) {
  if (levels < 2) throw ParameterError("quantizer needs at least 2 levels");
  static std::mutex mutex;
  static std::map<int, double> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(levels); it != cache.end()) return it->second;
  }

  // Golden-section search; the MSE is unimodal in the step.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 1e-4, hi = 4.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = gaussian_quantizer_mse(levels, x1), f2 = gaussian_quantizer_mse(levels, x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = gaussian_quantizer_mse(levels, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = gaussian_quantizer_mse(levels, x2);
    }
  }
  const double c = 0.5 * (lo + hi);
  std::lock_guard lock(mutex);
  cache.emplace(levels, c);
  return c;
}

double choose_delta(std::span<const cplx> reference_entries, int levels, const DeltaRule& rule) {
  if (rule.method == DeltaRule::Method::Fixed) {
    if (!(rule.fixed_value > 0.0)) throw ParameterError("fixed quantization step must be positive");
    return rule.fixed_value;
  }
  if (reference_entries.empty()) throw DegenerateInputError("no reference entries for step selection");
  double acc = 0.0;
  for (const auto& z : reference_entries) acc += std::norm(z);
  if (!(acc > 0.0)) throw DegenerateInputError("all reference entries are zero");
  if (!std::isfinite(acc)) throw NumericalError("non-finite reference entries for step selection");
  const double sigma = std::sqrt(acc / (2.0 * static_cast<double>(reference_entries.size())));

  double c = 0.0;
  if (auto it = rule.gaussian_coefficients.find(levels); it != rule.gaussian_coefficients.end()) {
    if (!(it->second > 0.0)) throw ParameterError("gaussian step coefficients must be positive");
    c = it->second;
  } else {
    c = gaussian_step_coefficient(levels);
  }
  return c * sigma;
}

std::size_t nearest_label_index(cplx value, const Alphabet& alphabet) {
  std::size_t best = 0;
  double best_dist = std::norm(value - alphabet[0]);
  for (std::size_t i = 1; i < alphabet.size(); ++i) {
    const double d = std::norm(value - alphabet[i]);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

cplx nearest_label(cplx value, const Alphabet& alphabet) {
  return alphabet[nearest_label_index(value, alphabet)];
}

}  // namespace lrhp
