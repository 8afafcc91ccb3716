#pragma once

#include <span>
#include <vector>

namespace skyloss {

/// Affine map of a frequency band onto [-1, 1]: u = (f - center) / half_width.
/// A single-frequency band maps with unit half width.
struct FrequencyMap {
  double center = 0.0;      // THz
  double half_width = 1.0;  // THz

  static FrequencyMap for_band(double f_lo, double f_hi) {
    return {0.5 * (f_lo + f_hi), f_hi > f_lo ? 0.5 * (f_hi - f_lo) : 1.0};
  }

  double operator()(double f_thz) const { return (f_thz - center) / half_width; }

  bool operator==(const FrequencyMap&) const = default;
};

/// Horner evaluation of sum_i coeffs[i] * x^i.
inline double horner(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

/// Polynomial in the normalized frequency u = f_map(f). Used both for the
/// fitted Lambda(f) coefficients and for the synthetic model-exact generator.
struct PolyFit {
  std::vector<double> coeffs;  // ascending powers of u
  FrequencyMap f_map;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  double operator()(double f_thz) const { return horner(coeffs, f_map(f_thz)); }

  bool operator==(const PolyFit&) const = default;
};

}  // namespace skyloss
