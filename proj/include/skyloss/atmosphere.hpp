#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skyloss/datagrid.hpp"
#include "skyloss/polynomial.hpp"

namespace skyloss {

/// Exponentially decaying continuum absorber: k(z, f) = kappa(f) * exp(-z / H),
/// kappa a polynomial in f (THz, ascending powers) giving 1/km at sea level.
struct ContinuumTerm {
  std::vector<double> amplitude_poly;
  double scale_height_km = 1.0;

  bool operator==(const ContinuumTerm&) const = default;
};

/// Lorentzian line: strength * hw^2 / ((f - center)^2 + hw^2) * exp(-z / H).
struct AbsorptionLine {
  double center_thz = 0.0;
  double strength_per_km = 0.0;
  double half_width_thz = 0.0;
  double scale_height_km = 1.0;

  bool operator==(const AbsorptionLine&) const = default;
};

/// Ground-truth coefficients of the closed-form transmittance
/// exp(Lh(f) e^{b2h l} d_h + Lv(f) e^{b2v l} d_v), lengths in km.
struct ModelExactParams {
  double b2h = 0.0;
  double b2v = 0.0;
  PolyFit lambda_h;
  PolyFit lambda_v;

  bool operator==(const ModelExactParams&) const = default;
};

enum class ProfileMode { ModelExact, Continuum, Lines };

/// Synthetic plane-parallel atmosphere. This is a parameterized stand-in for a
/// radiative-transfer run, not spectroscopic truth.
class AbsorptionProfile {
 public:
  static AbsorptionProfile continuum(std::vector<ContinuumTerm> terms, double f_min, double f_max,
                                     double humidity_scale = 1.0);
  static AbsorptionProfile with_lines(std::vector<ContinuumTerm> terms, std::vector<AbsorptionLine> lines,
                                      double f_min, double f_max, double humidity_scale = 1.0);
  /// Lambda polynomials are taken over the normalized frequency of [f_min, f_max].
  static AbsorptionProfile model_exact(double b2h, double b2v, std::vector<double> lambda_h,
                                       std::vector<double> lambda_v, double f_min, double f_max);

  ProfileMode mode() const { return mode_; }
  double f_min() const { return f_min_; }
  double f_max() const { return f_max_; }
  double humidity_scale() const { return humidity_scale_; }
  const std::vector<ContinuumTerm>& terms() const { return terms_; }
  const std::vector<AbsorptionLine>& lines() const { return lines_; }
  const ModelExactParams& exact() const { return exact_; }

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  bool covers(double f_thz) const;

  bool operator==(const AbsorptionProfile&) const = default;

 private:
  AbsorptionProfile() = default;
  void validate() const;

  ProfileMode mode_ = ProfileMode::Continuum;
  std::string name_ = "custom";
  double f_min_ = 0.1;
  double f_max_ = 1.0;
  double humidity_scale_ = 1.0;
  std::vector<ContinuumTerm> terms_;
  std::vector<AbsorptionLine> lines_;
  ModelExactParams exact_;
};

/// The shipped "standard" profile (also in data/standard.prof).
AbsorptionProfile standard_profile();

/// k(z, f) in 1/km. Throws UnsupportedOperation for ModelExact profiles.
double absorption_coefficient(const AbsorptionProfile& profile, double z_km, double f_thz);

/// -ln(tau) along the slant path starting at altitude l (km), length d (km),
/// zenith angle theta (deg), using the closed-form altitude integrals.
double optical_depth(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg, double f_thz);

double transmittance_along_path(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg,
                                double f_thz);

/// Adaptive Simpson integration of k along the path; relative tolerance on the
/// optical depth. Not used by the generator: it exists as an independent check
/// of the closed form.
inline constexpr int kQuadratureMaxDepth = 48;
double optical_depth_quadrature(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg,
                                double f_thz, double rel_tol);
double transmittance_quadrature(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg,
                                double f_thz, double rel_tol);

/// Fills the (l, d, theta, f) tensor. Each cell is computed independently, so
/// the result is bitwise identical for any worker count.
TransmittanceGrid generate_grid(const AbsorptionProfile& profile, const ScenarioSpec& scenario, const SubBand& band,
                                unsigned workers = 1);

// Profile config files (YAML, `format: 1`).
AbsorptionProfile parse_profile(const std::string& text);
AbsorptionProfile load_profile(const std::filesystem::path& path);
std::string dump_profile(const AbsorptionProfile& profile);

}  // namespace skyloss
