#include "skyloss/atmosphere.hpp"

#include <cmath>
#include <string>

#include "skyloss/error.hpp"
#include "skyloss/geometry.hpp"
#include "skyloss/parallel.hpp"

namespace skyloss {

namespace {

constexpr int kValidationSamples = 1001;
constexpr double kBandSlack = 1e-12;

double lorentz(const AbsorptionLine& line, double f_thz) {
  const double hw2 = line.half_width_thz * line.half_width_thz;
  const double df = f_thz - line.center_thz;
  return hw2 / (df * df + hw2);
}

// Integral of exp(-(l + s c) / H) over s in [0, d].
double layer_path_integral(double l, double d, double c, double h) {
  const double base = std::exp(-l / h);
  if (c == 0.0) return base * d;
  return base * (h / c) * -std::expm1(-d * c / h);
}

void check_path(double l_km, double d_km, double theta_deg) {
  if (!(l_km >= 0.0) || !std::isfinite(l_km)) throw Error(ErrorKind::Range, "path start altitude must be >= 0 km");
  if (!(d_km > 0.0) || !std::isfinite(d_km)) throw Error(ErrorKind::Range, "path length must be > 0 km");
  check_zenith(theta_deg);
}

void check_frequency(const AbsorptionProfile& p, double f_thz) {
  if (!p.covers(f_thz))
    throw Error(ErrorKind::Range, "frequency " + format_double(f_thz) + " THz outside profile band [" +
                                      format_double(p.f_min()) + ", " + format_double(p.f_max()) + "]");
}

struct Simpson {
  const AbsorptionProfile& profile;
  double l, c, f;

  double k(double s) const { return absorption_coefficient(profile, l + s * c, f); }

  double adapt(double a, double b, double fa, double fm, double fb, double whole, double eps, int depth) const {
    if (depth > kQuadratureMaxDepth)
      throw Error(ErrorKind::NumericFailure, "path quadrature did not converge within 48 bisection levels");
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = k(lm), frm = k(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return adapt(a, m, fa, flm, fm, left, 0.5 * eps, depth + 1) + adapt(m, b, fm, frm, fb, right, 0.5 * eps, depth + 1);
  }
};

}  // namespace

bool AbsorptionProfile::covers(double f_thz) const {
  return f_thz >= f_min_ - kBandSlack && f_thz <= f_max_ + kBandSlack;
}

void AbsorptionProfile::validate() const {
  if (!(f_min_ > 0.0 && f_min_ < f_max_) || !std::isfinite(f_max_))
    throw Error(ErrorKind::Range, "profile validity band must satisfy 0 < f_min < f_max");
  if (mode_ == ProfileMode::ModelExact) {
    if (!std::isfinite(exact_.b2h) || !std::isfinite(exact_.b2v))
      throw Error(ErrorKind::Range, "model-exact b2 coefficients must be finite");
    if (exact_.lambda_h.coeffs.empty() || exact_.lambda_v.coeffs.empty())
      throw Error(ErrorKind::Range, "model-exact lambda polynomials must not be empty");
    for (int i = 0; i < kValidationSamples; ++i) {
      const double f = f_min_ + (f_max_ - f_min_) * i / (kValidationSamples - 1);
      if (exact_.lambda_h(f) > 0.0 || exact_.lambda_v(f) > 0.0)
        throw Error(ErrorKind::Range, "model-exact lambda must be <= 0 over the band (f = " + format_double(f) + ")");
    }
    return;
  }
  if (!(humidity_scale_ >= 0.0) || !std::isfinite(humidity_scale_))
    throw Error(ErrorKind::Range, "humidity scale must be finite and >= 0");
  for (const auto& t : terms_) {
    if (!(t.scale_height_km > 0.0)) throw Error(ErrorKind::Range, "continuum scale height must be > 0 km");
    // Each term is checked separately; nonnegative terms give k >= 0 at every altitude.
    for (int i = 0; i < kValidationSamples; ++i) {
      const double f = f_min_ + (f_max_ - f_min_) * i / (kValidationSamples - 1);
      const double kappa = horner(t.amplitude_poly, f);
      if (!(kappa >= 0.0))
        throw Error(ErrorKind::Range, "continuum amplitude negative at f = " + format_double(f) + " THz");
    }
  }
  if (mode_ == ProfileMode::Continuum && !lines_.empty())
    throw Error(ErrorKind::Schema, "continuum profile cannot carry lines");
  for (const auto& line : lines_) {
    if (!(line.scale_height_km > 0.0)) throw Error(ErrorKind::Range, "line scale height must be > 0 km");
    if (!(line.strength_per_km >= 0.0)) throw Error(ErrorKind::Range, "line strength must be >= 0");
    if (!(line.half_width_thz > 0.0)) throw Error(ErrorKind::Range, "line half width must be > 0");
    if (!std::isfinite(line.center_thz)) throw Error(ErrorKind::Range, "line center must be finite");
  }
}

AbsorptionProfile AbsorptionProfile::continuum(std::vector<ContinuumTerm> terms, double f_min, double f_max,
                                               double humidity_scale) {
  AbsorptionProfile p;
  p.mode_ = ProfileMode::Continuum;
  p.terms_ = std::move(terms);
  p.f_min_ = f_min;
  p.f_max_ = f_max;
  p.humidity_scale_ = humidity_scale;
  p.validate();
  return p;
}

AbsorptionProfile AbsorptionProfile::with_lines(std::vector<ContinuumTerm> terms, std::vector<AbsorptionLine> lines,
                                                double f_min, double f_max, double humidity_scale) {
  AbsorptionProfile p;
  p.mode_ = ProfileMode::Lines;
  p.terms_ = std::move(terms);
  p.lines_ = std::move(lines);
  p.f_min_ = f_min;
  p.f_max_ = f_max;
  p.humidity_scale_ = humidity_scale;
  p.validate();
  return p;
}

AbsorptionProfile AbsorptionProfile::model_exact(double b2h, double b2v, std::vector<double> lambda_h,
                                                 std::vector<double> lambda_v, double f_min, double f_max) {
  AbsorptionProfile p;
  p.mode_ = ProfileMode::ModelExact;
  p.f_min_ = f_min;
  p.f_max_ = f_max;
  const FrequencyMap map = FrequencyMap::for_band(f_min, f_max);
  p.exact_ = {b2h, b2v, {std::move(lambda_h), map}, {std::move(lambda_v), map}};
  p.validate();
  return p;
}

AbsorptionProfile standard_profile() {
  // kappa(f) = 0.1 + 1.0 f + 15 f^2 (1/km, f in THz), water-vapor-like scale height.
  std::vector<ContinuumTerm> terms{{{0.1, 1.0, 15.0}, 2.1}};
  std::vector<AbsorptionLine> lines{
      {0.183, 6.0, 0.0028, 2.1},  {0.325, 25.0, 0.0029, 2.1},   {0.380, 90.0, 0.0031, 2.1},
      {0.448, 60.0, 0.0030, 2.1}, {0.557, 4000.0, 0.0031, 2.1}, {0.752, 2500.0, 0.0030, 2.1},
      {0.988, 1500.0, 0.0030, 2.1},
  };
  AbsorptionProfile p = AbsorptionProfile::with_lines(std::move(terms), std::move(lines), 0.1, 1.0, 1.0);
  p.set_name("standard");
  return p;
}

double absorption_coefficient(const AbsorptionProfile& profile, double z_km, double f_thz) {
  if (profile.mode() == ProfileMode::ModelExact)
    throw Error(ErrorKind::UnsupportedOperation, "model-exact profiles have no pointwise absorption coefficient");
  if (!(z_km >= 0.0)) throw Error(ErrorKind::Range, "altitude must be >= 0 km");
  check_frequency(profile, f_thz);
  double k = 0.0;
  for (const auto& t : profile.terms())
    k += horner(t.amplitude_poly, f_thz) * std::exp(-z_km / t.scale_height_km);
  for (const auto& line : profile.lines())
    k += line.strength_per_km * lorentz(line, f_thz) * std::exp(-z_km / line.scale_height_km);
  return profile.humidity_scale() * k;
}

double optical_depth(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg, double f_thz) {
  check_path(l_km, d_km, theta_deg);
  check_frequency(profile, f_thz);
  if (profile.mode() == ProfileMode::ModelExact) {
    const auto& e = profile.exact();
    const DistanceSplit s = decompose(d_km, theta_deg);
    return -(e.lambda_h(f_thz) * std::exp(e.b2h * l_km) * s.d_h + e.lambda_v(f_thz) * std::exp(e.b2v * l_km) * s.d_v);
  }
  const double c = cos_deg(theta_deg);
  double depth = 0.0;
  for (const auto& t : profile.terms())
    depth += horner(t.amplitude_poly, f_thz) * layer_path_integral(l_km, d_km, c, t.scale_height_km);
  for (const auto& line : profile.lines())
    depth += line.strength_per_km * lorentz(line, f_thz) * layer_path_integral(l_km, d_km, c, line.scale_height_km);
  return profile.humidity_scale() * depth;
}

double transmittance_along_path(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg,
                                double f_thz) {
  return std::exp(-optical_depth(profile, l_km, d_km, theta_deg, f_thz));
}

double optical_depth_quadrature(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg,
                                double f_thz, double rel_tol) {
  if (profile.mode() == ProfileMode::ModelExact)
    throw Error(ErrorKind::UnsupportedOperation, "quadrature needs a pointwise absorption coefficient");
  if (!(rel_tol > 0.0 && rel_tol <= 1e-4)) throw Error(ErrorKind::Range, "rel_tol must lie in (0, 1e-4]");
  check_path(l_km, d_km, theta_deg);
  check_frequency(profile, f_thz);

  Simpson rule{profile, l_km, cos_deg(theta_deg), f_thz};
  // Coarse composite estimate fixes the absolute target; panels are then refined independently.
  constexpr int kPanels = 8;
  std::vector<double> node(2 * kPanels + 1);
  for (int i = 0; i <= 2 * kPanels; ++i) node[i] = rule.k(d_km * i / (2.0 * kPanels));
  const double h = d_km / kPanels;
  double estimate = 0.0;
  std::vector<double> panel(kPanels);
  for (int p = 0; p < kPanels; ++p) {
    panel[p] = h / 6.0 * (node[2 * p] + 4.0 * node[2 * p + 1] + node[2 * p + 2]);
    estimate += panel[p];
  }
  if (estimate == 0.0) return 0.0;
  const double eps = 0.1 * rel_tol * std::abs(estimate) / kPanels;
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p)
    total += rule.adapt(p * h, (p + 1) * h, node[2 * p], node[2 * p + 1], node[2 * p + 2], panel[p], eps, 1);
  return total;
}

double transmittance_quadrature(const AbsorptionProfile& profile, double l_km, double d_km, double theta_deg,
                                double f_thz, double rel_tol) {
  return std::exp(-optical_depth_quadrature(profile, l_km, d_km, theta_deg, f_thz, rel_tol));
}

TransmittanceGrid generate_grid(const AbsorptionProfile& profile, const ScenarioSpec& scenario, const SubBand& band,
                                unsigned workers) {
  TransmittanceGrid grid = make_transmittance_grid(scenario, band);
  if (!profile.covers(band.f_lo) || !profile.covers(grid.frequencies.back()))
    throw Error(ErrorKind::Range, "profile band does not cover sub-band '" + band.name + "'");
  const std::size_t rows = grid.n_l() * grid.n_d() * grid.n_theta();
  parallel_for(rows, workers, [&](std::size_t r) {
    const std::size_t it = r % grid.n_theta();
    const std::size_t id = (r / grid.n_theta()) % grid.n_d();
    const std::size_t il = r / (grid.n_theta() * grid.n_d());
    const double l = grid.scenario.altitudes[il];
    const double d = grid.scenario.distances[id];
    const double theta = grid.scenario.thetas[it];
    for (std::size_t jf = 0; jf < grid.n_f(); ++jf) {
      const double tau = transmittance_along_path(profile, l, d, theta, grid.frequencies[jf]);
      if (!(tau > 0.0))
        throw Error(ErrorKind::NumericFailure, "transmittance underflow at l=" + format_double(l) + " km, d=" +
                                                   format_double(d) + " km, theta=" + format_double(theta) +
                                                   " deg, f=" + format_double(grid.frequencies[jf]) + " THz");
      grid.at(il, id, it, jf) = tau;
    }
  });
  return grid;
}

}  // namespace skyloss
