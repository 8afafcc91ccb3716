#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "skyloss/datagrid.hpp"
#include "skyloss/model.hpp"
#include "skyloss/polynomial.hpp"

namespace skyloss {

/// Samples with tau below this floor are left out of the distance fits.
inline constexpr double kTauFloor = 1e-12;
/// Step-1 slopes >= 0 are replaced by -kClampEpsilon (1/km) before step 2.
inline constexpr double kClampEpsilon = 1e-15;

// Stage 1: ln(tau) linear in distance, no intercept.

struct DistanceSample2 {
  double d_h;  // km
  double d_v;  // km
  double ln_tau;
};

struct DistanceSample1 {
  double d;  // km
  double ln_tau;
};

struct LogLinearFit2 {
  double b_h = 0.0;  // 1/km
  double b_v = 0.0;  // 1/km
  double sse = 0.0;
  std::size_t n_samples = 0;
};

struct LogLinearFit1 {
  double b = 0.0;  // 1/km
  double sse = 0.0;
  std::size_t n_samples = 0;
};

/// Least squares of ln tau ~ b_h d_h + b_v d_v via the 2x2 normal equations.
/// Throws SingularFit when the (d_h, d_v) rows do not span the plane.
LogLinearFit2 fit_loglinear_2var(std::span<const DistanceSample2> samples);

/// b = sum(d ln tau) / sum(d^2).
LogLinearFit1 fit_loglinear_1var(std::span<const DistanceSample1> samples);

// Stage 2: step-1 slope against altitude, b1(l) ~ a2 exp(b2 l).

struct AltitudePair {
  double l;   // km
  double b1;  // 1/km, strictly negative
};

struct Step2Fit {
  double a2 = 0.0;  // 1/km
  double b2 = 0.0;  // 1/km
  double r2 = 1.0;  // of the log-domain fit
};

/// Ordinary least squares of ln(-b1) on l.
Step2Fit fit_exponential_altitude(std::span<const AltitudePair> pairs);

/// Damped Gauss-Newton on the linear-domain residuals b1 - a2 exp(b2 l),
/// started from `start`. Used only when FitOptions::gauss_newton_step2 is set.
Step2Fit refine_exponential_altitude(std::span<const AltitudePair> pairs, Step2Fit start);

/// ln(-a2) with b2 frozen: the log-domain intercept-only fit.
double refit_amplitude_log(std::span<const AltitudePair> pairs, double b2);

/// a2 with b2 frozen: linear least squares in the original domain.
double refit_amplitude_linear(std::span<const AltitudePair> pairs, double b2);

// Stage 3: amplitude against frequency.

struct FrequencySample {
  double f;  // THz
  double y;
};

/// Least-squares polynomial in u = f_map(f), solved by column-pivoted QR of
/// the Vandermonde matrix.
PolyFit fit_polynomial(std::span<const FrequencySample> samples, int degree, const FrequencyMap& f_map);

// Pipelines.

struct FitOptions {
  int degree_h = 6;
  int degree_v = 6;
  int degree = 6;  // adaptive, every zenith angle
  bool gauss_newton_step2 = false;
  unsigned workers = 1;
};

struct BranchReport {
  std::string label;            // "h", "v" or "theta=<deg>"
  double step2_b2_mean = 0.0;   // frozen b2
  double step2_b2_spread = 0.0; // max - min of the per-frequency b2
  double step2_r2_min = 1.0;
  double step2_r2_mean = 1.0;
  double step2_refit_sse = 0.0; // log-domain SSE with b2 frozen
  double step3_sse = 0.0;
  double step3_max_abs = 0.0;
  std::size_t clamp_events = 0;
};

struct FitReport {
  std::string method;  // "agnostic" or "adaptive"
  std::string scenario;
  std::string band;
  std::size_t n_samples = 0;
  std::size_t excluded_samples = 0;
  std::size_t clamp_events = 0;
  double step1_sse = 0.0;
  std::vector<BranchReport> branches;
};

/// Step-1 slopes kept for diagnostics, indexed [l][f] (f innermost).
struct AgnosticFit {
  AgnosticModel model;
  FitReport report;
  std::vector<double> b1_h;
  std::vector<double> b1_v;
};

struct AdaptiveFit {
  AdaptiveModel model;
  FitReport report;
  std::vector<double> step1_sse_by_theta;
};

AgnosticFit fit_agnostic(const TransmittanceGrid& grid, const FitOptions& options = {});
AdaptiveFit fit_adaptive(const TransmittanceGrid& grid, const FitOptions& options = {});

/// Step-1 SSE on the theta slice `theta_index` of the slope induced by the
/// agnostic step-1 coefficients, b1_h sin(theta) + b1_v cos(theta).
double induced_step1_sse(const TransmittanceGrid& grid, const AgnosticFit& fit, std::size_t theta_index);

/// YAML rendering of a fit report.
std::string dump_fit_report(const FitReport& report);

}  // namespace skyloss
