#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skyloss/datagrid.hpp"
#include "skyloss/model.hpp"
#include "skyloss/regression.hpp"

namespace skyloss {

struct ErrorMetrics {
  double rmse = 0.0;   // dB
  double nrmse = 0.0;  // RMSE over the mean true path loss of the evaluated cells
};

/// RMSE = ||pred - truth||_F / sqrt(N_s); NRMSE = RMSE / mean(truth).
ErrorMetrics rmse_nrmse(const PathLossGrid& truth, const PathLossGrid& pred);

enum class SliceAxis { Altitude, Distance, Zenith };

const char* axis_name(SliceAxis axis);  // "l", "d", "theta"
SliceAxis parse_axis(const std::string& name);

struct SliceMetric {
  double value = 0.0;  // axis value (km or deg)
  std::size_t cells = 0;
  double rmse = 0.0;
  double nrmse = 0.0;  // normalized by the slice-local mean
};

/// One metric per value of `axis`, computed over the remaining dimensions.
std::vector<SliceMetric> slice_nrmse(const PathLossGrid& truth, const PathLossGrid& pred, SliceAxis axis);

/// Prediction with tau = 1 everywhere (free-space loss only).
PathLossGrid fspl_only_grid(const TransmittanceGrid& axes);
ErrorMetrics fspl_baseline(const TransmittanceGrid& truth_tau);

/// Mean of -10 log10(tau) over every cell, dB.
double mean_absorption_db(const TransmittanceGrid& tau);

/// Throws Mismatch when the model was fitted for another band or scenario.
void check_model_matches(const Model& m, const TransmittanceGrid& grid);

struct MethodResult {
  std::string method;  // "agnostic", "adaptive", "fspl"
  ErrorMetrics global;
  std::vector<SliceMetric> by_l;
  std::vector<SliceMetric> by_d;
  std::vector<SliceMetric> by_theta;
  std::size_t clamped_cells = 0;
};

struct EvalReport {
  std::string grid_id;  // "<scenario>/<band>"
  std::vector<std::string> model_ids;
  std::vector<MethodResult> methods;  // fitted methods first, fspl last
  double mean_absorption_db = 0.0;

  const MethodResult* find(const std::string& method) const;
};

/// In-sample evaluation of up to two models (either may be null) plus the
/// FSPL baseline against a reference grid.
EvalReport evaluate(const TransmittanceGrid& truth, const AgnosticModel* agnostic, const AdaptiveModel* adaptive,
                    unsigned workers = 1);

struct BandCase {
  TransmittanceGrid truth;
  std::optional<AgnosticModel> agnostic;
  std::optional<AdaptiveModel> adaptive;
};

struct BandScore {
  std::string band;
  std::optional<double> agnostic;
  std::optional<double> adaptive;
  double fspl = 0.0;
  double mean_absorption_db = 0.0;
};

std::vector<BandScore> per_band_report(std::span<const BandCase> cases, unsigned workers = 1);

/// Leave-one-zenith-angle-out scores: each theta slice is predicted by models
/// fitted without it. The adaptive column is empty at the ends of the theta
/// axis, where its interpolation has no bracketing angle.
struct HoldoutScore {
  double theta = 0.0;
  double agnostic = 0.0;
  std::optional<double> adaptive;
};
std::vector<HoldoutScore> holdout_theta(const TransmittanceGrid& grid, const FitOptions& options);

// CSV tables. Columns for absent methods are omitted.
void write_slice_csv(std::ostream& out, const EvalReport& report, SliceAxis axis);
void write_subband_csv(std::ostream& out, std::span<const BandScore> scores);
void write_pathloss_curve_csv(std::ostream& out, const TransmittanceGrid& truth, const AgnosticModel* agnostic,
                              const AdaptiveModel* adaptive, double l_km, double d_km, double theta_deg);
void write_holdout_csv(std::ostream& out, std::span<const HoldoutScore> scores);

}  // namespace skyloss
