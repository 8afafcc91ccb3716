#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "skyloss/datagrid.hpp"
#include "skyloss/geometry.hpp"
#include "skyloss/polynomial.hpp"

namespace skyloss {

/// Provenance of a fitted model; carried through the coefficient file.
struct FitMetadata {
  std::string training_scenario = "custom";
  std::vector<int> degrees;            // (P_h, P_v) or (P)
  std::size_t excluded_samples = 0;    // tau below the floor, dropped from step 1
  std::size_t clamp_events = 0;        // step-1 slopes >= 0 forced to -epsilon
  bool intercept_refit = true;         // a2 refit after freezing b2 at its band mean
  bool gauss_newton = false;           // step-2 refinement enabled

  bool operator==(const FitMetadata&) const = default;
};

/// Closed-form model exp(Lh(f) e^{b2_h l} d_h + Lv(f) e^{b2_v l} d_v), lengths in km.
struct AgnosticModel {
  double b2_h = 0.0;
  double b2_v = 0.0;
  PolyFit poly_h;
  PolyFit poly_v;
  SubBand band;
  FitMetadata meta;

  /// P_h + P_v + 4.
  std::size_t coefficient_count() const { return poly_h.coeffs.size() + poly_v.coeffs.size() + 2; }
  bool operator==(const AgnosticModel&) const = default;
};

struct AdaptiveEntry {
  double theta = 0.0;  // deg
  double b2 = 0.0;
  PolyFit poly;

  bool operator==(const AdaptiveEntry&) const = default;
};

/// One exp(L_theta(f) e^{b2_theta l} d) model per zenith angle of the training grid.
struct AdaptiveModel {
  std::vector<AdaptiveEntry> entries;  // strictly increasing theta
  SubBand band;
  FitMetadata meta;

  std::vector<double> thetas() const;
  /// N_theta * (P + 2).
  std::size_t coefficient_count() const;
  bool operator==(const AdaptiveModel&) const = default;
};

using Model = std::variant<AgnosticModel, AdaptiveModel>;

const SubBand& model_band(const Model& m);
const char* model_kind(const Model& m);

struct TauPrediction {
  double tau = 1.0;
  bool clamped = false;  // the fitted exponent was positive and tau was capped at 1
};

TauPrediction predict_tau_agnostic(const AgnosticModel& m, double l_km, double d_h_km, double d_v_km, double f_thz);
TauPrediction predict_tau_adaptive(const AdaptiveModel& m, double l_km, double d_km, double theta_deg, double f_thz);

struct PathLossQuery {
  Position3D p1;  // m
  Position3D p2;  // m
  double f_thz = 0.0;
};

struct PathLossPrediction {
  LinkGeometry geometry;  // m, deg
  double fspl_db = 0.0;
  double abs_db = 0.0;
  double total_db = 0.0;
  bool clamped = false;
};

PathLossPrediction predict_path_loss(const Model& m, const PathLossQuery& q);

struct GridPrediction {
  PathLossGrid path_loss;
  std::size_t clamped_cells = 0;
};

/// Path loss predicted on every cell of the reference grid's axes.
GridPrediction predict_grid(const Model& m, const TransmittanceGrid& axes, unsigned workers = 1);

// Coefficient files (YAML, `format: skyloss-model v1`).
inline constexpr const char* kModelFormat = "skyloss-model v1";
std::string dump_model(const Model& m);
Model parse_model(const std::string& text);
void export_model(const Model& m, const std::filesystem::path& path);
Model import_model(const std::filesystem::path& path);

}  // namespace skyloss
