#include "skyloss/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "skyloss/error.hpp"
#include "skyloss/geometry.hpp"

namespace skyloss {

namespace {

void check_aligned(const PathLossGrid& truth, const PathLossGrid& pred) {
  if (!same_axes(truth, pred) || truth.values.size() != pred.values.size() || truth.values.size() != truth.size())
    throw Error(ErrorKind::Mismatch, "path-loss grids have different axes");
}

ErrorMetrics metrics(double sq_sum, double truth_sum, std::size_t n) {
  ErrorMetrics m;
  if (n == 0) return m;
  m.rmse = std::sqrt(sq_sum / static_cast<double>(n));
  const double mean = truth_sum / static_cast<double>(n);
  m.nrmse = mean != 0.0 ? m.rmse / mean : 0.0;
  return m;
}

std::size_t axis_position(const PathLossGrid& g, std::size_t flat, SliceAxis axis) {
  const std::size_t per_theta = g.n_f();
  const std::size_t per_d = per_theta * g.n_theta();
  const std::size_t per_l = per_d * g.n_d();
  switch (axis) {
    case SliceAxis::Altitude: return flat / per_l;
    case SliceAxis::Distance: return (flat / per_d) % g.n_d();
    case SliceAxis::Zenith: return (flat / per_theta) % g.n_theta();
  }
  return 0;
}

const std::vector<double>& axis_values(const ScenarioSpec& s, SliceAxis axis) {
  switch (axis) {
    case SliceAxis::Altitude: return s.altitudes;
    case SliceAxis::Distance: return s.distances;
    case SliceAxis::Zenith: return s.thetas;
  }
  return s.altitudes;
}

MethodResult score(const std::string& method, const PathLossGrid& truth, const PathLossGrid& pred,
                   std::size_t clamped) {
  MethodResult r;
  r.method = method;
  r.global = rmse_nrmse(truth, pred);
  r.by_l = slice_nrmse(truth, pred, SliceAxis::Altitude);
  r.by_d = slice_nrmse(truth, pred, SliceAxis::Distance);
  r.by_theta = slice_nrmse(truth, pred, SliceAxis::Zenith);
  r.clamped_cells = clamped;
  return r;
}

// Shortest round-trip text, for messages.
std::string short_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::size_t locate(const std::vector<double>& axis, double value, const char* what) {
  for (std::size_t i = 0; i < axis.size(); ++i)
    if (std::abs(axis[i] - value) <= 1e-9 * std::max(1.0, std::abs(value))) return i;
  const auto nearest = std::min_element(axis.begin(), axis.end(), [&](double a, double b) {
    return std::abs(a - value) < std::abs(b - value);
  });
  throw Error(ErrorKind::Range, std::string(what) + "=" + short_double(value) +
                                    " is not on the grid axis; nearest valid value is " + short_double(*nearest));
}

TransmittanceGrid select_thetas(const TransmittanceGrid& grid, const std::vector<std::size_t>& keep) {
  TransmittanceGrid out;
  out.scenario = grid.scenario;
  out.scenario.thetas.clear();
  for (std::size_t k : keep) out.scenario.thetas.push_back(grid.scenario.thetas[k]);
  out.band = grid.band;
  out.frequencies = grid.frequencies;
  out.values.resize(out.size());
  for (std::size_t il = 0; il < grid.n_l(); ++il)
    for (std::size_t id = 0; id < grid.n_d(); ++id)
      for (std::size_t n = 0; n < keep.size(); ++n)
        for (std::size_t jf = 0; jf < grid.n_f(); ++jf) out.at(il, id, n, jf) = grid.at(il, id, keep[n], jf);
  return out;
}

void write_header(std::ostream& out, const std::string& first, bool agnostic, bool adaptive) {
  out << first;
  if (agnostic) out << ",nrmse_agnostic";
  if (adaptive) out << ",nrmse_adaptive";
  out << ",nrmse_fspl\n";
}

}  // namespace

ErrorMetrics rmse_nrmse(const PathLossGrid& truth, const PathLossGrid& pred) {
  check_aligned(truth, pred);
  double sq = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < truth.values.size(); ++k) {
    const double diff = pred.values[k] - truth.values[k];
    sq += diff * diff;
    sum += truth.values[k];
  }
  return metrics(sq, sum, truth.values.size());
}

const char* axis_name(SliceAxis axis) {
  switch (axis) {
    case SliceAxis::Altitude: return "l";
    case SliceAxis::Distance: return "d";
    case SliceAxis::Zenith: return "theta";
  }
  return "?";
}

SliceAxis parse_axis(const std::string& name) {
  if (name == "l") return SliceAxis::Altitude;
  if (name == "d") return SliceAxis::Distance;
  if (name == "theta") return SliceAxis::Zenith;
  throw Error(ErrorKind::Lookup, "unknown slice axis '" + name + "' (l, d, theta)");
}

std::vector<SliceMetric> slice_nrmse(const PathLossGrid& truth, const PathLossGrid& pred, SliceAxis axis) {
  check_aligned(truth, pred);
  const std::vector<double>& values = axis_values(truth.scenario, axis);
  std::vector<double> sq(values.size(), 0.0), sum(values.size(), 0.0);
  std::vector<std::size_t> count(values.size(), 0);
  for (std::size_t k = 0; k < truth.values.size(); ++k) {
    const std::size_t p = axis_position(truth, k, axis);
    const double diff = pred.values[k] - truth.values[k];
    sq[p] += diff * diff;
    sum[p] += truth.values[k];
    ++count[p];
  }
  std::vector<SliceMetric> out(values.size());
  for (std::size_t p = 0; p < values.size(); ++p) {
    const ErrorMetrics m = metrics(sq[p], sum[p], count[p]);
    out[p] = {values[p], count[p], m.rmse, m.nrmse};
  }
  return out;
}

PathLossGrid fspl_only_grid(const TransmittanceGrid& axes) {
  TransmittanceGrid ones = axes;
  std::fill(ones.values.begin(), ones.values.end(), 1.0);
  return path_loss_grid(ones);
}

ErrorMetrics fspl_baseline(const TransmittanceGrid& truth_tau) {
  return rmse_nrmse(path_loss_grid(truth_tau), fspl_only_grid(truth_tau));
}

double mean_absorption_db(const TransmittanceGrid& tau) {
  double sum = 0.0;
  for (double t : tau.values) sum += -10.0 * std::log10(t);
  return tau.values.empty() ? 0.0 : sum / static_cast<double>(tau.values.size());
}

void check_model_matches(const Model& m, const TransmittanceGrid& grid) {
  const SubBand& mb = model_band(m);
  const bool same_name = mb.name == grid.band.name;
  const bool covers = grid.frequencies.front() >= mb.f_lo - 1e-12 && grid.frequencies.back() <= mb.f_hi + 1e-12;
  if (!covers || (!same_name && mb.name != "custom" && grid.band.name != "custom"))
    throw Error(ErrorKind::Mismatch, std::string(model_kind(m)) + " model band '" + mb.name + "' [" +
                                         format_double(mb.f_lo) + ", " + format_double(mb.f_hi) +
                                         "] does not match grid band '" + grid.band.name + "'");
  const std::string& trained = std::visit([](const auto& x) -> const std::string& { return x.meta.training_scenario; }, m);
  if (trained != grid.scenario.name && trained != "custom" && grid.scenario.name != "custom")
    throw Error(ErrorKind::Mismatch, std::string(model_kind(m)) + " model was fitted on scenario '" + trained +
                                         "' but the grid is '" + grid.scenario.name + "'");
}

const MethodResult* EvalReport::find(const std::string& method) const {
  for (const auto& m : methods)
    if (m.method == method) return &m;
  return nullptr;
}

EvalReport evaluate(const TransmittanceGrid& truth, const AgnosticModel* agnostic, const AdaptiveModel* adaptive,
                    unsigned workers) {
  EvalReport report;
  report.grid_id = truth.scenario.name + "/" + truth.band.name;
  const PathLossGrid truth_pl = path_loss_grid(truth);
  if (agnostic) {
    const Model m = *agnostic;
    check_model_matches(m, truth);
    const GridPrediction pred = predict_grid(m, truth, workers);
    report.methods.push_back(score("agnostic", truth_pl, pred.path_loss, pred.clamped_cells));
    report.model_ids.push_back("agnostic:" + agnostic->meta.training_scenario + "/" + agnostic->band.name);
  }
  if (adaptive) {
    const Model m = *adaptive;
    check_model_matches(m, truth);
    const GridPrediction pred = predict_grid(m, truth, workers);
    report.methods.push_back(score("adaptive", truth_pl, pred.path_loss, pred.clamped_cells));
    report.model_ids.push_back("adaptive:" + adaptive->meta.training_scenario + "/" + adaptive->band.name);
  }
  report.methods.push_back(score("fspl", truth_pl, fspl_only_grid(truth), 0));
  report.mean_absorption_db = mean_absorption_db(truth);
  return report;
}

std::vector<BandScore> per_band_report(std::span<const BandCase> cases, unsigned workers) {
  std::vector<BandScore> out;
  for (const BandCase& c : cases) {
    const EvalReport r = evaluate(c.truth, c.agnostic ? &*c.agnostic : nullptr, c.adaptive ? &*c.adaptive : nullptr,
                                  workers);
    BandScore s;
    s.band = c.truth.band.name;
    if (const auto* m = r.find("agnostic")) s.agnostic = m->global.nrmse;
    if (const auto* m = r.find("adaptive")) s.adaptive = m->global.nrmse;
    s.fspl = r.find("fspl")->global.nrmse;
    s.mean_absorption_db = r.mean_absorption_db;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<HoldoutScore> holdout_theta(const TransmittanceGrid& grid, const FitOptions& options) {
  const std::size_t nt = grid.n_theta();
  if (nt < 3) throw Error(ErrorKind::Range, "leave-one-theta-out evaluation needs >= 3 zenith angles");
  std::vector<HoldoutScore> out;
  for (std::size_t k = 0; k < nt; ++k) {
    std::vector<std::size_t> train;
    for (std::size_t j = 0; j < nt; ++j)
      if (j != k) train.push_back(j);
    const TransmittanceGrid train_grid = select_thetas(grid, train);
    const TransmittanceGrid test_grid = select_thetas(grid, {k});
    const PathLossGrid truth = path_loss_grid(test_grid);

    HoldoutScore s;
    s.theta = grid.scenario.thetas[k];
    const AgnosticFit ag = fit_agnostic(train_grid, options);
    s.agnostic = rmse_nrmse(truth, predict_grid(ag.model, test_grid, options.workers).path_loss).nrmse;
    if (k > 0 && k + 1 < nt) {
      const AdaptiveFit ad = fit_adaptive(train_grid, options);
      s.adaptive = rmse_nrmse(truth, predict_grid(ad.model, test_grid, options.workers).path_loss).nrmse;
    }
    out.push_back(s);
  }
  return out;
}

void write_slice_csv(std::ostream& out, const EvalReport& report, SliceAxis axis) {
  const MethodResult* ag = report.find("agnostic");
  const MethodResult* ad = report.find("adaptive");
  const MethodResult* fs = report.find("fspl");
  if (!fs) throw Error(ErrorKind::Schema, "report has no FSPL baseline");
  auto slices = [axis](const MethodResult& m) -> const std::vector<SliceMetric>& {
    switch (axis) {
      case SliceAxis::Altitude: return m.by_l;
      case SliceAxis::Distance: return m.by_d;
      case SliceAxis::Zenith: return m.by_theta;
    }
    return m.by_l;
  };
  write_header(out, axis_name(axis), ag != nullptr, ad != nullptr);
  const auto& base = slices(*fs);
  for (std::size_t i = 0; i < base.size(); ++i) {
    out << format_double(base[i].value);
    if (ag) out << ',' << format_double(slices(*ag)[i].nrmse);
    if (ad) out << ',' << format_double(slices(*ad)[i].nrmse);
    out << ',' << format_double(base[i].nrmse) << '\n';
  }
}

void write_subband_csv(std::ostream& out, std::span<const BandScore> scores) {
  bool ag = false, ad = false;
  for (const auto& s : scores) {
    ag = ag || s.agnostic.has_value();
    ad = ad || s.adaptive.has_value();
  }
  write_header(out, "band", ag, ad);
  for (const auto& s : scores) {
    out << s.band;
    if (ag) out << ',' << (s.agnostic ? format_double(*s.agnostic) : "");
    if (ad) out << ',' << (s.adaptive ? format_double(*s.adaptive) : "");
    out << ',' << format_double(s.fspl) << '\n';
  }
}

void write_pathloss_curve_csv(std::ostream& out, const TransmittanceGrid& truth, const AgnosticModel* agnostic,
                              const AdaptiveModel* adaptive, double l_km, double d_km, double theta_deg) {
  const std::size_t il = locate(truth.scenario.altitudes, l_km, "l");
  const std::size_t id = locate(truth.scenario.distances, d_km, "d");
  const std::size_t it = locate(truth.scenario.thetas, theta_deg, "theta");
  const double l = truth.scenario.altitudes[il], d = truth.scenario.distances[id], theta = truth.scenario.thetas[it];
  const DistanceSplit s = decompose(d, theta);
  out << "f_thz,pl_truth_db";
  if (agnostic) out << ",pl_agnostic_db";
  if (adaptive) out << ",pl_adaptive_db";
  out << '\n';
  for (std::size_t jf = 0; jf < truth.n_f(); ++jf) {
    const double f = truth.frequencies[jf];
    const double fspl = fspl_db(f, d * 1e3);
    out << format_double(f) << ',' << format_double(fspl - 10.0 * std::log10(truth.at(il, id, it, jf)));
    if (agnostic)
      out << ',' << format_double(fspl - 10.0 * std::log10(predict_tau_agnostic(*agnostic, l, s.d_h, s.d_v, f).tau));
    if (adaptive)
      out << ',' << format_double(fspl - 10.0 * std::log10(predict_tau_adaptive(*adaptive, l, d, theta, f).tau));
    out << '\n';
  }
}

void write_holdout_csv(std::ostream& out, std::span<const HoldoutScore> scores) {
  out << "theta,nrmse_agnostic,nrmse_adaptive\n";
  for (const auto& s : scores)
    out << format_double(s.theta) << ',' << format_double(s.agnostic) << ','
        << (s.adaptive ? format_double(*s.adaptive) : "") << '\n';
}

}  // namespace skyloss
