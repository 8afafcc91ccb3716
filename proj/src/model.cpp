#include "skyloss/model.hpp"

#include <algorithm>
#include <cmath>

#include "skyloss/error.hpp"
#include "skyloss/parallel.hpp"

namespace skyloss {

namespace {

constexpr double kBandSlack = 1e-12;

void check_in_band(const SubBand& band, double f_thz) {
  if (!(f_thz >= band.f_lo - kBandSlack && f_thz <= band.f_hi + kBandSlack))
    throw Error(ErrorKind::Range, "frequency " + format_double(f_thz) + " THz outside model band '" + band.name +
                                      "' [" + format_double(band.f_lo) + ", " + format_double(band.f_hi) + "]");
}

TauPrediction from_exponent(double exponent) {
  if (exponent > 0.0) return {1.0, true};
  return {std::exp(exponent), false};
}

// Exponent rate r(theta) = Lambda_theta(f) * exp(b2_theta * l) of one entry.
double entry_rate(const AdaptiveEntry& e, double l_km, double f_thz) { return e.poly(f_thz) * std::exp(e.b2 * l_km); }

}  // namespace

std::vector<double> AdaptiveModel::thetas() const {
  std::vector<double> t;
  t.reserve(entries.size());
  for (const auto& e : entries) t.push_back(e.theta);
  return t;
}

std::size_t AdaptiveModel::coefficient_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.poly.coeffs.size() + 1;
  return n;
}

const SubBand& model_band(const Model& m) {
  return std::visit([](const auto& x) -> const SubBand& { return x.band; }, m);
}

const char* model_kind(const Model& m) { return std::holds_alternative<AgnosticModel>(m) ? "agnostic" : "adaptive"; }

TauPrediction predict_tau_agnostic(const AgnosticModel& m, double l_km, double d_h_km, double d_v_km, double f_thz) {
  check_in_band(m.band, f_thz);
  if (!(l_km >= 0.0) || !(d_h_km >= 0.0) || !(d_v_km >= 0.0) || !(d_h_km + d_v_km > 0.0))
    throw Error(ErrorKind::Range, "agnostic prediction needs l, d_h, d_v >= 0 and d_h + d_v > 0");
  const double exponent =
      m.poly_h(f_thz) * std::exp(m.b2_h * l_km) * d_h_km + m.poly_v(f_thz) * std::exp(m.b2_v * l_km) * d_v_km;
  return from_exponent(exponent);
}

TauPrediction predict_tau_adaptive(const AdaptiveModel& m, double l_km, double d_km, double theta_deg, double f_thz) {
  check_in_band(m.band, f_thz);
  if (m.entries.empty()) throw Error(ErrorKind::Schema, "adaptive model has no zenith-angle entries");
  if (!(l_km >= 0.0) || !(d_km > 0.0)) throw Error(ErrorKind::Range, "adaptive prediction needs l >= 0 and d > 0");
  const double lo = m.entries.front().theta, hi = m.entries.back().theta;
  if (!(theta_deg >= lo && theta_deg <= hi))
    throw Error(ErrorKind::Range, "zenith angle " + format_double(theta_deg) + " deg outside the model grid [" +
                                      format_double(lo) + ", " + format_double(hi) + "]");
  auto upper = std::lower_bound(m.entries.begin(), m.entries.end(), theta_deg,
                                [](const AdaptiveEntry& e, double t) { return e.theta < t; });
  double rate = 0.0;
  if (upper->theta == theta_deg) {
    rate = entry_rate(*upper, l_km, f_thz);
  } else {
    const AdaptiveEntry& a = *(upper - 1);
    const AdaptiveEntry& b = *upper;
    const double w = (theta_deg - a.theta) / (b.theta - a.theta);
    rate = (1.0 - w) * entry_rate(a, l_km, f_thz) + w * entry_rate(b, l_km, f_thz);
  }
  return from_exponent(rate * d_km);
}

PathLossPrediction predict_path_loss(const Model& m, const PathLossQuery& q) {
  PathLossPrediction out;
  out.geometry = link_geometry_from_positions(q.p1, q.p2);
  check_in_band(model_band(m), q.f_thz);
  const LinkGeometry& g = out.geometry;
  const TauPrediction tau = std::visit(
      [&](const auto& model) {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, AgnosticModel>)
          return predict_tau_agnostic(model, g.l * 1e-3, g.d_h * 1e-3, g.d_v * 1e-3, q.f_thz);
        else
          return predict_tau_adaptive(model, g.l * 1e-3, g.d * 1e-3, g.theta, q.f_thz);
      },
      m);
  out.fspl_db = fspl_db(q.f_thz, g.d);
  out.abs_db = -10.0 * std::log10(tau.tau);
  out.total_db = out.fspl_db + out.abs_db;
  out.clamped = tau.clamped;
  return out;
}

GridPrediction predict_grid(const Model& m, const TransmittanceGrid& axes, unsigned workers) {
  GridPrediction out;
  PathLossGrid& pl = out.path_loss;
  pl.scenario = axes.scenario;
  pl.band = axes.band;
  pl.frequencies = axes.frequencies;
  pl.values.assign(pl.size(), 0.0);
  const std::size_t rows = pl.n_l() * pl.n_d() * pl.n_theta();
  std::vector<std::size_t> clamped(rows, 0);
  parallel_for(rows, workers, [&](std::size_t r) {
    const std::size_t it = r % pl.n_theta();
    const std::size_t id = (r / pl.n_theta()) % pl.n_d();
    const std::size_t il = r / (pl.n_theta() * pl.n_d());
    const double l = pl.scenario.altitudes[il];
    const double d = pl.scenario.distances[id];
    const double theta = pl.scenario.thetas[it];
    const DistanceSplit s = decompose(d, theta);
    for (std::size_t jf = 0; jf < pl.n_f(); ++jf) {
      const double f = pl.frequencies[jf];
      const TauPrediction tau = std::visit(
          [&](const auto& model) {
            using T = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<T, AgnosticModel>)
              return predict_tau_agnostic(model, l, s.d_h, s.d_v, f);
            else
              return predict_tau_adaptive(model, l, d, theta, f);
          },
          m);
      clamped[r] += tau.clamped ? 1 : 0;
      pl.at(il, id, it, jf) = fspl_db(f, d * 1e3) - 10.0 * std::log10(tau.tau);
    }
  });
  for (std::size_t c : clamped) out.clamped_cells += c;
  return out;
}

}  // namespace skyloss
