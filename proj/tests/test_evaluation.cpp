#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "skyloss/atmosphere.hpp"
#include "skyloss/evaluation.hpp"
#include "support.hpp"

using namespace skyloss;
using doctest::Approx;

namespace {

PathLossGrid pl_grid(const ScenarioSpec& s, std::vector<double> freqs, std::vector<double> values) {
  PathLossGrid g;
  g.scenario = s;
  g.band = SubBand{"custom", freqs.front(), freqs.back(), 0.0003};
  g.frequencies = std::move(freqs);
  g.values = std::move(values);
  return g;
}

PathLossGrid random_pl(std::mt19937_64& rng, const ScenarioSpec& s, std::size_t nf) {
  std::uniform_real_distribution<double> u(80.0, 200.0);
  std::vector<double> f, v;
  for (std::size_t k = 0; k < nf; ++k) f.push_back(0.3 + 0.0003 * k);
  const std::size_t n = s.altitudes.size() * s.distances.size() * s.thetas.size() * nf;
  for (std::size_t k = 0; k < n; ++k) v.push_back(u(rng));
  return pl_grid(s, f, v);
}

const ScenarioSpec kSmall{"custom", {0.0, 0.5, 1.0}, {0.1, 0.2}, {0.0, 45.0, 90.0}};

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("two-cell hand check") {
  const ScenarioSpec s{"custom", {0.0}, {1.0}, {0.0}};
  const PathLossGrid truth = pl_grid(s, {0.3, 0.3003}, {100.0, 200.0});
  const PathLossGrid pred = pl_grid(s, {0.3, 0.3003}, {110.0, 190.0});
  const ErrorMetrics m = rmse_nrmse(truth, pred);
  CHECK(std::abs(m.rmse - 10.0) <= 1e-9);
  CHECK(std::abs(m.nrmse - 0.066667) <= 1e-6);
  CHECK(std::abs(m.nrmse - 10.0 / 150.0) <= 1e-9);
  const ErrorMetrics same = rmse_nrmse(truth, truth);
  CHECK(same.rmse == 0.0);
  CHECK(same.nrmse == 0.0);
}

TEST_CASE("constant offset gives its magnitude") {
  std::mt19937_64 rng(1);
  const PathLossGrid truth = random_pl(rng, kSmall, 4);
  PathLossGrid pred = truth;
  for (double& v : pred.values) v -= 2.5;
  CHECK(rmse_nrmse(truth, pred).rmse == Approx(2.5).epsilon(1e-12));
}

TEST_CASE("axis mismatch") {
  std::mt19937_64 rng(2);
  const PathLossGrid a = random_pl(rng, kSmall, 4);
  const PathLossGrid b = random_pl(rng, kSmall, 5);
  CHECK_ERROR(rmse_nrmse(a, b), ErrorKind::Mismatch);
  CHECK_ERROR(slice_nrmse(a, b, SliceAxis::Zenith), ErrorKind::Mismatch);
}

TEST_CASE("slice metrics") {
  std::mt19937_64 rng(3);
  const PathLossGrid truth = random_pl(rng, kSmall, 4);
  for (SliceAxis axis : {SliceAxis::Altitude, SliceAxis::Distance, SliceAxis::Zenith}) {
    const auto zero = slice_nrmse(truth, truth, axis);
    for (const auto& s : zero) CHECK(s.nrmse == 0.0);
  }
  SUBCASE("error at one altitude stays local") {
    PathLossGrid pred = truth;
    for (std::size_t id = 0; id < pred.n_d(); ++id)
      for (std::size_t it = 0; it < pred.n_theta(); ++it)
        for (std::size_t jf = 0; jf < pred.n_f(); ++jf) pred.at(1, id, it, jf) += 3.0;
    const auto by_l = slice_nrmse(truth, pred, SliceAxis::Altitude);
    REQUIRE(by_l.size() == 3);
    CHECK(by_l[0].nrmse == 0.0);
    CHECK(by_l[1].nrmse > 0.0);
    CHECK(by_l[1].rmse == Approx(3.0).epsilon(1e-12));
    CHECK(by_l[2].nrmse == 0.0);
    CHECK(by_l[1].value == 0.5);
  }
  SUBCASE("slices recombine to the global RMSE") {
    const PathLossGrid pred = random_pl(rng, kSmall, 4);
    const double global = rmse_nrmse(truth, pred).rmse;
    for (SliceAxis axis : {SliceAxis::Altitude, SliceAxis::Distance, SliceAxis::Zenith}) {
      double acc = 0.0;
      for (const auto& s : slice_nrmse(truth, pred, axis))
        acc += double(s.cells) / double(truth.values.size()) * s.rmse * s.rmse;
      CHECK(std::sqrt(acc) == Approx(global).epsilon(1e-12));
    }
  }
}

TEST_CASE("2x2x1x1 slice fixture") {
  const ScenarioSpec s{"custom", {0.0, 1.0}, {0.5, 1.0}, {0.0}};
  // Cells in canonical order (l, d): (0,0.5) (0,1) (1,0.5) (1,1).
  const PathLossGrid truth = pl_grid(s, {0.3}, {100.0, 200.0, 120.0, 160.0});
  const PathLossGrid pred = pl_grid(s, {0.3}, {110.0, 190.0, 120.0, 164.0});
  const auto by_l = slice_nrmse(truth, pred, SliceAxis::Altitude);
  CHECK(by_l[0].rmse == Approx(10.0).epsilon(1e-14));
  CHECK(by_l[0].nrmse == Approx(10.0 / 150.0).epsilon(1e-14));
  CHECK(by_l[1].rmse == Approx(std::sqrt(8.0)).epsilon(1e-14));
  CHECK(by_l[1].nrmse == Approx(std::sqrt(8.0) / 140.0).epsilon(1e-14));
  const auto by_d = slice_nrmse(truth, pred, SliceAxis::Distance);
  CHECK(by_d[0].rmse == Approx(std::sqrt(50.0)).epsilon(1e-14));
  CHECK(by_d[0].nrmse == Approx(std::sqrt(50.0) / 110.0).epsilon(1e-14));
  CHECK(by_d[1].rmse == Approx(std::sqrt(58.0)).epsilon(1e-14));
  CHECK(by_d[1].nrmse == Approx(std::sqrt(58.0) / 180.0).epsilon(1e-14));
}

TEST_CASE("RMSE triangle property") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const PathLossGrid a = random_pl(rng, kSmall, 3), b = random_pl(rng, kSmall, 3), c = random_pl(rng, kSmall, 3);
    REQUIRE(rmse_nrmse(a, c).rmse <= rmse_nrmse(a, b).rmse + rmse_nrmse(b, c).rmse + 1e-12);
  }
}

TEST_CASE("reordering cells does not change the metric") {
  std::mt19937_64 rng(5);
  const PathLossGrid truth = random_pl(rng, kSmall, 4), pred = random_pl(rng, kSmall, 4);
  std::vector<std::size_t> perm(truth.values.size());
  for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
  std::shuffle(perm.begin(), perm.end(), rng);
  PathLossGrid t2 = truth, p2 = pred;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    t2.values[k] = truth.values[perm[k]];
    p2.values[k] = pred.values[perm[k]];
  }
  const ErrorMetrics a = rmse_nrmse(truth, pred), b = rmse_nrmse(t2, p2);
  CHECK(b.rmse == Approx(a.rmse).epsilon(1e-13));
  CHECK(b.nrmse == Approx(a.nrmse).epsilon(1e-13));
}

TEST_CASE("FSPL baseline") {
  const SubBand band{"custom", 0.3, 0.303, 0.0003};
  TransmittanceGrid g = make_transmittance_grid(kSmall, band, 1.0);
  CHECK(fspl_baseline(g).nrmse == 0.0);
  std::fill(g.values.begin(), g.values.end(), 0.5);
  CHECK(fspl_baseline(g).rmse == Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(fspl_baseline(g).rmse == Approx(3.0103).epsilon(1e-5));
  CHECK(mean_absorption_db(g) == Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
}

TEST_CASE("standard profile Dr2Dr x D-G beats free space") {
  const TransmittanceGrid g = generate_grid(standard_profile(), builtin_scenario("Dr2Dr"), builtin_band("D-G"), 4);
  FitOptions opt;
  opt.workers = 4;
  const AgnosticFit fit = fit_agnostic(g, opt);
  const EvalReport r = evaluate(g, &fit.model, nullptr, 4);
  REQUIRE(r.find("agnostic") != nullptr);
  CHECK(r.find("fspl")->global.nrmse > r.find("agnostic")->global.nrmse);
  CHECK(r.grid_id == "Dr2Dr/D-G");
}

TEST_CASE("per-band report") {
  const ScenarioSpec s{"custom", {0.0, 0.5, 1.0}, {0.1, 0.3}, {0.0, 30.0, 60.0, 90.0}};
  SUBCASE("model-exact grids are recovered") {
    std::vector<BandCase> cases;
    for (const char* name : {"Y0", "WR1"}) {
      const SubBand b = builtin_band(name);
      SubBand coarse = b;
      coarse.step = 0.003;
      const auto p = AbsorptionProfile::model_exact(-0.45, -0.45, {-1.0, 0.2, 0.1}, {-0.8, -0.1}, b.f_lo, b.f_hi);
      const TransmittanceGrid g = generate_grid(p, s, coarse);
      cases.push_back({g, fit_agnostic(g).model, fit_adaptive(g).model});
    }
    const auto scores = per_band_report(cases);
    REQUIRE(scores.size() == 2);
    for (const auto& sc : scores) {
      CHECK(*sc.agnostic < 1e-6);
      CHECK(*sc.adaptive < 1e-6);
      CHECK(sc.fspl > 0.0);
    }
    std::ostringstream csv;
    write_subband_csv(csv, scores);
    CHECK(csv.str().rfind("band,nrmse_agnostic,nrmse_adaptive,nrmse_fspl\nY0,", 0) == 0);
  }
  SUBCASE("unit transmittance gives zeros") {
    const TransmittanceGrid g = make_transmittance_grid(s, SubBand{"Y0", 0.327, 0.368, 0.003}, 1.0);
    std::vector<BandCase> cases{{g, fit_agnostic(g).model, fit_adaptive(g).model}};
    const auto sc = per_band_report(cases).front();
    CHECK(*sc.agnostic < 1e-9);
    CHECK(*sc.adaptive < 1e-9);
    CHECK(sc.fspl == 0.0);
  }
  SUBCASE("band mismatch") {
    const TransmittanceGrid y0 = make_transmittance_grid(s, SubBand{"Y0", 0.327, 0.368, 0.003}, 0.9);
    const TransmittanceGrid y1 = make_transmittance_grid(s, SubBand{"Y1", 0.386, 0.422, 0.003}, 0.9);
    std::vector<BandCase> cases{{y1, fit_agnostic(y0).model, std::nullopt}};
    CHECK_ERROR(per_band_report(cases), ErrorKind::Mismatch);
  }
}

TEST_CASE("csv tables") {
  const SubBand band{"Y0", 0.327, 0.368, 0.003};
  const auto g = generate_grid(standard_profile(), kSmall, band);
  const AgnosticFit ag = fit_agnostic(g);
  const EvalReport only_ag = evaluate(g, &ag.model, nullptr);
  std::ostringstream a;
  write_slice_csv(a, only_ag, SliceAxis::Zenith);
  CHECK(a.str().rfind("theta,nrmse_agnostic,nrmse_fspl\n0,", 0) == 0);

  const EvalReport baseline = evaluate(g, nullptr, nullptr);
  std::ostringstream b;
  write_slice_csv(b, baseline, SliceAxis::Altitude);
  const std::string base_csv = b.str();
  CHECK(base_csv.rfind("l,nrmse_fspl\n", 0) == 0);
  CHECK(std::count(base_csv.begin(), base_csv.end(), '\n') == 4);

  std::ostringstream c;
  write_pathloss_curve_csv(c, g, &ag.model, nullptr, 0.5, 0.2, 45.0);
  const std::string curve = c.str();
  CHECK(curve.rfind("f_thz,pl_truth_db,pl_agnostic_db\n", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == static_cast<long>(g.n_f() + 1));
  try {
    std::ostringstream d;
    write_pathloss_curve_csv(d, g, &ag.model, nullptr, 0.6, 0.2, 45.0);
    FAIL("expected an off-grid error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Range);
    CHECK(std::string(e.what()).find("nearest valid value is 0.5") != std::string::npos);
  }
}

TEST_CASE("leave-one-theta-out") {
  const SubBand band{"Y0", 0.327, 0.368, 0.003};
  const ScenarioSpec s{"custom", {0.0, 0.5, 1.0}, {0.1, 0.3}, {0.0, 22.5, 45.0, 67.5, 90.0}};
  const auto p = AbsorptionProfile::model_exact(-0.4, -0.55, {-1.0, 0.2}, {-0.8}, band.f_lo, band.f_hi);
  const auto hold = holdout_theta(generate_grid(p, s, band), FitOptions{});
  REQUIRE(hold.size() == 5);
  CHECK_FALSE(hold.front().adaptive.has_value());
  CHECK_FALSE(hold.back().adaptive.has_value());
  CHECK(hold[2].adaptive.has_value());
  for (const auto& h : hold) CHECK(h.agnostic < 1e-6);
}

}  // TEST_SUITE
