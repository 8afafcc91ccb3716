#include "skyloss/regression.hpp"

#include <yaml-cpp/yaml.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "skyloss/error.hpp"
#include "skyloss/geometry.hpp"
#include "skyloss/parallel.hpp"

namespace skyloss {

namespace {

struct BranchResult {
  double b2 = 0.0;
  PolyFit poly;
  BranchReport report;
};

// Steps 2 and 3 of one branch, from step-1 slopes indexed [l][f].
BranchResult cascade_branch(const std::vector<double>& b1, const std::vector<double>& altitudes,
                            const std::vector<double>& freqs, int degree, const FrequencyMap& map,
                            bool gauss_newton, std::string label) {
  const std::size_t nl = altitudes.size(), nf = freqs.size();
  BranchResult out;
  out.report.label = std::move(label);

  std::vector<AltitudePair> clamped(nl * nf);
  for (std::size_t il = 0; il < nl; ++il)
    for (std::size_t jf = 0; jf < nf; ++jf) {
      double slope = b1[il * nf + jf];
      if (!(slope < 0.0)) {
        slope = -kClampEpsilon;
        ++out.report.clamp_events;
      }
      clamped[jf * nl + il] = {altitudes[il], slope};
    }

  std::vector<double> b2(nf), r2(nf);
  for (std::size_t jf = 0; jf < nf; ++jf) {
    std::span<const AltitudePair> pairs(clamped.data() + jf * nl, nl);
    Step2Fit fit = fit_exponential_altitude(pairs);
    if (gauss_newton) fit = refine_exponential_altitude(pairs, fit);
    b2[jf] = fit.b2;
    r2[jf] = fit.r2;
  }
  double b2_sum = 0.0, r2_sum = 0.0;
  for (std::size_t jf = 0; jf < nf; ++jf) {
    b2_sum += b2[jf];
    r2_sum += r2[jf];
  }
  out.b2 = b2_sum / static_cast<double>(nf);
  out.report.step2_b2_mean = out.b2;
  out.report.step2_b2_spread = *std::max_element(b2.begin(), b2.end()) - *std::min_element(b2.begin(), b2.end());
  out.report.step2_r2_min = *std::min_element(r2.begin(), r2.end());
  out.report.step2_r2_mean = r2_sum / static_cast<double>(nf);

  std::vector<FrequencySample> amplitude(nf);
  for (std::size_t jf = 0; jf < nf; ++jf) {
    std::span<const AltitudePair> pairs(clamped.data() + jf * nl, nl);
    const double a2 = gauss_newton ? refit_amplitude_linear(pairs, out.b2) : -std::exp(refit_amplitude_log(pairs, out.b2));
    amplitude[jf] = {freqs[jf], a2};
    for (const auto& p : pairs) {
      const double r = std::log(-p.b1) - std::log(-a2) - out.b2 * p.l;
      out.report.step2_refit_sse += r * r;
    }
  }

  out.poly = fit_polynomial(amplitude, degree, map);
  for (const auto& s : amplitude) {
    const double r = s.y - out.poly(s.f);
    out.report.step3_sse += r * r;
    out.report.step3_max_abs = std::max(out.report.step3_max_abs, std::abs(r));
  }
  return out;
}

void check_degree(int degree) {
  if (degree < 0) throw Error(ErrorKind::Range, "polynomial degree must be >= 0");
}

std::string at_cell(const TransmittanceGrid& g, std::size_t il, std::size_t jf) {
  return "l=" + format_double(g.scenario.altitudes[il]) + " km, f=" + format_double(g.frequencies[jf]) + " THz";
}

[[noreturn]] void rethrow_with(const Error& e, const std::string& where) {
  throw Error(e.kind(), where + ": " + e.what());
}

}  // namespace

LogLinearFit2 fit_loglinear_2var(std::span<const DistanceSample2> samples) {
  if (samples.size() < 2) throw Error(ErrorKind::SingularFit, "two-variable distance fit needs >= 2 samples");
  double shh = 0.0, shv = 0.0, svv = 0.0, shy = 0.0, svy = 0.0;
  for (const auto& s : samples) {
    shh += s.d_h * s.d_h;
    shv += s.d_h * s.d_v;
    svv += s.d_v * s.d_v;
    shy += s.d_h * s.ln_tau;
    svy += s.d_v * s.ln_tau;
  }
  const double det = shh * svv - shv * shv;
  if (!(shh > 0.0) || !(svv > 0.0) || !(det > 1e-12 * shh * svv))
    throw Error(ErrorKind::SingularFit, "rank-deficient (d_h, d_v) design: samples lie on a single ray");
  LogLinearFit2 fit;
  fit.b_h = (svv * shy - shv * svy) / det;
  fit.b_v = (shh * svy - shv * shy) / det;
  fit.n_samples = samples.size();
  for (const auto& s : samples) {
    const double r = s.ln_tau - fit.b_h * s.d_h - fit.b_v * s.d_v;
    fit.sse += r * r;
  }
  return fit;
}

LogLinearFit1 fit_loglinear_1var(std::span<const DistanceSample1> samples) {
  if (samples.empty()) throw Error(ErrorKind::SingularFit, "one-variable distance fit needs >= 1 sample");
  double sdd = 0.0, sdy = 0.0;
  for (const auto& s : samples) {
    sdd += s.d * s.d;
    sdy += s.d * s.ln_tau;
  }
  if (!(sdd > 0.0)) throw Error(ErrorKind::SingularFit, "one-variable distance fit needs a positive distance");
  LogLinearFit1 fit;
  fit.b = sdy / sdd;
  fit.n_samples = samples.size();
  for (const auto& s : samples) {
    const double r = s.ln_tau - fit.b * s.d;
    fit.sse += r * r;
  }
  return fit;
}

Step2Fit fit_exponential_altitude(std::span<const AltitudePair> pairs) {
  if (pairs.size() < 2) throw Error(ErrorKind::SingularFit, "altitude fit needs >= 2 altitudes");
  for (const auto& p : pairs)
    if (!(p.b1 < 0.0))
      throw Error(ErrorKind::Sign, "altitude fit needs strictly negative step-1 slopes (got " + format_double(p.b1) +
                                       " at l=" + format_double(p.l) + " km)");
  const double n = static_cast<double>(pairs.size());
  double l_mean = 0.0, y_mean = 0.0;
  for (const auto& p : pairs) {
    l_mean += p.l;
    y_mean += std::log(-p.b1);
  }
  l_mean /= n;
  y_mean /= n;
  double sll = 0.0, sly = 0.0, syy = 0.0;
  for (const auto& p : pairs) {
    const double dl = p.l - l_mean, dy = std::log(-p.b1) - y_mean;
    sll += dl * dl;
    sly += dl * dy;
    syy += dy * dy;
  }
  if (!(sll > 0.0)) throw Error(ErrorKind::SingularFit, "altitude fit needs >= 2 distinct altitudes");
  Step2Fit fit;
  fit.b2 = sly / sll;
  const double intercept = y_mean - fit.b2 * l_mean;
  fit.a2 = -std::exp(intercept);
  double ss_res = 0.0;
  for (const auto& p : pairs) {
    const double r = std::log(-p.b1) - intercept - fit.b2 * p.l;
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

Step2Fit refine_exponential_altitude(std::span<const AltitudePair> pairs, Step2Fit start) {
  auto sse_of = [&](double a, double b) {
    double s = 0.0;
    for (const auto& p : pairs) {
      const double r = p.b1 - a * std::exp(b * p.l);
      s += r * r;
    }
    return s;
  };
  double a = start.a2, b = start.b2, sse = sse_of(a, b), damping = 1e-3;
  for (int iter = 0; iter < 200; ++iter) {
    double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
    for (const auto& p : pairs) {
      const double e = std::exp(b * p.l);
      const double r = p.b1 - a * e;
      const double da = e, db = a * p.l * e;
      jaa += da * da;
      jab += da * db;
      jbb += db * db;
      ga += da * r;
      gb += db * r;
    }
    bool improved = false;
    while (damping < 1e12) {
      const double maa = jaa * (1.0 + damping), mbb = jbb * (1.0 + damping);
      const double det = maa * mbb - jab * jab;
      if (!(det > 0.0)) {
        damping *= 10.0;
        continue;
      }
      const double step_a = (mbb * ga - jab * gb) / det;
      const double step_b = (maa * gb - jab * ga) / det;
      const double trial = sse_of(a + step_a, b + step_b);
      if (trial < sse && a + step_a < 0.0) {
        const double gain = sse - trial;
        a += step_a;
        b += step_b;
        sse = trial;
        damping = std::max(damping / 10.0, 1e-12);
        improved = gain > 1e-15 * std::max(sse, 1e-300);
        break;
      }
      damping *= 10.0;
    }
    if (!improved) break;
  }
  Step2Fit out{a, b, 1.0};
  double mean = 0.0;
  for (const auto& p : pairs) mean += p.b1;
  mean /= static_cast<double>(pairs.size());
  double tot = 0.0;
  for (const auto& p : pairs) tot += (p.b1 - mean) * (p.b1 - mean);
  out.r2 = tot > 0.0 ? std::clamp(1.0 - sse / tot, 0.0, 1.0) : 1.0;
  return out;
}

double refit_amplitude_log(std::span<const AltitudePair> pairs, double b2) {
  if (pairs.empty()) throw Error(ErrorKind::SingularFit, "amplitude refit needs >= 1 altitude");
  double s = 0.0;
  for (const auto& p : pairs) {
    if (!(p.b1 < 0.0)) throw Error(ErrorKind::Sign, "amplitude refit needs strictly negative slopes");
    s += std::log(-p.b1) - b2 * p.l;
  }
  return s / static_cast<double>(pairs.size());
}

double refit_amplitude_linear(std::span<const AltitudePair> pairs, double b2) {
  if (pairs.empty()) throw Error(ErrorKind::SingularFit, "amplitude refit needs >= 1 altitude");
  double num = 0.0, den = 0.0;
  for (const auto& p : pairs) {
    const double e = std::exp(b2 * p.l);
    num += p.b1 * e;
    den += e * e;
  }
  return num / den;
}

PolyFit fit_polynomial(std::span<const FrequencySample> samples, int degree, const FrequencyMap& f_map) {
  check_degree(degree);
  std::vector<double> fs;
  for (const auto& s : samples) fs.push_back(s.f);
  std::sort(fs.begin(), fs.end());
  const auto distinct = static_cast<int>(std::unique(fs.begin(), fs.end()) - fs.begin());
  if (distinct < degree + 1)
    throw Error(ErrorKind::Underdetermined, "degree-" + std::to_string(degree) + " polynomial needs >= " +
                                                std::to_string(degree + 1) + " distinct frequencies, got " +
                                                std::to_string(distinct));
  const Eigen::Index rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd vander(rows, degree + 1);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double u = f_map(samples[i].f);
    double power = 1.0;
    for (int j = 0; j <= degree; ++j) {
      vander(i, j) = power;
      power *= u;
    }
    rhs(i) = samples[i].y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vander);
  if (qr.rank() < degree + 1) throw Error(ErrorKind::SingularFit, "Vandermonde system is rank deficient");
  const Eigen::VectorXd coeffs = qr.solve(rhs);
  return {std::vector<double>(coeffs.data(), coeffs.data() + coeffs.size()), f_map};
}

AgnosticFit fit_agnostic(const TransmittanceGrid& grid, const FitOptions& options) {
  validate(grid);
  check_degree(options.degree_h);
  check_degree(options.degree_v);
  const std::size_t nl = grid.n_l(), nd = grid.n_d(), nt = grid.n_theta(), nf = grid.n_f();

  std::vector<DistanceSplit> split(nd * nt);
  for (std::size_t id = 0; id < nd; ++id)
    for (std::size_t it = 0; it < nt; ++it) split[id * nt + it] = decompose(grid.scenario.distances[id], grid.scenario.thetas[it]);

  AgnosticFit out;
  out.b1_h.assign(nl * nf, 0.0);
  out.b1_v.assign(nl * nf, 0.0);
  std::vector<double> sse(nl * nf, 0.0);
  std::vector<std::size_t> kept(nl * nf, 0);

  parallel_for(nl * nf, options.workers, [&](std::size_t cell) {
    const std::size_t il = cell / nf, jf = cell % nf;
    std::vector<DistanceSample2> samples;
    samples.reserve(nd * nt);
    for (std::size_t id = 0; id < nd; ++id)
      for (std::size_t it = 0; it < nt; ++it) {
        const double tau = grid.at(il, id, it, jf);
        if (tau < kTauFloor) continue;
        const DistanceSplit& s = split[id * nt + it];
        samples.push_back({s.d_h, s.d_v, std::log(tau)});
      }
    try {
      const LogLinearFit2 fit = fit_loglinear_2var(samples);
      out.b1_h[cell] = fit.b_h;
      out.b1_v[cell] = fit.b_v;
      sse[cell] = fit.sse;
      kept[cell] = fit.n_samples;
    } catch (const Error& e) {
      rethrow_with(e, "step 1 at " + at_cell(grid, il, jf));
    }
  });

  FitReport& rep = out.report;
  rep.method = "agnostic";
  rep.scenario = grid.scenario.name;
  rep.band = grid.band.name;
  rep.n_samples = grid.size();
  for (std::size_t c = 0; c < nl * nf; ++c) {
    rep.step1_sse += sse[c];
    rep.excluded_samples += nd * nt - kept[c];
  }

  const FrequencyMap map = FrequencyMap::for_band(grid.band.f_lo, grid.band.f_hi);
  BranchResult branch[2];
  const std::vector<double>* tables[2] = {&out.b1_h, &out.b1_v};
  const int degrees[2] = {options.degree_h, options.degree_v};
  const char* labels[2] = {"h", "v"};
  for (int k = 0; k < 2; ++k) {
    try {
      branch[k] = cascade_branch(*tables[k], grid.scenario.altitudes, grid.frequencies, degrees[k], map,
                                 options.gauss_newton_step2, labels[k]);
    } catch (const Error& e) {
      rethrow_with(e, std::string("steps 2-3, branch ") + labels[k]);
    }
    rep.clamp_events += branch[k].report.clamp_events;
    rep.branches.push_back(branch[k].report);
  }

  AgnosticModel& m = out.model;
  m.b2_h = branch[0].b2;
  m.b2_v = branch[1].b2;
  m.poly_h = branch[0].poly;
  m.poly_v = branch[1].poly;
  m.band = grid.band;
  m.meta.training_scenario = grid.scenario.name;
  m.meta.degrees = {options.degree_h, options.degree_v};
  m.meta.excluded_samples = rep.excluded_samples;
  m.meta.clamp_events = rep.clamp_events;
  m.meta.gauss_newton = options.gauss_newton_step2;
  return out;
}

AdaptiveFit fit_adaptive(const TransmittanceGrid& grid, const FitOptions& options) {
  validate(grid);
  check_degree(options.degree);
  const std::size_t nl = grid.n_l(), nd = grid.n_d(), nt = grid.n_theta(), nf = grid.n_f();

  // Step 1 for every (theta, l, f); slopes stored [theta][l][f].
  std::vector<double> b1(nt * nl * nf, 0.0), sse(nt * nl * nf, 0.0);
  std::vector<std::size_t> kept(nt * nl * nf, 0);
  parallel_for(nt * nl * nf, options.workers, [&](std::size_t cell) {
    const std::size_t it = cell / (nl * nf);
    const std::size_t il = (cell / nf) % nl;
    const std::size_t jf = cell % nf;
    std::vector<DistanceSample1> samples;
    samples.reserve(nd);
    for (std::size_t id = 0; id < nd; ++id) {
      const double tau = grid.at(il, id, it, jf);
      if (tau < kTauFloor) continue;
      samples.push_back({grid.scenario.distances[id], std::log(tau)});
    }
    try {
      const LogLinearFit1 fit = fit_loglinear_1var(samples);
      b1[cell] = fit.b;
      sse[cell] = fit.sse;
      kept[cell] = fit.n_samples;
    } catch (const Error& e) {
      rethrow_with(e, "theta=" + format_double(grid.scenario.thetas[it]) + " deg, step 1 at " + at_cell(grid, il, jf));
    }
  });

  AdaptiveFit out;
  FitReport& rep = out.report;
  rep.method = "adaptive";
  rep.scenario = grid.scenario.name;
  rep.band = grid.band.name;
  rep.n_samples = grid.size();
  out.step1_sse_by_theta.assign(nt, 0.0);
  for (std::size_t c = 0; c < nt * nl * nf; ++c) {
    out.step1_sse_by_theta[c / (nl * nf)] += sse[c];
    rep.excluded_samples += nd - kept[c];
  }
  for (double s : out.step1_sse_by_theta) rep.step1_sse += s;

  const FrequencyMap map = FrequencyMap::for_band(grid.band.f_lo, grid.band.f_hi);
  std::vector<BranchResult> branches(nt);
  parallel_for(nt, options.workers, [&](std::size_t it) {
    const std::string label = "theta=" + format_double(grid.scenario.thetas[it]);
    const std::vector<double> slice(b1.begin() + it * nl * nf, b1.begin() + (it + 1) * nl * nf);
    try {
      branches[it] = cascade_branch(slice, grid.scenario.altitudes, grid.frequencies, options.degree, map,
                                    options.gauss_newton_step2, label);
    } catch (const Error& e) {
      rethrow_with(e, label + " deg, steps 2-3");
    }
  });

  AdaptiveModel& m = out.model;
  for (std::size_t it = 0; it < nt; ++it) {
    m.entries.push_back({grid.scenario.thetas[it], branches[it].b2, branches[it].poly});
    rep.clamp_events += branches[it].report.clamp_events;
    rep.branches.push_back(branches[it].report);
  }
  m.band = grid.band;
  m.meta.training_scenario = grid.scenario.name;
  m.meta.degrees = {options.degree};
  m.meta.excluded_samples = rep.excluded_samples;
  m.meta.clamp_events = rep.clamp_events;
  m.meta.gauss_newton = options.gauss_newton_step2;
  return out;
}

double induced_step1_sse(const TransmittanceGrid& grid, const AgnosticFit& fit, std::size_t theta_index) {
  if (theta_index >= grid.n_theta()) throw Error(ErrorKind::Range, "theta index out of range");
  if (fit.b1_h.size() != grid.n_l() * grid.n_f()) throw Error(ErrorKind::Mismatch, "fit does not match grid");
  const double theta = grid.scenario.thetas[theta_index];
  const double s = sin_deg(theta), c = cos_deg(theta);
  double total = 0.0;
  for (std::size_t il = 0; il < grid.n_l(); ++il)
    for (std::size_t jf = 0; jf < grid.n_f(); ++jf) {
      const std::size_t cell = il * grid.n_f() + jf;
      const double slope = fit.b1_h[cell] * s + fit.b1_v[cell] * c;
      for (std::size_t id = 0; id < grid.n_d(); ++id) {
        const double tau = grid.at(il, id, theta_index, jf);
        if (tau < kTauFloor) continue;
        const double r = std::log(tau) - slope * grid.scenario.distances[id];
        total += r * r;
      }
    }
  return total;
}

std::string dump_fit_report(const FitReport& report) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "method" << YAML::Value << report.method;
  out << YAML::Key << "scenario" << YAML::Value << report.scenario;
  out << YAML::Key << "band" << YAML::Value << report.band;
  out << YAML::Key << "units" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "length" << YAML::Value
      << "km" << YAML::Key << "frequency" << YAML::Value << "THz" << YAML::EndMap;
  out << YAML::Key << "samples" << YAML::Value << report.n_samples;
  out << YAML::Key << "excluded_samples" << YAML::Value << report.excluded_samples;
  out << YAML::Key << "tau_floor" << YAML::Value << kTauFloor;
  out << YAML::Key << "clamp_events" << YAML::Value << report.clamp_events;
  out << YAML::Key << "clamp_epsilon" << YAML::Value << kClampEpsilon;
  out << YAML::Key << "intercept_refit_after_b2_freeze" << YAML::Value << true;
  out << YAML::Key << "step1_sse" << YAML::Value << report.step1_sse;
  out << YAML::Key << "branches" << YAML::Value << YAML::BeginSeq;
  for (const auto& b : report.branches) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "branch" << YAML::Value << b.label;
    out << YAML::Key << "b2_mean" << YAML::Value << b.step2_b2_mean;
    out << YAML::Key << "b2_spread" << YAML::Value << b.step2_b2_spread;
    out << YAML::Key << "step2_r2_min" << YAML::Value << b.step2_r2_min;
    out << YAML::Key << "step2_r2_mean" << YAML::Value << b.step2_r2_mean;
    out << YAML::Key << "step2_refit_sse" << YAML::Value << b.step2_refit_sse;
    out << YAML::Key << "step3_sse" << YAML::Value << b.step3_sse;
    out << YAML::Key << "step3_max_abs" << YAML::Value << b.step3_max_abs;
    out << YAML::Key << "clamp_events" << YAML::Value << b.clamp_events;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace skyloss
