#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "skyloss/atmosphere.hpp"
#include "skyloss/datagrid.hpp"
#include "skyloss/error.hpp"
#include "skyloss/evaluation.hpp"
#include "skyloss/model.hpp"
#include "skyloss/regression.hpp"

namespace fs = std::filesystem;
using namespace skyloss;

namespace {

constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NumericFailure:
    case ErrorKind::SingularFit:
    case ErrorKind::Sign:
    case ErrorKind::Underdetermined:
      return kExitNumeric;
    default:
      return kExitUsage;
  }
}

unsigned default_threads() {
  if (const char* env = std::getenv("SKYLOSS_THREADS")) {
    unsigned n = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec != std::errc() || ptr != end || n == 0)
      throw Error(ErrorKind::Range, "SKYLOSS_THREADS must be a positive integer, got '" + std::string(env) + "'");
    return n;
  }
  return 1;
}

double parse_number(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(ErrorKind::Parse, "bad number '" + text + "' in " + what);
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

// "a,b,c" or "start:step:count".
std::vector<double> parse_axis_values(const std::string& text, const std::string& what) {
  std::vector<double> values;
  const auto range = split(text, ':');
  if (range.size() == 3) {
    const double start = parse_number(range[0], what), step = parse_number(range[1], what);
    const double count = parse_number(range[2], what);
    if (!(count >= 1.0) || count != std::floor(count))
      throw Error(ErrorKind::Range, what + ": count must be a positive integer");
    for (int k = 0; k < static_cast<int>(count); ++k) values.push_back(start + k * step);
    return values;
  }
  for (const auto& item : split(text, ',')) values.push_back(parse_number(item, what));
  return values;
}

Position3D parse_position(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw Error(ErrorKind::Parse, what + " must be x,y,z in meters");
  return {parse_number(parts[0], what), parse_number(parts[1], what), parse_number(parts[2], what)};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create directory '" + dir.string() + "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string shape_of(const TransmittanceGrid& g) {
  std::ostringstream s;
  s << g.n_l() << "x" << g.n_d() << "x" << g.n_theta() << "x" << g.n_f() << " = " << g.size() << " cells";
  return s.str();
}

// generate

struct GenerateArgs {
  std::string scenario;
  std::string altitudes, distances, thetas;
  std::vector<std::string> bands;
  std::string profile = "standard";
  double step = kDefaultStepThz;
  std::string out = ".";
};

int cmd_generate(const GenerateArgs& a, unsigned threads) {
  ScenarioSpec scenario;
  const bool custom = !a.altitudes.empty() || !a.distances.empty() || !a.thetas.empty();
  if (custom == !a.scenario.empty())
    throw Error(ErrorKind::Range, "give either --scenario or all of --altitudes/--distances/--thetas");
  if (custom) {
    if (a.altitudes.empty() || a.distances.empty() || a.thetas.empty())
      throw Error(ErrorKind::Range, "custom axes need --altitudes, --distances and --thetas");
    scenario = {"custom", parse_axis_values(a.altitudes, "--altitudes"), parse_axis_values(a.distances, "--distances"),
                parse_axis_values(a.thetas, "--thetas")};
  } else {
    scenario = builtin_scenario(a.scenario);
  }
  scenario.validate();

  std::vector<SubBand> bands;
  for (const auto& name : a.bands) {
    if (name == "all") {
      for (const auto& b : builtin_band_names()) bands.push_back(builtin_band(b));
    } else {
      bands.push_back(builtin_band(name));
    }
  }
  for (auto& b : bands) {
    b.step = a.step;
    b.validate();
  }

  const AbsorptionProfile profile = a.profile == "standard" ? standard_profile() : load_profile(a.profile);
  ensure_dir(a.out);
  for (const auto& band : bands) {
    const TransmittanceGrid grid = generate_grid(profile, scenario, band, threads);
    const fs::path path = fs::path(a.out) / (scenario.name + "_" + band.name + ".csv");
    write_grid(grid, path);
    std::cout << path.string() << ": " << shape_of(grid) << "\n";
  }
  return 0;
}

// fit

struct FitArgs {
  std::string grid;
  std::string method = "both";
  int ph = 6, pv = 6, p = 6;
  bool gauss_newton = false;
  std::string out = ".";
};

int cmd_fit(const FitArgs& a, unsigned threads) {
  const TransmittanceGrid grid = read_grid(a.grid);
  FitOptions opt;
  opt.degree_h = a.ph;
  opt.degree_v = a.pv;
  opt.degree = a.p;
  opt.gauss_newton_step2 = a.gauss_newton;
  opt.workers = threads;

  ensure_dir(a.out);
  const std::string stem = fs::path(a.grid).stem().string();
  std::string report;
  auto summarize = [](const FitReport& r, const fs::path& path) {
    std::cout << r.method << ": " << path.string() << " (step1 SSE " << format_double(r.step1_sse) << ", excluded "
              << r.excluded_samples << ", clamp events " << r.clamp_events << ")\n";
  };
  if (a.method == "agnostic" || a.method == "both") {
    const AgnosticFit fit = fit_agnostic(grid, opt);
    const fs::path path = fs::path(a.out) / (stem + ".agnostic.yaml");
    export_model(fit.model, path);
    report += "---\n" + dump_fit_report(fit.report);
    summarize(fit.report, path);
  }
  if (a.method == "adaptive" || a.method == "both") {
    const AdaptiveFit fit = fit_adaptive(grid, opt);
    const fs::path path = fs::path(a.out) / (stem + ".adaptive.yaml");
    export_model(fit.model, path);
    report += "---\n" + dump_fit_report(fit.report);
    summarize(fit.report, path);
  }
  const fs::path report_path = fs::path(a.out) / (stem + ".fit-report.yaml");
  write_text(report_path, report);
  std::cout << "report: " << report_path.string() << "\n";
  return 0;
}

// predict

struct PredictArgs {
  std::string model;
  std::string p1, p2;
  double f = 0.0;
  std::string batch;
};

void print_prediction(const PathLossPrediction& p) {
  const LinkGeometry& g = p.geometry;
  std::cout << "L_total_db: " << format_double(p.total_db) << "\n"
            << "L_fspl_db: " << format_double(p.fspl_db) << "\n"
            << "L_abs_db: " << format_double(p.abs_db) << "\n"
            << "l_m: " << format_double(g.l) << "\n"
            << "d_m: " << format_double(g.d) << "\n"
            << "d_h_m: " << format_double(g.d_h) << "\n"
            << "d_v_m: " << format_double(g.d_v) << "\n"
            << "theta_deg: " << format_double(g.theta) << "\n";
  if (p.clamped) std::cout << "clamped: true\n";
}

// Batch rows: x1,y1,z1,x2,y2,z2,f_thz (meters, THz); optional header, # comments.
int predict_batch(const Model& m, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open batch file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  std::cout << "l_m,d_m,d_h_m,d_v_m,theta_deg,f_thz,L_fspl_db,L_abs_db,L_total_db,clamped\n";
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split(line, ',');
    if (line_no == 1 && !cols.empty() && cols[0] == "x1") continue;
    if (cols.size() != 7)
      throw Error(ErrorKind::Parse, path + ":" + std::to_string(line_no) + ": expected 7 columns x1,y1,z1,x2,y2,z2,f_thz");
    double v[7];
    for (int k = 0; k < 7; ++k) v[k] = parse_number(cols[k], path + ":" + std::to_string(line_no));
    PathLossPrediction p;
    try {
      p = predict_path_loss(m, {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6]});
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const LinkGeometry& g = p.geometry;
    std::cout << format_double(g.l) << ',' << format_double(g.d) << ',' << format_double(g.d_h) << ','
              << format_double(g.d_v) << ',' << format_double(g.theta) << ',' << format_double(v[6]) << ','
              << format_double(p.fspl_db) << ',' << format_double(p.abs_db) << ',' << format_double(p.total_db)
              << ',' << (p.clamped ? 1 : 0) << '\n';
  }
  return 0;
}

int cmd_predict(const PredictArgs& a) {
  const Model m = import_model(a.model);
  if (!a.batch.empty()) {
    if (!a.p1.empty() || !a.p2.empty()) throw Error(ErrorKind::Range, "--batch excludes --p1/--p2");
    return predict_batch(m, a.batch);
  }
  if (a.p1.empty() || a.p2.empty()) throw Error(ErrorKind::Range, "--p1, --p2 and --f are required without --batch");
  print_prediction(predict_path_loss(m, {parse_position(a.p1, "--p1"), parse_position(a.p2, "--p2"), a.f}));
  return 0;
}

// eval

struct EvalArgs {
  std::vector<std::string> grids;
  std::vector<std::string> agnostic, adaptive;
  std::string out = ".";
  std::string slice;
  bool holdout = false;
  int ph = 6, pv = 6, p = 6;
};

struct SlicePoint {
  double l = 0.0, d = 0.0, theta = 0.0;
};

SlicePoint parse_slice(const std::string& text) {
  SlicePoint s;
  bool have_l = false, have_d = false, have_t = false;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Parse, "--slice expects l=..,d=..,theta=..");
    const std::string key = item.substr(0, eq);
    const double v = parse_number(item.substr(eq + 1), "--slice");
    if (key == "l") s.l = v, have_l = true;
    else if (key == "d") s.d = v, have_d = true;
    else if (key == "theta") s.theta = v, have_t = true;
    else throw Error(ErrorKind::Parse, "--slice: unknown key '" + key + "' (l, d, theta)");
  }
  if (!have_l || !have_d || !have_t) throw Error(ErrorKind::Parse, "--slice needs l, d and theta");
  return s;
}

// The model whose band matches the grid; a lone model is always tried and
// rejected by check_model_matches if it does not fit.
template <typename M>
const M* pick_model(const std::vector<M>& models, const TransmittanceGrid& grid) {
  if (models.size() == 1) return &models.front();
  for (const auto& m : models)
    if (m.band.name == grid.band.name) return &m;
  if (models.empty()) return nullptr;
  throw Error(ErrorKind::Mismatch, "no model file was fitted for band '" + grid.band.name + "'");
}

int cmd_eval(const EvalArgs& a, unsigned threads) {
  if (a.grids.empty()) throw Error(ErrorKind::Range, "--grid is required");
  std::vector<AgnosticModel> ag;
  std::vector<AdaptiveModel> ad;
  for (const auto& path : a.agnostic) {
    Model m = import_model(path);
    if (!std::holds_alternative<AgnosticModel>(m))
      throw Error(ErrorKind::Mismatch, "'" + path + "' is not an agnostic model");
    ag.push_back(std::get<AgnosticModel>(std::move(m)));
  }
  for (const auto& path : a.adaptive) {
    Model m = import_model(path);
    if (!std::holds_alternative<AdaptiveModel>(m))
      throw Error(ErrorKind::Mismatch, "'" + path + "' is not an adaptive model");
    ad.push_back(std::get<AdaptiveModel>(std::move(m)));
  }
  const bool want_curve = !a.slice.empty();
  const SlicePoint slice = want_curve ? parse_slice(a.slice) : SlicePoint{};

  ensure_dir(a.out);
  std::vector<BandScore> scores;
  for (const auto& path : a.grids) {
    const TransmittanceGrid grid = read_grid(path);
    const AgnosticModel* mag = pick_model(ag, grid);
    const AdaptiveModel* mad = pick_model(ad, grid);
    const EvalReport report = evaluate(grid, mag, mad, threads);
    // Off-grid slices fail before anything is written for this grid.
    std::ostringstream curve;
    if (want_curve) write_pathloss_curve_csv(curve, grid, mag, mad, slice.l, slice.d, slice.theta);

    const fs::path dir = a.grids.size() == 1 ? fs::path(a.out) : fs::path(a.out) / fs::path(path).stem();
    ensure_dir(dir);
    for (SliceAxis axis : {SliceAxis::Altitude, SliceAxis::Distance, SliceAxis::Zenith}) {
      auto out = open_out(dir / (std::string("nrmse_vs_") + axis_name(axis) + ".csv"));
      write_slice_csv(out, report, axis);
    }
    if (want_curve) write_text(dir / "pathloss_vs_f.csv", curve.str());
    if (a.holdout) {
      FitOptions opt;
      opt.degree_h = a.ph;
      opt.degree_v = a.pv;
      opt.degree = a.p;
      opt.workers = threads;
      const auto hold = holdout_theta(grid, opt);
      auto out = open_out(dir / "holdout_theta.csv");
      write_holdout_csv(out, hold);
    }

    BandScore s;
    s.band = grid.band.name;
    std::cout << report.grid_id;
    for (const auto& m : report.methods) {
      std::cout << "  " << m.method << " NRMSE " << format_double(m.global.nrmse);
      if (m.method == "agnostic") s.agnostic = m.global.nrmse;
      if (m.method == "adaptive") s.adaptive = m.global.nrmse;
      if (m.method == "fspl") s.fspl = m.global.nrmse;
    }
    s.mean_absorption_db = report.mean_absorption_db;
    std::cout << "  mean absorption " << format_double(report.mean_absorption_db) << " dB\n";
    scores.push_back(std::move(s));
  }
  auto out = open_out(fs::path(a.out) / "subband_nrmse.csv");
  write_subband_csv(out, scores);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skyloss: THz aerial path-loss toolkit"};
  app.require_subcommand(1);
  unsigned threads = 0;

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "synthesize transmittance grids from an absorption profile");
  g->add_option("--scenario", gen.scenario, "Dr2Dr, MAAC or U2U");
  g->add_option("--altitudes", gen.altitudes, "custom altitudes in km: a,b,c or start:step:count");
  g->add_option("--distances", gen.distances, "custom distances in km");
  g->add_option("--thetas", gen.thetas, "custom zenith angles in deg");
  g->add_option("--band", gen.bands, "band name or 'all' (repeatable)")->required();
  g->add_option("--profile", gen.profile, "profile file or 'standard'");
  g->add_option("--step", gen.step, "frequency step in THz")->check(CLI::PositiveNumber);
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--threads", threads, "worker count")->check(CLI::PositiveNumber);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit agnostic and/or adaptive models to a grid");
  f->add_option("--grid", fit.grid, "grid CSV")->required()->check(CLI::ExistingFile);
  f->add_option("--method", fit.method, "agnostic, adaptive or both")
      ->check(CLI::IsMember({"agnostic", "adaptive", "both"}));
  f->add_option("--ph", fit.ph, "horizontal polynomial degree")->check(CLI::NonNegativeNumber);
  f->add_option("--pv", fit.pv, "vertical polynomial degree")->check(CLI::NonNegativeNumber);
  f->add_option("--p", fit.p, "adaptive polynomial degree")->check(CLI::NonNegativeNumber);
  f->add_flag("--gauss-newton", fit.gauss_newton, "refine the altitude fit in the linear domain");
  f->add_option("--out", fit.out, "output directory");
  f->add_option("--threads", threads, "worker count")->check(CLI::PositiveNumber);

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "path loss between two positions");
  p->add_option("--model", pred.model, "model file")->required()->check(CLI::ExistingFile);
  p->add_option("--p1", pred.p1, "x,y,z in meters");
  p->add_option("--p2", pred.p2, "x,y,z in meters");
  p->add_option("--f", pred.f, "frequency in THz");
  p->add_option("--batch", pred.batch, "CSV of x1,y1,z1,x2,y2,z2,f_thz rows")->check(CLI::ExistingFile);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score models and the FSPL baseline against grids");
  e->add_option("--grid", ev.grids, "grid CSV (repeatable)")->required()->check(CLI::ExistingFile);
  e->add_option("--agnostic", ev.agnostic, "agnostic model file (repeatable)")->check(CLI::ExistingFile);
  e->add_option("--adaptive", ev.adaptive, "adaptive model file (repeatable)")->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "output directory");
  e->add_option("--slice", ev.slice, "fixed l=..,d=..,theta=.. for the path-loss curve");
  e->add_flag("--holdout", ev.holdout, "leave-one-zenith-angle-out scores");
  e->add_option("--ph", ev.ph, "holdout horizontal degree")->check(CLI::NonNegativeNumber);
  e->add_option("--pv", ev.pv, "holdout vertical degree")->check(CLI::NonNegativeNumber);
  e->add_option("--p", ev.p, "holdout adaptive degree")->check(CLI::NonNegativeNumber);
  e->add_option("--threads", threads, "worker count")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (threads == 0) threads = default_threads();
    if (g->parsed()) return cmd_generate(gen, threads);
    if (f->parsed()) return cmd_fit(fit, threads);
    if (p->parsed()) return cmd_predict(pred);
    if (e->parsed()) return cmd_eval(ev, threads);
  } catch (const Error& err) {
    std::cerr << "skyloss: " << to_string(err.kind()) << ": " << err.what() << "\n";
    return exit_code_for(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "skyloss: internal error: " << err.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
