#include "skyloss/datagrid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "skyloss/error.hpp"
#include "skyloss/geometry.hpp"

namespace skyloss {

namespace {

// Snapped to 1e-9 so e.g. 0.01 + 9 * 0.01 is the double nearest 0.1.
std::vector<double> arange(double start, double step, int count) {
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) v[i] = std::round((start + i * step) * 1e9) / 1e9;
  return v;
}

std::vector<double> zenith_axis() { return arange(0.0, 4.5, 21); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  // "D-G", "D–G" and "dg" all name the same band.
  std::string squeezed;
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(out[i]);
    if (c == '-' || c == '_' || c == ' ') continue;
    if (c == 0xE2 && i + 2 < out.size() && static_cast<unsigned char>(out[i + 1]) == 0x80 &&
        static_cast<unsigned char>(out[i + 2]) == 0x93) {
      i += 2;
      continue;
    }
    squeezed.push_back(out[i]);
  }
  return squeezed;
}

struct BandRow {
  const char* name;
  double f_lo;
  double f_hi;
};

constexpr BandRow kBands[] = {
    {"D-G", 0.120, 0.300}, {"Y0", 0.327, 0.368},   {"Y1", 0.386, 0.423},   {"Y2", 0.454, 0.470},
    {"WR0", 0.493, 0.525}, {"WR1", 0.594, 0.618},  {"WR2", 0.625, 0.710},  {"THz0", 0.790, 0.830},
    {"THz1", 0.836, 0.910}, {"THz2", 0.920, 0.960},
};

std::size_t samples_in(double f_lo, double f_hi, double step) {
  return static_cast<std::size_t>(std::floor((f_hi - f_lo) / step + 1e-9)) + 1;
}

void check_axis(const std::vector<double>& axis, const char* what) {
  if (axis.empty()) throw Error(ErrorKind::Range, std::string(what) + " axis is empty");
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) throw Error(ErrorKind::Range, std::string(what) + " axis has a non-finite value");
    if (i > 0 && !(axis[i] > axis[i - 1]))
      throw Error(ErrorKind::Range, std::string(what) + " axis is not strictly increasing");
  }
}

std::string parse_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

double parse_field(std::string_view text, std::size_t line, const char* column) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty())
    throw Error(ErrorKind::Parse,
                parse_prefix(line) + "cannot parse " + column + " value '" + std::string(text) + "'");
  return value;
}

struct Row {
  double l, d, theta, f, tau;
  std::size_t line;
};

std::vector<Row> parse_rows(std::istream& in, const RowFilter& filter) {
  std::string text;
  std::size_t line = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, text)) return false;
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    return true;
  };
  if (!next() || text != kGridMagic)
    throw Error(ErrorKind::Parse, parse_prefix(1) + "expected '" + std::string(kGridMagic) + "'");
  if (!next() || text != kGridHeader)
    throw Error(ErrorKind::Parse, parse_prefix(2) + "expected header '" + std::string(kGridHeader) + "'");

  static constexpr const char* kColumns[] = {"l_km", "d_km", "theta_deg", "f_thz", "tau"};
  std::vector<Row> rows;
  while (next()) {
    if (text.empty()) continue;
    double v[5];
    std::size_t start = 0;
    for (int c = 0; c < 5; ++c) {
      const std::size_t comma = text.find(',', start);
      if ((c < 4) == (comma == std::string::npos))
        throw Error(ErrorKind::Parse, parse_prefix(line) + "expected 5 comma-separated fields");
      const std::size_t end = c < 4 ? comma : text.size();
      v[c] = parse_field(std::string_view(text).substr(start, end - start), line, kColumns[c]);
      start = end + 1;
    }
    if (!(v[4] > 0.0 && v[4] <= 1.0))
      throw Error(ErrorKind::Parse, parse_prefix(line) + "tau = " + format_double(v[4]) + " outside (0, 1]");
    if (v[0] < 0.0 || !(v[1] > 0.0) || v[2] < 0.0 || v[2] > 90.0 || !(v[3] > 0.0))
      throw Error(ErrorKind::Parse, parse_prefix(line) + "coordinate out of range");
    if (!filter.accepts(v[0], v[1], v[2], v[3])) continue;
    rows.push_back({v[0], v[1], v[2], v[3], v[4], line});
  }
  if (rows.empty()) throw Error(ErrorKind::Parse, "grid file has no data rows");
  return rows;
}

void check_frequency_spacing(const std::vector<double>& f) {
  if (f.size() < 3) return;
  const double step = (f.back() - f.front()) / static_cast<double>(f.size() - 1);
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double gap = f[i] - f[i - 1];
    if (std::abs(gap - step) > 1e-6 * step)
      throw Error(ErrorKind::Parse, "inconsistent frequency spacing between " + format_double(f[i - 1]) +
                                        " and " + format_double(f[i]) + " THz (expected step " +
                                        format_double(step) + ")");
  }
}

SubBand infer_band(const std::vector<double>& f) {
  if (f.size() == 1) return {"custom", f.front(), f.front(), kDefaultStepThz};
  const double raw_step = (f.back() - f.front()) / static_cast<double>(f.size() - 1);
  const double step = std::round(raw_step * 1e9) / 1e9;
  if (auto name = match_builtin_band(f.front(), f.back(), step, f.size())) {
    SubBand b = builtin_band(*name);
    b.step = step;
    return b;
  }
  return {"custom", f.front(), f.back(), raw_step};
}

ScenarioSpec infer_scenario(std::vector<double> l, std::vector<double> d, std::vector<double> theta) {
  ScenarioSpec s{"custom", std::move(l), std::move(d), std::move(theta)};
  auto close = [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) > 1e-9) return false;
    return true;
  };
  for (const auto& name : builtin_scenario_names()) {
    const ScenarioSpec b = builtin_scenario(name);
    if (close(s.altitudes, b.altitudes) && close(s.distances, b.distances) && close(s.thetas, b.thetas)) {
      s.name = b.name;
      break;
    }
  }
  return s;
}

TransmittanceGrid assemble(ScenarioSpec scenario, std::vector<double> freqs) {
  SubBand band = infer_band(freqs);
  TransmittanceGrid grid;
  grid.scenario = std::move(scenario);
  grid.band = std::move(band);
  grid.frequencies = std::move(freqs);
  grid.values.assign(grid.size(), 0.0);
  return grid;
}

std::string coord_text(double l, double d, double theta, double f) {
  return "(" + format_double(l) + ", " + format_double(d) + ", " + format_double(theta) + ", " +
         format_double(f) + ")";
}

// Sorted distinct values, merging neighbours closer than 1e-9 (relative);
// the smallest member represents each cluster.
std::vector<double> cluster_axis(const std::vector<double>& values) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> axis;
  for (double v : sorted)
    if (axis.empty() || std::abs(v - axis.back()) > 1e-9 * std::max(1.0, std::abs(v))) axis.push_back(v);
  return axis;
}

std::size_t axis_index(const std::vector<double>& axis, double v) {
  auto it = std::lower_bound(axis.begin(), axis.end(), v - 1e-9 * std::max(1.0, std::abs(v)));
  return static_cast<std::size_t>(it - axis.begin());
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void ScenarioSpec::validate() const {
  check_axis(altitudes, "altitude");
  check_axis(distances, "distance");
  check_axis(thetas, "zenith");
  if (altitudes.front() < 0.0) throw Error(ErrorKind::Range, "altitudes must be >= 0 km");
  if (!(distances.front() > 0.0)) throw Error(ErrorKind::Range, "distances must be > 0 km");
  if (thetas.front() < 0.0 || thetas.back() > 90.0)
    throw Error(ErrorKind::Range, "zenith angles must lie in [0, 90] deg");
}

void SubBand::validate() const {
  if (!(f_lo >= 0.1 && f_lo < f_hi && f_hi <= 1.0))
    throw Error(ErrorKind::Range, "band '" + name + "' span [" + format_double(f_lo) + ", " +
                                      format_double(f_hi) + "] THz not within 0.1 <= f_lo < f_hi <= 1.0");
  if (!(step > 0.0) || step > f_hi - f_lo)
    throw Error(ErrorKind::Range, "band '" + name + "' step must be positive and not exceed the span");
}

std::size_t SubBand::sample_count() const { return samples_in(f_lo, f_hi, step); }

std::vector<double> SubBand::frequencies() const {
  std::vector<double> f(sample_count());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = f_lo + static_cast<double>(k) * step;
  return f;
}

const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names{"Dr2Dr", "MAAC", "U2U"};
  return names;
}

const std::vector<std::string>& builtin_band_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& b : kBands) v.emplace_back(b.name);
    return v;
  }();
  return names;
}

ScenarioSpec builtin_scenario(std::string_view name) {
  const std::string key = lower(name);
  if (key == "dr2dr") return {"Dr2Dr", arange(0.0, 0.01, 51), arange(0.01, 0.01, 10), zenith_axis()};
  if (key == "maac") return {"MAAC", arange(1.0, 0.5, 29), arange(0.5, 0.5, 20), zenith_axis()};
  if (key == "u2u") return {"U2U", arange(15.0, 0.5, 71), arange(0.5, 0.5, 100), zenith_axis()};
  throw Error(ErrorKind::Lookup, "unknown scenario '" + std::string(name) + "' (valid: Dr2Dr, MAAC, U2U)");
}

SubBand builtin_band(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& b : kBands)
    if (lower(b.name) == key) return {b.name, b.f_lo, b.f_hi, kDefaultStepThz};
  std::string valid;
  for (const auto& n : builtin_band_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::Lookup, "unknown band '" + std::string(name) + "' (valid: " + valid + ")");
}

std::optional<std::string> match_builtin_band(double f_lo, double f_last, double step, std::size_t count) {
  for (const auto& b : kBands) {
    if (std::abs(f_lo - b.f_lo) > 1e-9) continue;
    if (f_last > b.f_hi + 1e-9) continue;
    if (samples_in(b.f_lo, b.f_hi, step) == count) return std::string(b.name);
  }
  return std::nullopt;
}

TransmittanceGrid make_transmittance_grid(ScenarioSpec scenario, SubBand band, double fill) {
  scenario.validate();
  band.validate();
  TransmittanceGrid grid;
  grid.frequencies = band.frequencies();
  grid.scenario = std::move(scenario);
  grid.band = std::move(band);
  grid.values.assign(grid.size(), fill);
  return grid;
}

void validate(const TransmittanceGrid& grid) {
  grid.scenario.validate();
  check_axis(grid.frequencies, "frequency");
  if (grid.values.size() != grid.size())
    throw Error(ErrorKind::Mismatch, "grid value count does not match its axes");
  for (double v : grid.values)
    if (!(v > 0.0 && v <= 1.0)) throw Error(ErrorKind::Range, "transmittance " + format_double(v) + " outside (0, 1]");
}

PathLossGrid path_loss_grid(const TransmittanceGrid& tau) {
  validate(tau);
  PathLossGrid pl;
  pl.scenario = tau.scenario;
  pl.band = tau.band;
  pl.frequencies = tau.frequencies;
  pl.values.resize(tau.values.size());
  for (std::size_t il = 0; il < tau.n_l(); ++il)
    for (std::size_t id = 0; id < tau.n_d(); ++id) {
      const double d_m = tau.scenario.distances[id] * 1e3;
      for (std::size_t it = 0; it < tau.n_theta(); ++it)
        for (std::size_t jf = 0; jf < tau.n_f(); ++jf) {
          const std::size_t k = tau.index(il, id, it, jf);
          pl.values[k] = fspl_db(tau.frequencies[jf], d_m) - 10.0 * std::log10(tau.values[k]);
        }
    }
  return pl;
}

bool RowFilter::accepts(double l, double d, double theta, double f) const {
  auto in = [](const std::optional<std::pair<double, double>>& r, double v) {
    return !r || (v >= r->first && v <= r->second);
  };
  return in(l_km, l) && in(d_km, d) && in(theta_deg, theta) && in(f_thz, f);
}

void write_grid(const TransmittanceGrid& grid, std::ostream& out) {
  validate(grid);
  out << kGridMagic << '\n' << kGridHeader << '\n';
  std::string line;
  for (std::size_t il = 0; il < grid.n_l(); ++il) {
    const std::string l = format_double(grid.scenario.altitudes[il]);
    for (std::size_t id = 0; id < grid.n_d(); ++id) {
      const std::string d = format_double(grid.scenario.distances[id]);
      for (std::size_t it = 0; it < grid.n_theta(); ++it) {
        const std::string t = format_double(grid.scenario.thetas[it]);
        for (std::size_t jf = 0; jf < grid.n_f(); ++jf) {
          line.clear();
          line.append(l).append(",").append(d).append(",").append(t).append(",");
          line.append(format_double(grid.frequencies[jf])).append(",");
          line.append(format_double(grid.at(il, id, it, jf))).append("\n");
          out << line;
        }
      }
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing grid");
}

void write_grid(const TransmittanceGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  write_grid(grid, out);
}

TransmittanceGrid read_grid(std::istream& in, const RowFilter& filter) {
  const std::vector<Row> rows = parse_rows(in, filter);
  auto same = [](const Row& a, const Row& b, int depth) {
    // depth: number of leading coordinates compared (l, d, theta).
    return (depth < 1 || a.l == b.l) && (depth < 2 || a.d == b.d) && (depth < 3 || a.theta == b.theta);
  };

  std::vector<double> f_axis, t_axis, d_axis, l_axis;
  std::size_t i = 0;
  while (i < rows.size() && same(rows[i], rows[0], 3)) f_axis.push_back(rows[i++].f);
  const std::size_t nf = f_axis.size();
  for (i = 0; i < rows.size() && same(rows[i], rows[0], 2); i += nf) t_axis.push_back(rows[i].theta);
  const std::size_t stride_d = nf * t_axis.size();
  for (i = 0; i < rows.size() && same(rows[i], rows[0], 1); i += stride_d) d_axis.push_back(rows[i].d);
  const std::size_t stride_l = stride_d * d_axis.size();
  for (i = 0; i < rows.size(); i += stride_l) l_axis.push_back(rows[i].l);

  for (auto* axis : {&l_axis, &d_axis, &t_axis, &f_axis}) {
    for (std::size_t k = 1; k < axis->size(); ++k)
      if (!((*axis)[k] > (*axis)[k - 1]))
        throw Error(ErrorKind::Parse, "axis values not strictly increasing in canonical row order (value " +
                                          format_double((*axis)[k]) + ")");
  }
  check_frequency_spacing(f_axis);

  const std::size_t expected = l_axis.size() * stride_l;
  for (std::size_t r = 0; r < std::min(rows.size(), expected); ++r) {
    const std::size_t jf = r % nf;
    const std::size_t it = (r / nf) % t_axis.size();
    const std::size_t id = (r / stride_d) % d_axis.size();
    const std::size_t il = r / stride_l;
    const Row& row = rows[r];
    if (row.l != l_axis[il] || row.d != d_axis[id] || row.theta != t_axis[it] || row.f != f_axis[jf])
      throw Error(ErrorKind::Parse, parse_prefix(row.line) + "row " + coord_text(row.l, row.d, row.theta, row.f) +
                                        " breaks canonical order; expected " +
                                        coord_text(l_axis[il], d_axis[id], t_axis[it], f_axis[jf]));
  }
  if (rows.size() != expected)
    throw Error(ErrorKind::Parse, "missing rows: grid axes imply " + std::to_string(expected) + " rows, found " +
                                      std::to_string(rows.size()));

  TransmittanceGrid grid = assemble(infer_scenario(l_axis, d_axis, t_axis), f_axis);
  grid.scenario.validate();
  for (std::size_t r = 0; r < rows.size(); ++r) grid.values[r] = rows[r].tau;
  return grid;
}

TransmittanceGrid read_grid(const std::filesystem::path& path, const RowFilter& filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open grid file '" + path.string() + "'");
  return read_grid(in, filter);
}

TransmittanceGrid ingest_external(std::istream& in, const RowFilter& filter) {
  const std::vector<Row> rows = parse_rows(in, filter);
  std::vector<double> ls, ds, ts, fs;
  for (const Row& r : rows) {
    ls.push_back(r.l);
    ds.push_back(r.d);
    ts.push_back(r.theta);
    fs.push_back(r.f);
  }
  std::vector<double> l_axis = cluster_axis(ls), d_axis = cluster_axis(ds), t_axis = cluster_axis(ts),
                      f_axis = cluster_axis(fs);

  // An axis value carried by far fewer rows than its siblings is a stray
  // coordinate rather than a missing slab.
  auto stray_values = [&](const std::vector<double>& axis, auto member) {
    std::vector<std::size_t> counts(axis.size(), 0);
    for (const Row& r : rows) ++counts[axis_index(axis, r.*member)];
    const std::size_t top = *std::max_element(counts.begin(), counts.end());
    std::vector<double> stray;
    for (std::size_t k = 0; k < axis.size(); ++k)
      if (2 * counts[k] < top) stray.push_back(axis[k]);
    return stray;
  };
  const std::pair<std::vector<double>*, double Row::*> axes[] = {
      {&l_axis, &Row::l}, {&d_axis, &Row::d}, {&t_axis, &Row::theta}, {&f_axis, &Row::f}};
  for (const auto& [axis, member] : axes) {
    const std::vector<double> stray = stray_values(*axis, member);
    if (stray.empty()) continue;
    for (const Row& r : rows) {
      if (std::find(stray.begin(), stray.end(), (*axis)[axis_index(*axis, r.*member)]) != stray.end())
        throw Error(ErrorKind::Parse, parse_prefix(r.line) + "coordinate " + coord_text(r.l, r.d, r.theta, r.f) +
                                          " is not on the grid's Cartesian product");
    }
  }
  if (f_axis.size() >= 3) {
    try {
      check_frequency_spacing(f_axis);
    } catch (const Error& e) {
      throw Error(ErrorKind::Parse, std::string("non-grid frequency: ") + e.what());
    }
  }

  TransmittanceGrid grid = assemble(infer_scenario(l_axis, d_axis, t_axis), f_axis);
  grid.scenario.validate();
  std::vector<std::size_t> owner(grid.size(), 0);  // 1-based source line, 0 = unset
  for (const Row& r : rows) {
    const std::size_t k = grid.index(axis_index(l_axis, r.l), axis_index(d_axis, r.d),
                                     axis_index(t_axis, r.theta), axis_index(f_axis, r.f));
    if (owner[k] != 0)
      throw Error(ErrorKind::Parse, parse_prefix(r.line) + "duplicate cell " + coord_text(r.l, r.d, r.theta, r.f) +
                                        " (first seen on line " + std::to_string(owner[k]) + ")");
    owner[k] = r.line;
    grid.values[k] = r.tau;
  }

  std::size_t missing = 0;
  std::ostringstream listing;
  for (std::size_t il = 0; il < grid.n_l(); ++il)
    for (std::size_t id = 0; id < grid.n_d(); ++id)
      for (std::size_t it = 0; it < grid.n_theta(); ++it)
        for (std::size_t jf = 0; jf < grid.n_f(); ++jf) {
          if (owner[grid.index(il, id, it, jf)] != 0) continue;
          if (missing < 20)
            listing << "\n  " << coord_text(l_axis[il], d_axis[id], t_axis[it], f_axis[jf]);
          ++missing;
        }
  if (missing > 0)
    throw Error(ErrorKind::Parse, std::to_string(missing) + " missing cell(s)" +
                                      (missing > 20 ? " (first 20 listed)" : "") + ":" + listing.str());
  return grid;
}

TransmittanceGrid ingest_external(const std::filesystem::path& path, const RowFilter& filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open grid file '" + path.string() + "'");
  return ingest_external(in, filter);
}

}  // namespace skyloss
