#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace skyloss {

/// Link-geometry axes of an experiment: altitudes and distances in km,
/// zenith angles in degrees.
struct ScenarioSpec {
  std::string name;
  std::vector<double> altitudes;
  std::vector<double> distances;
  std::vector<double> thetas;

  void validate() const;
  bool operator==(const ScenarioSpec&) const = default;
};

/// Frequency window in THz. Samples are f_lo + k*step for every k that stays
/// within f_hi; f_hi itself is a sample only when the span is a multiple of step.
struct SubBand {
  std::string name;
  double f_lo = 0.0;
  double f_hi = 0.0;
  double step = 0.0003;

  void validate() const;
  std::size_t sample_count() const;
  std::vector<double> frequencies() const;
  bool operator==(const SubBand&) const = default;
};

inline constexpr double kDefaultStepThz = 0.0003;

ScenarioSpec builtin_scenario(std::string_view name);
SubBand builtin_band(std::string_view name);
const std::vector<std::string>& builtin_scenario_names();
const std::vector<std::string>& builtin_band_names();

/// Name of the builtin band whose sampling at `step` starts at f_lo and yields
/// exactly `count` samples ending at f_last; nullopt when none matches.
std::optional<std::string> match_builtin_band(double f_lo, double f_last, double step, std::size_t count);

/// Dense 4-D tensor indexed [l][d][theta][f], f innermost.
template <typename Tag>
struct Grid4 {
  ScenarioSpec scenario;
  SubBand band;
  std::vector<double> frequencies;
  std::vector<double> values;

  std::size_t n_l() const { return scenario.altitudes.size(); }
  std::size_t n_d() const { return scenario.distances.size(); }
  std::size_t n_theta() const { return scenario.thetas.size(); }
  std::size_t n_f() const { return frequencies.size(); }
  std::size_t size() const { return n_l() * n_d() * n_theta() * n_f(); }

  std::size_t index(std::size_t il, std::size_t id, std::size_t it, std::size_t jf) const {
    return ((il * n_d() + id) * n_theta() + it) * n_f() + jf;
  }
  double& at(std::size_t il, std::size_t id, std::size_t it, std::size_t jf) {
    return values[index(il, id, it, jf)];
  }
  double at(std::size_t il, std::size_t id, std::size_t it, std::size_t jf) const {
    return values[index(il, id, it, jf)];
  }
};

struct TransmittanceTag {};
struct PathLossTag {};
using TransmittanceGrid = Grid4<TransmittanceTag>;
using PathLossGrid = Grid4<PathLossTag>;

/// Allocates a grid with the given axes, all values set to `fill`.
TransmittanceGrid make_transmittance_grid(ScenarioSpec scenario, SubBand band, double fill = 1.0);

/// Throws on shape mismatch or a value outside (0, 1].
void validate(const TransmittanceGrid& grid);

/// True when both grids have bitwise-identical axes.
template <typename A, typename B>
bool same_axes(const Grid4<A>& a, const Grid4<B>& b) {
  return a.scenario.altitudes == b.scenario.altitudes && a.scenario.distances == b.scenario.distances &&
         a.scenario.thetas == b.scenario.thetas && a.frequencies == b.frequencies;
}

PathLossGrid path_loss_grid(const TransmittanceGrid& tau);

/// Optional closed ranges applied to rows while reading; rows outside are skipped.
struct RowFilter {
  std::optional<std::pair<double, double>> l_km;
  std::optional<std::pair<double, double>> d_km;
  std::optional<std::pair<double, double>> theta_deg;
  std::optional<std::pair<double, double>> f_thz;

  bool accepts(double l, double d, double theta, double f) const;
};

inline constexpr std::string_view kGridMagic = "# skyloss-grid v1";
inline constexpr std::string_view kGridHeader = "l_km,d_km,theta_deg,f_thz,tau";

void write_grid(const TransmittanceGrid& grid, std::ostream& out);
void write_grid(const TransmittanceGrid& grid, const std::filesystem::path& path);

/// Reads a grid in canonical row order.
TransmittanceGrid read_grid(std::istream& in, const RowFilter& filter = {});
TransmittanceGrid read_grid(const std::filesystem::path& path, const RowFilter& filter = {});

/// Reads a grid whose rows may appear in any order (e.g. exported by an
/// external radiative-transfer run) and assembles the tensor.
TransmittanceGrid ingest_external(std::istream& in, const RowFilter& filter = {});
TransmittanceGrid ingest_external(const std::filesystem::path& path, const RowFilter& filter = {});

/// Renders `value` with 17 significant digits, as printf's %.17g.
std::string format_double(double value);

}  // namespace skyloss
