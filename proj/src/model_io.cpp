#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "skyloss/error.hpp"
#include "skyloss/model.hpp"

namespace skyloss {

namespace {

YAML::Node require(const YAML::Node& node, const std::string& key) {
  const YAML::Node child = node[key];
  if (!child) throw Error(ErrorKind::Schema, "model file: missing key '" + key + "'");
  return child;
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return require(node, key).as<T>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Schema, "model file: bad value for '" + key + "': " + e.what());
  }
}

double number(const YAML::Node& node, const std::string& key) {
  const double v = scalar<double>(node, key);
  if (!std::isfinite(v)) throw Error(ErrorKind::Schema, "model file: non-finite coefficient '" + key + "'");
  return v;
}

std::vector<double> numbers(const YAML::Node& node, const std::string& key) {
  const YAML::Node seq = require(node, key);
  if (!seq.IsSequence() || seq.size() == 0)
    throw Error(ErrorKind::Schema, "model file: '" + key + "' must be a non-empty list");
  std::vector<double> v;
  try {
    v = seq.as<std::vector<double>>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Schema, "model file: bad number in '" + key + "': " + e.what());
  }
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorKind::Schema, "model file: non-finite coefficient in '" + key + "'");
  return v;
}

void emit_header(YAML::Emitter& out, const char* kind, const SubBand& band, const FrequencyMap& map,
                 const FitMetadata& meta) {
  out << YAML::Key << "format" << YAML::Value << kModelFormat;
  out << YAML::Key << "kind" << YAML::Value << kind;
  out << YAML::Key << "units" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "length" << YAML::Value << "km";
  out << YAML::Key << "frequency" << YAML::Value << "THz";
  out << YAML::Key << "angle" << YAML::Value << "deg";
  out << YAML::EndMap;
  out << YAML::Key << "band" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << band.name;
  out << YAML::Key << "f_lo" << YAML::Value << band.f_lo;
  out << YAML::Key << "f_hi" << YAML::Value << band.f_hi;
  out << YAML::Key << "step" << YAML::Value << band.step;
  out << YAML::EndMap;
  out << YAML::Key << "f_map" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "center" << YAML::Value << map.center;
  out << YAML::Key << "half_width" << YAML::Value << map.half_width;
  out << YAML::EndMap;
  out << YAML::Key << "fit" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "training_scenario" << YAML::Value << meta.training_scenario;
  out << YAML::Key << "degrees" << YAML::Value << YAML::Flow << meta.degrees;
  out << YAML::Key << "excluded_samples" << YAML::Value << meta.excluded_samples;
  out << YAML::Key << "clamp_events" << YAML::Value << meta.clamp_events;
  out << YAML::Key << "intercept_refit" << YAML::Value << meta.intercept_refit;
  out << YAML::Key << "step2" << YAML::Value << (meta.gauss_newton ? "gauss_newton" : "log_linear");
  out << YAML::EndMap;
}

SubBand read_band(const YAML::Node& root) {
  const YAML::Node b = require(root, "band");
  SubBand band{scalar<std::string>(b, "name"), number(b, "f_lo"), number(b, "f_hi"), number(b, "step")};
  if (!(band.f_lo >= 0.1 && band.f_lo <= band.f_hi && band.f_hi <= 1.0) || !(band.step > 0.0))
    throw Error(ErrorKind::Schema, "model file: band span must lie within [0.1, 1.0] THz with a positive step");
  return band;
}

FrequencyMap read_map(const YAML::Node& root) {
  const YAML::Node m = require(root, "f_map");
  FrequencyMap map{number(m, "center"), number(m, "half_width")};
  if (!(map.half_width > 0.0)) throw Error(ErrorKind::Schema, "model file: f_map half_width must be > 0");
  return map;
}

// The fit block is informational; hand-written files may omit it.
FitMetadata read_meta(const YAML::Node& root) {
  FitMetadata meta;
  const YAML::Node f = root["fit"];
  if (!f) return meta;
  meta.training_scenario = scalar<std::string>(f, "training_scenario");
  meta.degrees = scalar<std::vector<int>>(f, "degrees");
  meta.excluded_samples = scalar<std::size_t>(f, "excluded_samples");
  meta.clamp_events = scalar<std::size_t>(f, "clamp_events");
  meta.intercept_refit = scalar<bool>(f, "intercept_refit");
  const std::string step2 = scalar<std::string>(f, "step2");
  if (step2 != "log_linear" && step2 != "gauss_newton")
    throw Error(ErrorKind::Schema, "model file: unknown step2 estimator '" + step2 + "'");
  meta.gauss_newton = step2 == "gauss_newton";
  return meta;
}

void check_units(const YAML::Node& root) {
  const YAML::Node u = require(root, "units");
  if (scalar<std::string>(u, "length") != "km" || scalar<std::string>(u, "frequency") != "THz" ||
      scalar<std::string>(u, "angle") != "deg")
    throw Error(ErrorKind::Schema, "model file: units must be {length: km, frequency: THz, angle: deg}");
}

}  // namespace

std::string dump_model(const Model& m) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  if (const auto* a = std::get_if<AgnosticModel>(&m)) {
    emit_header(out, "agnostic", a->band, a->poly_h.f_map, a->meta);
    out << YAML::Key << "agnostic" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "b2_h" << YAML::Value << a->b2_h;
    out << YAML::Key << "b2_v" << YAML::Value << a->b2_v;
    out << YAML::Key << "lambda_h" << YAML::Value << YAML::Flow << a->poly_h.coeffs;
    out << YAML::Key << "lambda_v" << YAML::Value << YAML::Flow << a->poly_v.coeffs;
    out << YAML::EndMap;
  } else {
    const auto& ad = std::get<AdaptiveModel>(m);
    const FrequencyMap map = ad.entries.empty() ? FrequencyMap::for_band(ad.band.f_lo, ad.band.f_hi)
                                                : ad.entries.front().poly.f_map;
    emit_header(out, "adaptive", ad.band, map, ad.meta);
    out << YAML::Key << "adaptive" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : ad.entries) {
      out << YAML::Flow << YAML::BeginMap;
      out << YAML::Key << "theta" << YAML::Value << e.theta;
      out << YAML::Key << "b2" << YAML::Value << e.b2;
      out << YAML::Key << "lambda" << YAML::Value << YAML::Flow << e.poly.coeffs;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

Model parse_model(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Parse, std::string("model file: ") + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorKind::Schema, "model file: document must be a mapping");
  const std::string format = scalar<std::string>(root, "format");
  if (format != kModelFormat)
    throw Error(ErrorKind::Schema, "model file: version mismatch ('" + format + "', expected '" + kModelFormat + "')");
  check_units(root);
  const std::string kind = scalar<std::string>(root, "kind");
  const SubBand band = read_band(root);
  const FrequencyMap map = read_map(root);
  const FitMetadata meta = read_meta(root);

  if (kind == "agnostic") {
    const YAML::Node a = require(root, "agnostic");
    AgnosticModel m;
    m.b2_h = number(a, "b2_h");
    m.b2_v = number(a, "b2_v");
    m.poly_h = {numbers(a, "lambda_h"), map};
    m.poly_v = {numbers(a, "lambda_v"), map};
    m.band = band;
    m.meta = meta;
    return m;
  }
  if (kind == "adaptive") {
    const YAML::Node list = require(root, "adaptive");
    if (!list.IsSequence() || list.size() == 0)
      throw Error(ErrorKind::Schema, "model file: 'adaptive' must be a non-empty list");
    AdaptiveModel m;
    for (const auto& item : list) {
      AdaptiveEntry e{number(item, "theta"), number(item, "b2"), {numbers(item, "lambda"), map}};
      if (!m.entries.empty() && !(e.theta > m.entries.back().theta))
        throw Error(ErrorKind::Schema, "model file: adaptive zenith angles must be strictly increasing");
      if (e.theta < 0.0 || e.theta > 90.0) throw Error(ErrorKind::Schema, "model file: zenith angle outside [0, 90]");
      m.entries.push_back(std::move(e));
    }
    m.band = band;
    m.meta = meta;
    return m;
  }
  throw Error(ErrorKind::Schema, "model file: unknown kind '" + kind + "'");
}

void export_model(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << dump_model(m);
  if (!out) throw Error(ErrorKind::Io, "failed writing model file '" + path.string() + "'");
}

Model import_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open model file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace skyloss
