#include <yaml-cpp/yaml.h>

#include <fstream>
#include <sstream>

#include "skyloss/atmosphere.hpp"
#include "skyloss/error.hpp"

namespace skyloss {

namespace {

constexpr int kProfileFormat = 1;

const YAML::Node require(const YAML::Node& node, const char* key) {
  const YAML::Node child = node[key];
  if (!child) throw Error(ErrorKind::Schema, std::string("profile: missing key '") + key + "'");
  return child;
}

template <typename T>
T scalar(const YAML::Node& node, const char* key) {
  try {
    return require(node, key).as<T>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Schema, std::string("profile: bad value for '") + key + "': " + e.what());
  }
}

std::vector<double> numbers(const YAML::Node& node, const char* key) {
  const YAML::Node seq = require(node, key);
  if (!seq.IsSequence()) throw Error(ErrorKind::Schema, std::string("profile: '") + key + "' must be a list");
  try {
    return seq.as<std::vector<double>>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Schema, std::string("profile: bad number in '") + key + "': " + e.what());
  }
}

std::vector<ContinuumTerm> read_terms(const YAML::Node& root) {
  std::vector<ContinuumTerm> terms;
  if (const YAML::Node list = root["continuum"]) {
    for (const auto& item : list)
      terms.push_back({numbers(item, "amplitude_poly"), scalar<double>(item, "scale_height_km")});
  }
  return terms;
}

std::vector<AbsorptionLine> read_lines(const YAML::Node& root) {
  std::vector<AbsorptionLine> lines;
  if (const YAML::Node list = root["lines"]) {
    for (const auto& item : list)
      lines.push_back({scalar<double>(item, "center_thz"), scalar<double>(item, "strength_per_km"),
                       scalar<double>(item, "half_width_thz"), scalar<double>(item, "scale_height_km")});
  }
  return lines;
}

const char* mode_name(ProfileMode mode) {
  switch (mode) {
    case ProfileMode::ModelExact: return "model_exact";
    case ProfileMode::Continuum: return "continuum";
    case ProfileMode::Lines: return "lines";
  }
  return "?";
}

}  // namespace

AbsorptionProfile parse_profile(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Parse, std::string("profile: ") + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorKind::Schema, "profile: document must be a mapping");
  if (scalar<int>(root, "format") != kProfileFormat)
    throw Error(ErrorKind::Schema, "profile: unsupported format version (expected 1)");

  const std::vector<double> band = numbers(root, "band");
  if (band.size() != 2) throw Error(ErrorKind::Schema, "profile: 'band' must be [f_min, f_max] in THz");
  const std::string mode = scalar<std::string>(root, "mode");
  const double humidity = root["humidity_scale"] ? scalar<double>(root, "humidity_scale") : 1.0;

  AbsorptionProfile profile = [&] {
    if (mode == "model_exact") {
      const YAML::Node exact = require(root, "model_exact");
      return AbsorptionProfile::model_exact(scalar<double>(exact, "b2h"), scalar<double>(exact, "b2v"),
                                            numbers(exact, "lambda_h"), numbers(exact, "lambda_v"), band[0], band[1]);
    }
    if (mode == "continuum") return AbsorptionProfile::continuum(read_terms(root), band[0], band[1], humidity);
    if (mode == "lines")
      return AbsorptionProfile::with_lines(read_terms(root), read_lines(root), band[0], band[1], humidity);
    throw Error(ErrorKind::Schema, "profile: unknown mode '" + mode + "' (model_exact, continuum, lines)");
  }();
  if (root["name"]) profile.set_name(scalar<std::string>(root, "name"));
  return profile;
}

AbsorptionProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open profile '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_profile(buf.str());
}

std::string dump_profile(const AbsorptionProfile& profile) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value << kProfileFormat;
  out << YAML::Key << "name" << YAML::Value << profile.name();
  out << YAML::Key << "mode" << YAML::Value << mode_name(profile.mode());
  out << YAML::Key << "band" << YAML::Value << YAML::Flow << YAML::BeginSeq << profile.f_min() << profile.f_max()
      << YAML::EndSeq;
  if (profile.mode() == ProfileMode::ModelExact) {
    const auto& e = profile.exact();
    out << YAML::Key << "model_exact" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "b2h" << YAML::Value << e.b2h;
    out << YAML::Key << "b2v" << YAML::Value << e.b2v;
    out << YAML::Key << "lambda_h" << YAML::Value << YAML::Flow << e.lambda_h.coeffs;
    out << YAML::Key << "lambda_v" << YAML::Value << YAML::Flow << e.lambda_v.coeffs;
    out << YAML::EndMap;
  } else {
    out << YAML::Key << "humidity_scale" << YAML::Value << profile.humidity_scale();
    out << YAML::Key << "continuum" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : profile.terms()) {
      out << YAML::BeginMap;
      out << YAML::Key << "amplitude_poly" << YAML::Value << YAML::Flow << t.amplitude_poly;
      out << YAML::Key << "scale_height_km" << YAML::Value << t.scale_height_km;
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    if (profile.mode() == ProfileMode::Lines) {
      out << YAML::Key << "lines" << YAML::Value << YAML::BeginSeq;
      for (const auto& l : profile.lines()) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "center_thz" << YAML::Value << l.center_thz;
        out << YAML::Key << "strength_per_km" << YAML::Value << l.strength_per_km;
        out << YAML::Key << "half_width_thz" << YAML::Value << l.half_width_thz;
        out << YAML::Key << "scale_height_km" << YAML::Value << l.scale_height_km;
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace skyloss
