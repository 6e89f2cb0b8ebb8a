#include "ckmap/scene.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ckmap/rng.hpp"
#include "json.hpp"

namespace ckmap {

using nlohmann::json;

Vec3 UpaGeometry::element_offset(std::size_t idx) const {
  const double a = static_cast<double>(idx / cols) - (static_cast<double>(rows) - 1.0) / 2.0;
  const double b = static_cast<double>(idx % cols) - (static_cast<double>(cols) - 1.0) / 2.0;
  return axis_row * (a * spacing_m) + axis_col * (b * spacing_m);
}

bool Scatterer::contains(const Vec3& p) const {
  const Vec3 lo = box_min(), hi = box_max();
  return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
}

double Scene::extent() const {
  Vec3 lo = drop_region.min, hi = drop_region.max;
  lo.x = std::min(lo.x, bs_position.x);
  lo.y = std::min(lo.y, bs_position.y);
  lo.z = std::min(lo.z, bs_position.z);
  hi.x = std::max(hi.x, bs_position.x);
  hi.y = std::max(hi.y, bs_position.y);
  hi.z = std::max(hi.z, bs_position.z);
  return (hi - lo).norm();
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("scene config: unknown key '" + it.key() + "' in " + where);
}

Vec3 parse_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument("scene config: " + where + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

UpaGeometry parse_array(const json& j, double default_spacing, const std::string& where) {
  reject_unknown_keys(j, {"rows", "cols", "spacing_m"}, where);
  UpaGeometry g;
  g.rows = j.at("rows").get<std::size_t>();
  g.cols = j.at("cols").get<std::size_t>();
  g.spacing_m = j.value("spacing_m", default_spacing);
  if (g.rows == 0 || g.cols == 0)
    throw std::invalid_argument("scene config: array dims must be positive in " + where);
  return g;
}

}  // namespace

Scene load_scene_json(const std::string& json_text, double f_down_center_hz) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("scene config: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"bs_position", "bs_array", "ue_array", "static_reflectors",
                       "dynamic_scatterers", "drop_region", "rng_seed"},
                      "scene");

  const double half_wavelength = kSpeedOfLight / f_down_center_hz / 2.0;
  Scene s;
  if (j.contains("bs_position")) s.bs_position = parse_vec3(j["bs_position"], "bs_position");
  s.bs_array = j.contains("bs_array") ? parse_array(j["bs_array"], half_wavelength, "bs_array")
                                      : UpaGeometry{1, 8, half_wavelength};
  s.ue_array = j.contains("ue_array") ? parse_array(j["ue_array"], half_wavelength, "ue_array")
                                      : UpaGeometry{1, 1, half_wavelength};

  if (j.contains("static_reflectors")) {
    for (const auto& pj : j["static_reflectors"]) {
      reject_unknown_keys(pj, {"axis", "offset", "reflection"}, "static_reflectors[]");
      ReflectorPlane p;
      const std::string axis = pj.at("axis").get<std::string>();
      if (axis == "x") p.axis = 0;
      else if (axis == "y") p.axis = 1;
      else if (axis == "z") p.axis = 2;
      else throw std::invalid_argument("scene config: reflector axis must be x, y or z");
      p.offset = pj.at("offset").get<double>();
      if (pj.contains("reflection")) p.reflection = {pj["reflection"].get<double>(), 0.0};
      if (std::abs(p.reflection) > 1.0)
        throw std::invalid_argument("scene config: |reflection| must be <= 1");
      s.static_reflectors.push_back(p);
    }
  }

  if (j.contains("dynamic_scatterers")) {
    for (const auto& sj : j["dynamic_scatterers"]) {
      reject_unknown_keys(sj, {"material", "size", "reflectivity"}, "dynamic_scatterers[]");
      Scatterer sc;
      const std::string mat = sj.at("material").get<std::string>();
      if (mat == "metal") {
        sc.material = Material::kMetal;
        sc.size = {2.0, 4.0, 1.6};  // vehicle box
        sc.reflectivity = {-0.95, 0.0};
      } else if (mat == "dielectric") {
        sc.material = Material::kDielectric;
        sc.size = {0.5, 0.5, 1.8};  // pedestrian box
        sc.reflectivity = {-0.4, 0.0};
      } else {
        throw std::invalid_argument("scene config: material must be metal or dielectric");
      }
      if (sj.contains("size")) sc.size = parse_vec3(sj["size"], "scatterer size");
      if (sj.contains("reflectivity")) sc.reflectivity = {sj["reflectivity"].get<double>(), 0.0};
      if (std::abs(sc.reflectivity) > 1.0)
        throw std::invalid_argument("scene config: |reflectivity| must be <= 1");
      s.dynamic_scatterers.push_back(sc);
    }
  }

  if (j.contains("drop_region")) {
    const auto& dj = j["drop_region"];
    reject_unknown_keys(dj, {"min", "max"}, "drop_region");
    s.drop_region.min = parse_vec3(dj.at("min"), "drop_region.min");
    s.drop_region.max = parse_vec3(dj.at("max"), "drop_region.max");
  }
  if (s.drop_region.empty()) throw std::invalid_argument("scene config: empty drop_region");

  if (j.contains("rng_seed")) s.rng_seed = j["rng_seed"].get<std::uint64_t>();
  return s;
}

Scene load_scene_file(const std::string& path, double f_down_center_hz) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scene file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return load_scene_json(ss.str(), f_down_center_hz);
}

Scene reposition_scatterers(const Scene& scene, std::size_t block) {
  if (scene.drop_region.empty())
    throw std::invalid_argument("reposition_scatterers: empty drop_region");
  Scene out = scene;
  Rng rng = Rng(scene.rng_seed).derive(0x5343u /* scatterer stream */, block);
  for (Scatterer& sc : out.dynamic_scatterers) {
    sc.center.x = rng.uniform(scene.drop_region.min.x, scene.drop_region.max.x);
    sc.center.y = rng.uniform(scene.drop_region.min.y, scene.drop_region.max.y);
    sc.center.z = rng.uniform(scene.drop_region.min.z, scene.drop_region.max.z);
  }
  return out;
}

}  // namespace ckmap
