#include "cassi/system.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ac254_050_a_data.hpp"
#include "cassi/sampling.hpp"
#include "json.hpp"

namespace cassi {

using json = nlohmann::json;

Pose<double> Element::pose() const {
  return {intrinsic_yxz(deg_to_rad(rotation_deg.x), deg_to_rad(rotation_deg.y), deg_to_rad(rotation_deg.z)),
          position_mm};
}

std::vector<double> SystemConfig::band_wavelengths() const {
  if (band_count < 1) throw DomainError("band_count must be >= 1");
  std::vector<double> out(band_count);
  for (int i = 0; i < band_count; ++i)
    out[i] = band_count == 1 ? wavelength_min_nm
                             : wavelength_min_nm + (wavelength_max_nm - wavelength_min_nm) * i / (band_count - 1);
  return out;
}

const Element* SystemConfig::dispersive_element() const {
  for (const auto& e : elements)
    if (e.is_dispersive()) return &e;
  return nullptr;
}

// ---------------------------------------------------------------------------
// config files

namespace {

struct Reader {
  const json& j;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path + ": " + what); }

  const json& at(const std::string& key) const {
    if (!j.is_object()) fail("expected an object");
    const auto it = j.find(key);
    if (it == j.end()) fail("missing key '" + key + "'");
    return *it;
  }
  bool has(const std::string& key) const { return j.is_object() && j.contains(key); }
  Reader child(const std::string& key) const { return {at(key), path + "/" + key}; }

  template <class T>
  T get(const std::string& key) const {
    try {
      return at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path + "/" + key + ": " + e.what());
    }
  }
  template <class T>
  T get_or(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }
  Vec3<double> vec3(const std::string& key, Vec3<double> fallback = {}) const {
    if (!has(key)) return fallback;
    const auto v = get<std::vector<double>>(key);
    if (v.size() != 3) fail("'" + key + "' needs 3 values");
    return {v[0], v[1], v[2]};
  }
};

GlassModel read_glass(const json& j, const std::string& path, const GlassCatalog& catalog) {
  if (j.is_string()) {
    if (const auto* g = catalog.find(j.get<std::string>())) return *g;
    throw ConfigError(path + ": unknown glass '" + j.get<std::string>() + "'");
  }
  Reader r{j, path};
  try {
    return GlassModel::relaxed(r.get<double>("n_d"), r.get<double>("v_d"), r.get_or<std::string>("name", "relaxed"));
  } catch (const DomainError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json write_glass(const GlassModel& g) {
  if (g.is_catalog()) return g.name;
  return json{{"name", g.name}, {"n_d", g.n_d}, {"v_d", g.v_d}};
}

std::vector<GlassModel> read_glasses(const Reader& r, const std::string& key, const GlassCatalog& catalog) {
  const json& arr = r.at(key);
  if (!arr.is_array()) r.fail("'" + key + "' must be an array");
  std::vector<GlassModel> out;
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(read_glass(arr[i], r.path + "/" + key + "/" + std::to_string(i), catalog));
  return out;
}

DoubletElement read_doublet(const Reader& r, const GlassCatalog& catalog) {
  DoubletElement d;
  d.part = r.get_or<std::string>("part", "");
  const auto radii = r.get<std::vector<double>>("radii_mm");
  const auto thick = r.get<std::vector<double>>("thickness_mm");
  const auto glasses = read_glasses(r, "glasses", catalog);
  if (radii.size() != 3 || thick.size() != 2 || glasses.size() != 2)
    r.fail("doublet needs 3 radii, 2 thicknesses and 2 glasses");
  for (int i = 0; i < 3; ++i) {
    if (radii[i] == 0.0) r.fail("radius must be non-zero");
    d.radii_mm[i] = radii[i];
  }
  for (int i = 0; i < 2; ++i) {
    if (!(thick[i] > 0.0)) r.fail("thickness must be positive");
    d.thickness_mm[i] = thick[i];
    d.glasses[i] = glasses[i];
  }
  d.aperture_mm = r.get_or("aperture_mm", 12.7);
  return d;
}

Element read_element(const Reader& r, const GlassCatalog& catalog) {
  Element e;
  const auto type = r.get<std::string>("type");
  e.name = r.get_or<std::string>("name", type);
  e.position_mm = r.vec3("position_mm");
  e.rotation_deg = r.vec3("rotation_deg");
  if (type == "thin_lens") {
    ThinLensElement t{r.get<double>("focal_mm")};
    if (t.focal_mm == 0.0) r.fail("focal_mm must be non-zero");
    e.kind = t;
  } else if (type == "doublet") {
    e.kind = read_doublet(r, catalog);
  } else if (type == "prism") {
    PrismElement p;
    p.apex_deg = r.get<std::vector<double>>("apex_deg");
    p.face_signs = r.get_or<std::vector<int>>("face_signs", std::vector<int>(p.apex_deg.size(), 1));
    p.glasses = read_glasses(r, "glasses", catalog);
    p.thickness_mm = r.get<std::vector<double>>("thickness_mm");
    p.aperture_mm = r.get_or("aperture_mm", 12.7);
    const auto k = p.apex_deg.size();
    if (k == 0 || p.face_signs.size() != k || p.glasses.size() != k || p.thickness_mm.size() != k)
      r.fail("prism needs matching apex_deg, face_signs, glasses and thickness_mm lists");
    for (double a : p.apex_deg)
      if (!(a > 0.0 && a < 90.0)) r.fail("apex angles must lie in (0, 90) deg");
    for (int s : p.face_signs)
      if (s != 1 && s != -1) r.fail("face_signs entries must be +1 or -1");
    e.kind = std::move(p);
  } else if (type == "detector") {
    e.kind = DetectorElement{};
  } else {
    r.fail("unknown element type '" + type + "'");
  }
  return e;
}

json write_element(const Element& e) {
  json j{{"name", e.name},
         {"position_mm", {e.position_mm.x, e.position_mm.y, e.position_mm.z}},
         {"rotation_deg", {e.rotation_deg.x, e.rotation_deg.y, e.rotation_deg.z}}};
  if (const auto* t = std::get_if<ThinLensElement>(&e.kind)) {
    j["type"] = "thin_lens";
    j["focal_mm"] = t->focal_mm;
  } else if (const auto* d = std::get_if<DoubletElement>(&e.kind)) {
    j["type"] = "doublet";
    j["part"] = d->part;
    j["radii_mm"] = d->radii_mm;
    j["thickness_mm"] = d->thickness_mm;
    j["glasses"] = {write_glass(d->glasses[0]), write_glass(d->glasses[1])};
    j["aperture_mm"] = d->aperture_mm;
  } else if (const auto* p = std::get_if<PrismElement>(&e.kind)) {
    j["type"] = "prism";
    j["apex_deg"] = p->apex_deg;
    j["face_signs"] = p->face_signs;
    json g = json::array();
    for (const auto& m : p->glasses) g.push_back(write_glass(m));
    j["glasses"] = g;
    j["thickness_mm"] = p->thickness_mm;
    j["aperture_mm"] = p->aperture_mm;
  } else {
    j["type"] = "detector";
  }
  return j;
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

}  // namespace

SystemConfig parse_system_config(const std::string& text, const std::string& source, const GlassCatalog& catalog) {
  const json j = parse_json(text, source);
  const Reader r{j, source};
  SystemConfig c;
  c.name = r.get_or<std::string>("name", "custom");
  if (r.has("sensor")) {
    const auto s = r.child("sensor");
    c.sensor.pixels_x = s.get_or("pixels_x", 512);
    c.sensor.pixels_y = s.get_or("pixels_y", 512);
    c.sensor.pitch_um = s.get_or("pitch_um", 10.0);
    if (c.sensor.pixels_x < 1 || c.sensor.pixels_y < 1 || !(c.sensor.pitch_um > 0.0)) s.fail("invalid sensor");
  }
  if (r.has("spectral")) {
    const auto s = r.child("spectral");
    c.wavelength_min_nm = s.get_or("wavelength_min_nm", 450.0);
    c.wavelength_max_nm = s.get_or("wavelength_max_nm", 650.0);
    c.band_count = s.get_or("band_count", 28);
    if (!(c.wavelength_min_nm > 0.0) || !(c.wavelength_max_nm > c.wavelength_min_nm) || c.band_count < 1)
      s.fail("invalid spectral range");
  }
  c.numerical_aperture = r.get_or("numerical_aperture", 0.05);
  c.focal_mm = r.get_or("focal_mm", 50.0);
  c.object_z_mm = r.get_or("object_z_mm", 0.0);
  if (!(c.numerical_aperture > 0.0 && c.numerical_aperture < 1.0)) r.fail("numerical_aperture must lie in (0, 1)");

  const json& elements = r.at("elements");
  if (!elements.is_array() || elements.empty()) r.fail("'elements' must be a non-empty array");
  for (std::size_t i = 0; i < elements.size(); ++i)
    c.elements.push_back(read_element({elements[i], source + "/elements/" + std::to_string(i)}, catalog));
  for (std::size_t i = 0; i + 1 < c.elements.size(); ++i)
    if (std::holds_alternative<DetectorElement>(c.elements[i].kind))
      throw ConfigError(source + ": the detector must be the last element");
  if (!std::holds_alternative<DetectorElement>(c.elements.back().kind))
    throw ConfigError(source + ": the last element must be a detector");
  return c;
}

SystemConfig load_system_config(const std::string& path, const GlassCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open system config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system_config(ss.str(), path, catalog);
}

std::string dump_system_config(const SystemConfig& c) {
  json j;
  j["name"] = c.name;
  j["sensor"] = {{"pixels_x", c.sensor.pixels_x}, {"pixels_y", c.sensor.pixels_y}, {"pitch_um", c.sensor.pitch_um}};
  j["spectral"] = {{"wavelength_min_nm", c.wavelength_min_nm},
                   {"wavelength_max_nm", c.wavelength_max_nm},
                   {"band_count", c.band_count}};
  j["numerical_aperture"] = c.numerical_aperture;
  j["focal_mm"] = c.focal_mm;
  j["object_z_mm"] = c.object_z_mm;
  json elements = json::array();
  for (const auto& e : c.elements) elements.push_back(write_element(e));
  j["elements"] = elements;
  return j.dump(2) + "\n";
}

void save_system_config(const SystemConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << dump_system_config(config);
}

DoubletElement parse_doublet(const std::string& text, const std::string& source, const GlassCatalog& catalog) {
  const json j = parse_json(text, source);
  return read_doublet({j, source}, catalog);
}

const DoubletElement& ac254_050_a() {
  static const DoubletElement d = parse_doublet(std::string(detail::kAc254050AData), "ac254-050-a.json");
  return d;
}

// ---------------------------------------------------------------------------
// tracing

namespace {

std::vector<Surface<double>> doublet_surfaces(const DoubletElement& d, const Pose<double>& pose) {
  const double total = d.thickness_mm[0] + d.thickness_mm[1];
  const double z[3] = {-total / 2, -total / 2 + d.thickness_mm[0], total / 2};
  const auto g1 = Medium<double>::glass(d.glasses[0]);
  const auto g2 = Medium<double>::glass(d.glasses[1]);
  const Medium<double> media[4] = {Medium<double>::vacuum(), g1, g2, Medium<double>::vacuum()};
  std::vector<Surface<double>> out;
  for (int i = 0; i < 3; ++i) {
    const Pose<double> local{Mat3<double>::identity(), Vec3<double>(0, 0, z[i])};
    out.push_back(Surface<double>::sphere(d.radii_mm[i], pose.compose(local), d.aperture_mm, media[i], media[i + 1]));
  }
  return out;
}

}  // namespace

std::vector<Surface<double>> prism_element_surfaces(const PrismElement& p, const Pose<double>& pose) {
  PrismGeometry<double> g;
  for (double a : p.apex_deg) g.apex.push_back(deg_to_rad(a));
  g.signs = p.face_signs;
  g.thickness = p.thickness_mm;
  for (const auto& m : p.glasses) g.glasses.push_back(Medium<double>::glass(m));
  g.aperture = p.aperture_mm;
  return prism_surfaces(g, pose);
}

OpticalSystem::OpticalSystem(SystemConfig config) : config_(std::move(config)) {
  bool have_objective = false;
  for (const auto& e : config_.elements) {
    const Pose<double> pose = e.pose();
    if (const auto* t = std::get_if<ThinLensElement>(&e.kind)) {
      if (t->focal_mm == 0.0) throw DomainError("thin lens focal length must be non-zero");
      stages_.push_back({t->focal_mm, pose, {}});
      if (!have_objective) objective_ = e.position_mm, have_objective = true;
    } else if (const auto* d = std::get_if<DoubletElement>(&e.kind)) {
      stages_.push_back({std::nullopt, {}, doublet_surfaces(*d, pose)});
      if (!have_objective) objective_ = e.position_mm, have_objective = true;
    } else if (const auto* p = std::get_if<PrismElement>(&e.kind)) {
      stages_.push_back({std::nullopt, {}, prism_element_surfaces(*p, pose)});
    } else {
      detector_ = pose;
    }
  }
  if (config_.elements.empty() || !std::holds_alternative<DetectorElement>(config_.elements.back().kind))
    throw ConfigError("system '" + config_.name + "' has no detector as last element");
  if (!have_objective) objective_ = Vec3<double>(0, 0, config_.object_z_mm + config_.focal_mm);
}

OpticalSystem::Indices OpticalSystem::indices(double wavelength_nm) const {
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be positive");
  Indices out{wavelength_nm, {}};
  for (const auto& st : stages_)
    for (const auto& s : st.surfaces) out.n.emplace_back(s.before.index(wavelength_nm), s.after.index(wavelength_nm));
  return out;
}

std::optional<Ray<double>> OpticalSystem::propagate(Ray<double> ray, const Indices& n) const {
  std::size_t k = 0;
  for (const auto& st : stages_) {
    if (st.focal) {
      ray = thin_lens_refract(ray, *st.focal, st.lens_pose);
      if (!ray.alive) return std::nullopt;
      continue;
    }
    for (const auto& s : st.surfaces) {
      const auto hit = intersect(ray, s);
      if (!hit) return std::nullopt;
      ray.origin = hit->point;
      ray = refract(ray, hit->normal, n.n[k].first, n.n[k].second);
      if (!ray.alive) return std::nullopt;
      ++k;
    }
  }
  return ray;
}

std::optional<Vec2> OpticalSystem::trace(const Ray<double>& ray, const Indices& n, Ray<double>* at_detector) const {
  const auto out = propagate(ray, n);
  if (!out) return std::nullopt;
  const Vec3<double> o = detector_.to_local(out->origin);
  const Vec3<double> d = detector_.dir_to_local(out->direction);
  if (d.z == 0.0) return std::nullopt;
  const double t = -o.z / d.z;
  if (t < 0.0) return std::nullopt;
  if (at_detector) {
    *at_detector = *out;
    at_detector->origin = detector_.to_parent(o + d * t);
  }
  return Vec2{o.x + d.x * t, o.y + d.y * t};
}

std::optional<Vec2> OpticalSystem::trace(const Ray<double>& ray, const Indices& n) const {
  return trace(ray, n, nullptr);
}

std::optional<Ray<double>> OpticalSystem::trace_to_last_surface(const Ray<double>& ray) const {
  return propagate(ray, indices(ray.wavelength));
}

Ray<double> OpticalSystem::chief_ray(Vec2 object_mm, double wavelength_nm) const {
  const Vec3<double> origin(object_mm.x, object_mm.y, config_.object_z_mm);
  return {origin, normalized(objective_ - origin), wavelength_nm, true};
}

// ---------------------------------------------------------------------------
// reference layouts

double minimum_deviation_incidence(double apex_rad, double n) { return std::asin(n * std::sin(apex_rad / 2)); }

double amici_rotation_y_deg(const AmiciParams& p) {
  // face 0 tilt is -(2 A1 - A2) / 2; incidence on it is the element rotation plus that tilt
  return p.alpha_c_deg + (2 * p.a1_deg - p.a2_deg) / 2;
}

namespace {

constexpr double kAmiciAperture = 12.7;
constexpr double kSpPrismZ = 75.0;         // prism center, 25 mm after the collimator
constexpr double kSpDoubletGap = 35.0;     // prism center to doublet center along the beam
constexpr double kSpPrismThickness = 15.0;  // axial thickness of the 60 deg prism
constexpr double kSpPrismAperture = 12.7;

Element amici_element(const AmiciParams& p, double z) {
  PrismElement pe;
  pe.apex_deg = {p.a1_deg, p.a2_deg, p.a1_deg};
  pe.face_signs = {1, -1, 1};
  pe.glasses = {p.glass1, p.glass2, p.glass1};
  pe.thickness_mm = std::vector<double>(p.thickness_mm.begin(), p.thickness_mm.end());
  pe.aperture_mm = kAmiciAperture;
  return {"amici", pe, Vec3<double>(0, 0, z), Vec3<double>(0, amici_rotation_y_deg(p), 0)};
}

// Output direction of a ray along +z through a lone element.
std::optional<Vec3<double>> through_element(const Element& e, double wavelength) {
  SystemConfig c;
  c.elements = {e, Element{"detector", DetectorElement{}, e.position_mm + Vec3<double>(0, 0, 1000), {}}};
  const OpticalSystem sys(c);
  const Vec3<double> start = e.position_mm - Vec3<double>(0, 0, 100);
  const auto out = sys.trace_to_last_surface({start, Vec3<double>(0, 0, 1), wavelength, true});
  if (!out) return std::nullopt;
  return out->direction;
}

double amici_deviation(const AmiciParams& p, double wavelength) {
  const auto d = through_element(amici_element(p, 0.0), wavelength);
  if (!d) throw DomainError("Amici chief ray dies");
  return std::atan2(d->x, d->z);
}

// Axial crossing of a paraxial ray parallel to the axis of an element
// oriented along `axis` (unit), measured from the element center.
double back_focus_distance(const DoubletElement& d, const Vec3<double>& center, double ry, double wavelength) {
  SystemConfig c;
  c.elements = {Element{"doublet", d, center, Vec3<double>(0, rad_to_deg(ry), 0)},
                Element{"detector", DetectorElement{}, center + Vec3<double>(0, 0, 1000), {}}};
  const OpticalSystem sys(c);
  const Mat3<double> r = rotation_y(ry);
  const Vec3<double> axis = r * Vec3<double>(0, 0, 1);
  const Vec3<double> side = r * Vec3<double>(1, 0, 0);
  const double h = 1e-3;
  const auto out = sys.trace_to_last_surface({center - axis * 50.0 + side * h, axis, wavelength, true});
  if (!out) throw DomainError("doublet paraxial ray dies");
  // solve for the point where the lateral offset vanishes
  const double lateral = dot(out->origin - center, side);
  const double slope = dot(out->direction, side);
  const double t = -lateral / slope;
  return dot(out->origin + out->direction * t - center, axis);
}

SystemConfig base_config(const std::string& name) {
  SystemConfig c;
  c.name = name;
  return c;
}

SystemConfig build_sp() {
  SystemConfig c = base_config("SP");
  const auto& bk7 = GlassCatalog::schott().at("N-BK7");
  const double apex = deg_to_rad(60.0);
  const double incidence = minimum_deviation_incidence(apex, refractive_index(bk7, 520.0));
  c.elements.push_back({"collimator", ThinLensElement{50.0}, Vec3<double>(0, 0, 50), {}});
  // apex toward -x so that longer wavelengths land at larger detector x, as in AP
  PrismElement pe{{60.0}, {-1}, {bk7}, {kSpPrismThickness}, kSpPrismAperture};
  // face 0 is tilted by +A/2; the chief ray must meet it at +incidence
  const double ry = incidence - apex / 2;
  Element prism{"prism", pe, Vec3<double>(0, 0, kSpPrismZ), Vec3<double>(0, rad_to_deg(ry), 0)};
  c.elements.push_back(prism);

  const auto dir = through_element(prism, 520.0);
  if (!dir) throw DomainError("SP prism chief ray dies");
  const double ry_out = std::atan2(dir->x, dir->z);
  // the chief ray leaves the prism close to its center; follow it to the doublet
  Element probe = prism;
  SystemConfig solo;
  solo.elements = {probe, Element{"detector", DetectorElement{}, Vec3<double>(0, 0, 1000), {}}};
  const auto exit = OpticalSystem(solo).trace_to_last_surface(
      {Vec3<double>(0, 0, kSpPrismZ - 100), Vec3<double>(0, 0, 1), 520.0, true});
  const Vec3<double> doublet_center = exit->origin + exit->direction * kSpDoubletGap;
  const auto& doublet = ac254_050_a();
  c.elements.push_back({"imager", doublet, doublet_center, Vec3<double>(0, rad_to_deg(ry_out), 0)});

  const double bf = back_focus_distance(doublet, doublet_center, ry_out, 520.0);
  const Vec3<double> det = doublet_center + exit->direction * bf;
  c.elements.push_back({"detector", DetectorElement{}, det, Vec3<double>(0, rad_to_deg(ry_out), 180.0)});
  return c;
}

// Rays of the hexapolar bundle from an object point after the last surface.
std::vector<Ray<double>> bundle_exit(const OpticalSystem& sys, Vec2 field, double wavelength, int rings) {
  const Ray<double> chief = sys.chief_ray(field, wavelength);
  const Frame f = frame_around(chief.direction);
  std::vector<Ray<double>> out;
  for (const Vec2& p : hexapolar_pattern(rings)) {
    const Ray<double> r{chief.origin, cone_direction(f, p, sys.config().numerical_aperture), wavelength, true};
    if (auto e = sys.trace_to_last_surface(r)) out.push_back(*e);
  }
  return out;
}

// RMS radius of rays on the plane through `point` with normal `axis`.
double rms_on_plane(const std::vector<Ray<double>>& rays, const Vec3<double>& point, const Vec3<double>& axis) {
  std::vector<Vec3<double>> hits;
  Vec3<double> mean;
  for (const auto& r : rays) {
    const double t = dot(point - r.origin, axis) / dot(r.direction, axis);
    hits.push_back(r.origin + r.direction * t);
    mean += hits.back();
  }
  mean = mean / double(hits.size());
  double s = 0.0;
  for (const auto& h : hits) s += dot(h - mean, h - mean);
  return std::sqrt(s / hits.size());
}

// Distance along the exiting chief ray that minimizes the RMS spot.
double best_focus_distance(const std::vector<Ray<double>>& bundle, const Ray<double>& chief, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  auto f = [&](double t) { return rms_on_plane(bundle, chief.origin + chief.direction * t, chief.direction); };
  double a = lo, b = hi, c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < 100 && b - a > 1e-7; ++i) {
    if (fc < fd)
      b = d, d = c, fd = fc, c = b - g * (b - a), fc = f(c);
    else
      a = c, c = d, fc = fd, d = a + g * (b - a), fd = f(d);
  }
  return 0.5 * (a + b);
}

constexpr double kApLensZ = 100.0;

// AP with the Amici centered at z: detector placed at best focus for the
// central wavelength, perpendicular to the central chief ray.
SystemConfig ap_with_prism_at(const AmiciParams& amici, double z) {
  SystemConfig c = base_config("AP");
  c.elements.push_back({"relay", ThinLensElement{50.0}, Vec3<double>(0, 0, kApLensZ), {}});
  c.elements.push_back(amici_element(amici, z));
  c.elements.push_back({"detector", DetectorElement{}, Vec3<double>(0, 0, 2 * kApLensZ), Vec3<double>(0, 0, 180)});
  const OpticalSystem probe(c);
  const auto chief = probe.trace_to_last_surface(probe.chief_ray({}, 520.0));
  if (!chief) throw DomainError("AP chief ray dies");
  const auto bundle = bundle_exit(probe, {}, 520.0, 6);
  const double t = best_focus_distance(bundle, *chief, 1.0, 250.0);
  const Vec3<double> det = chief->origin + chief->direction * t;
  const double ry = std::atan2(chief->direction.x, chief->direction.z);
  const double rx = -std::asin(chief->direction.y);
  c.elements.back() = {"detector", DetectorElement{}, det, Vec3<double>(rad_to_deg(rx), rad_to_deg(ry), 180.0)};
  return c;
}

// The prism position is chosen so the center-field spread equals the target.
SystemConfig build_ap(const AmiciParams& amici) {
  double lo = kApLensZ + 20.0, hi = 2 * kApLensZ - 20.0;  // spread falls as the prism nears the detector
  auto spread = [&](double z) { return spectral_spread_um(OpticalSystem(ap_with_prism_at(amici, z))); };
  for (int i = 0; i < 50; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (spread(mid) > kTargetSpreadUm)
      lo = mid;
    else
      hi = mid;
  }
  return ap_with_prism_at(amici, 0.5 * (lo + hi));
}

}  // namespace

double amici_deviation_rad(const AmiciParams& p, double wavelength_nm) { return amici_deviation(p, wavelength_nm); }

AmiciParams solve_direct_view(AmiciParams p, double wavelength_nm) {
  double lo = p.a1_deg - 1.0, hi = p.a1_deg + 1.0;
  auto dev = [&](double a1) {
    AmiciParams q = p;
    q.a1_deg = a1;
    return amici_deviation(q, wavelength_nm);
  };
  double f_lo = dev(lo);
  if ((f_lo < 0.0) == (dev(hi) < 0.0)) throw DomainError("solve_direct_view: no zero-deviation A1 within +-1 deg");
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = dev(mid);
    if ((f_mid < 0.0) == (f_lo < 0.0))
      lo = mid, f_lo = f_mid;
    else
      hi = mid;
  }
  p.a1_deg = 0.5 * (lo + hi);
  return p;
}

AmiciParams reported_amici_design() {
  const auto& cat = GlassCatalog::schott();
  return solve_direct_view({5.1, 29.2, 47.86, cat.at("N-SK2"), cat.at("N-SF10")});
}

ReferenceSystem parse_reference_name(const std::string& name) {
  if (name == "SP") return ReferenceSystem::SP;
  if (name == "AP") return ReferenceSystem::AP;
  if (name == "mSP") return ReferenceSystem::mSP;
  if (name == "mAP") return ReferenceSystem::mAP;
  throw ConfigError("unknown reference system '" + name + "' (expected SP, AP, mSP or mAP)");
}

std::string to_string(ReferenceSystem s) {
  switch (s) {
    case ReferenceSystem::SP: return "SP";
    case ReferenceSystem::AP: return "AP";
    case ReferenceSystem::mSP: return "mSP";
    case ReferenceSystem::mAP: return "mAP";
  }
  return "?";
}

SystemConfig build_reference_system(ReferenceSystem which, const AmiciParams& amici) {
  SystemConfig c;
  if (which == ReferenceSystem::SP || which == ReferenceSystem::mSP) {
    c = build_sp();
  } else {
    c = build_ap(amici);
  }
  if (which == ReferenceSystem::mSP || which == ReferenceSystem::mAP) {
    for (auto& e : c.elements)
      if (e.is_dispersive()) e.rotation_deg.x += kMisalignmentDeg;
  }
  c.name = to_string(which);
  return c;
}

SystemConfig build_reference_system(const std::string& name, const AmiciParams& amici) {
  return build_reference_system(parse_reference_name(name), amici);
}

std::vector<SpreadPoint> spectral_spread_curve(const OpticalSystem& system, Vec2 field_mm,
                                               const std::vector<double>& wavelengths) {
  std::vector<SpreadPoint> out;
  Vec2 first;
  for (std::size_t i = 0; i < wavelengths.size(); ++i) {
    const double wl = wavelengths[i];
    const auto p = system.trace(system.chief_ray(field_mm, wl));
    if (!p) throw DomainError("chief ray dies at " + std::to_string(wl) + " nm");
    if (i == 0) first = *p;
    const double dx = (p->x - first.x) * 1e3, dy = (p->y - first.y) * 1e3;
    out.push_back({wl, dx, dy, std::hypot(dx, dy)});
  }
  return out;
}

double spectral_spread_um(const OpticalSystem& system, Vec2 field_mm) {
  const auto& c = system.config();
  return spectral_spread_curve(system, field_mm, {c.wavelength_min_nm, c.wavelength_max_nm}).back().distance_um;
}

}  // namespace cassi
