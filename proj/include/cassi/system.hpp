// Optical elements, system configurations and whole-system tracing.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cassi/glass.hpp"
#include "cassi/prism.hpp"
#include "cassi/trace.hpp"

namespace cassi {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

// Ideal thin lens in its local z = 0 plane. The outgoing ray points at the
// focal-plane image of the incoming direction, so every ray of a parallel
// bundle meets at (f tan, f tan, f); the center ray is undeviated.
template <class T>
Ray<T> thin_lens_refract(const Ray<T>& ray, double focal_mm, const Pose<T>& pose = {}) {
  if (focal_mm == 0.0) throw DomainError("thin lens focal length must be non-zero");
  Ray<T> out = ray;
  if (!ray.alive) return out;
  const Vec3<T> o = pose.to_local(ray.origin);
  const Vec3<T> d = pose.dir_to_local(ray.direction);
  if (!(value_of(d.z) > 0.0)) {
    out.alive = false;
    return out;
  }
  const T t = -o.z / d.z;
  if (value_of(t) < 0.0) {
    out.alive = false;
    return out;
  }
  const Vec3<T> p(o.x + d.x * t, o.y + d.y * t, T(0.0));
  const Vec3<T> image(d.x / d.z * focal_mm, d.y / d.z * focal_mm, T(focal_mm));
  Vec3<T> dir = normalized(image - p);
  if (focal_mm < 0.0) dir = -dir;
  out.origin = pose.to_parent(p);
  out.direction = pose.dir_to_parent(dir);
  return out;
}

struct ThinLensElement {
  double focal_mm = 50.0;
};

struct DoubletElement {
  std::string part;
  std::array<double, 3> radii_mm{};
  std::array<double, 2> thickness_mm{};
  std::array<GlassModel, 2> glasses;
  double aperture_mm = 12.7;
};

struct PrismElement {
  std::vector<double> apex_deg;
  std::vector<int> face_signs;
  std::vector<GlassModel> glasses;
  std::vector<double> thickness_mm;
  double aperture_mm = 12.7;
};

struct DetectorElement {};

// Pose of an element about its geometric center: rotation_deg holds the
// intrinsic angles (about x, about y, about z) applied in y, x, z order.
struct Element {
  std::string name;
  std::variant<ThinLensElement, DoubletElement, PrismElement, DetectorElement> kind;
  Vec3<double> position_mm;
  Vec3<double> rotation_deg;

  Pose<double> pose() const;
  bool is_dispersive() const { return std::holds_alternative<PrismElement>(kind); }
};

struct SensorSpec {
  int pixels_x = 512;
  int pixels_y = 512;
  double pitch_um = 10.0;
};

struct SystemConfig {
  std::string name = "custom";
  std::vector<Element> elements;  // ordered along propagation; the last one is the detector
  SensorSpec sensor;
  double wavelength_min_nm = 450.0;
  double wavelength_max_nm = 650.0;
  int band_count = 28;
  double numerical_aperture = 0.05;
  double focal_mm = 50.0;
  double object_z_mm = 0.0;

  std::vector<double> band_wavelengths() const;  // linspace(min, max, band_count)
  double field_of_view_mm_x() const { return sensor.pixels_x * sensor.pitch_um * 1e-3; }
  double field_of_view_mm_y() const { return sensor.pixels_y * sensor.pitch_um * 1e-3; }
  const Element* dispersive_element() const;
};

// JSON (de)serialization. Malformed input raises ConfigError with a line
// number for syntax errors and a key path for semantic ones.
SystemConfig parse_system_config(const std::string& text, const std::string& source = "<config>",
                                 const GlassCatalog& catalog = GlassCatalog::schott());
SystemConfig load_system_config(const std::string& path, const GlassCatalog& catalog = GlassCatalog::schott());
std::string dump_system_config(const SystemConfig& config);
void save_system_config(const SystemConfig& config, const std::string& path);

// Doublet prescription from a lens data file (radii, thicknesses, glasses).
DoubletElement parse_doublet(const std::string& text, const std::string& source = "<doublet>",
                             const GlassCatalog& catalog = GlassCatalog::schott());
// The AC254-050-A prescription shipped with the library.
const DoubletElement& ac254_050_a();

// The compiled, traceable form of a SystemConfig.
class OpticalSystem {
 public:
  explicit OpticalSystem(SystemConfig config);

  const SystemConfig& config() const { return config_; }
  const std::string& name() const { return config_.name; }
  const Pose<double>& detector_pose() const { return detector_; }
  // Center of the first thin lens; chief rays aim at it.
  Vec3<double> objective_center() const { return objective_; }

  // Refractive indices of every surface for one wavelength.
  struct Indices {
    double wavelength = 0.0;
    std::vector<std::pair<double, double>> n;
  };
  Indices indices(double wavelength_nm) const;

  // Trace to the detector plane; returns detector-local (u, v) in mm.
  std::optional<Vec2> trace(const Ray<double>& ray, const Indices& n) const;
  std::optional<Vec2> trace(const Ray<double>& ray) const { return trace(ray, indices(ray.wavelength)); }
  // Same, also returning the ray as it reaches the detector.
  std::optional<Vec2> trace(const Ray<double>& ray, const Indices& n, Ray<double>* at_detector) const;

  Ray<double> chief_ray(Vec2 object_mm, double wavelength_nm) const;
  // Direction of the chief ray from `object_mm` as it leaves the last
  // surface before the detector; nullopt when the ray dies.
  std::optional<Ray<double>> trace_to_last_surface(const Ray<double>& ray) const;

  double pitch_mm() const { return config_.sensor.pitch_um * 1e-3; }

 private:
  struct Stage {
    std::optional<double> focal;  // thin lens when set
    Pose<double> lens_pose;
    std::vector<Surface<double>> surfaces;
  };
  std::optional<Ray<double>> propagate(Ray<double> ray, const Indices& n) const;

  SystemConfig config_;
  std::vector<Stage> stages_;
  Pose<double> detector_;
  Vec3<double> objective_;
};

// Plane surfaces of a prism element placed at `pose`.
std::vector<Surface<double>> prism_element_surfaces(const PrismElement& p, const Pose<double>& pose);

// Reference layouts.
struct AmiciParams {
  double alpha_c_deg = 5.1;
  double a1_deg = 29.2;
  double a2_deg = 47.9;
  GlassModel glass1;
  GlassModel glass2;
  std::array<double, 3> thickness_mm{5.0, 7.0, 5.0};  // center thickness of each wedge
};
// The design reported for the direct-view assembly (see the README).
AmiciParams reported_amici_design();
// Deviation of a chief ray entering along the element axis (radians).
double amici_deviation_rad(const AmiciParams& p, double wavelength_nm = 520.0);
// Adjusts A1 (within +-1 deg) so the central wavelength leaves undeviated.
AmiciParams solve_direct_view(AmiciParams p, double wavelength_nm = 520.0);

enum class ReferenceSystem { SP, AP, mSP, mAP };
ReferenceSystem parse_reference_name(const std::string& name);  // ConfigError for unknown names
std::string to_string(ReferenceSystem s);

inline constexpr double kMisalignmentDeg = 5.0;
inline constexpr double kTargetSpreadUm = 830.0;

// Builds one of the four layouts. The Amici parameters only affect AP/mAP.
SystemConfig build_reference_system(ReferenceSystem which, const AmiciParams& amici = reported_amici_design());
SystemConfig build_reference_system(const std::string& name, const AmiciParams& amici = reported_amici_design());

// Element pose for an Amici assembly whose chief ray meets the first face at alpha_c.
double amici_rotation_y_deg(const AmiciParams& p);

// Minimum-deviation incidence for a single prism (radians).
double minimum_deviation_incidence(double apex_rad, double n);

struct SpreadPoint {
  double wavelength_nm;
  double dx_um, dy_um;  // detector displacement relative to the first wavelength
  double distance_um;
};
// Chief-ray spectral spread at a field point; throws DomainError naming the
// wavelength of a dead chief ray.
std::vector<SpreadPoint> spectral_spread_curve(const OpticalSystem& system, Vec2 field_mm,
                                               const std::vector<double>& wavelengths);
// distance between the extreme wavelengths of the configured range (um).
double spectral_spread_um(const OpticalSystem& system, Vec2 field_mm = {});

}  // namespace cassi
