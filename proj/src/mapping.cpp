#include "cassi/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cassi/parallel.hpp"
#include "cassi/sampling.hpp"

namespace cassi {

AcquisitionGeometry fit_acquisition_geometry(const OpticalSystem& system, const SceneGrid& grid,
                                             const std::vector<double>& wavelengths, int margin) {
  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  double umax = -umin, vmax = -umin;
  std::vector<std::pair<int, int>> border;
  for (int c = 0; c < grid.width; ++c) border.push_back({0, c}), border.push_back({grid.height - 1, c});
  for (int r = 1; r + 1 < grid.height; ++r) border.push_back({r, 0}), border.push_back({r, grid.width - 1});
  for (double wl : wavelengths) {
    const auto n = system.indices(wl);
    for (const auto& [r, c] : border) {
      const auto p = system.trace(system.chief_ray(grid.point(r, c), wl), n);
      if (!p) continue;
      umin = std::min(umin, p->x), umax = std::max(umax, p->x);
      vmin = std::min(vmin, p->y), vmax = std::max(vmax, p->y);
    }
  }
  if (!(umax >= umin)) throw DomainError("no chief ray of the scene border reaches the detector");
  const double p = system.pitch_mm();
  const auto& s = system.config().sensor;
  // sensor pixel centers sit at (k - (N-1)/2) p
  const double off_u = (s.pixels_x - 1) / 2.0 - std::floor((s.pixels_x - 1) / 2.0);
  const double off_v = (s.pixels_y - 1) / 2.0 - std::floor((s.pixels_y - 1) / 2.0);
  AcquisitionGeometry g;
  g.pitch_mm = p;
  g.origin_u_mm = (std::floor(umin / p - margin - off_u) + off_u) * p;
  g.origin_v_mm = (std::floor(vmin / p - margin - off_v) + off_v) * p;
  g.width = static_cast<int>(std::ceil((umax - g.origin_u_mm) / p)) + margin + 1;
  g.height = static_cast<int>(std::ceil((vmax - g.origin_v_mm) / p)) + margin + 1;
  return g;
}

MappingTable::MappingTable(int height, int width, std::vector<double> wavelengths, AcquisitionGeometry geometry)
    : height_(height), width_(width), wavelengths_(std::move(wavelengths)), geometry_(geometry) {
  if (height < 1 || width < 1 || wavelengths_.empty()) throw DomainError("mapping table needs a non-empty grid");
  const std::size_t n = static_cast<std::size_t>(height) * width * wavelengths_.size();
  entries_.assign(n, Vec2{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()});
  valid_.assign(n, 0);
}

void MappingTable::invalidate(int row, int col, int band) {
  entries_[index(row, col, band)] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  valid_[index(row, col, band)] = 0;
}

std::vector<double> MappingTable::native_wavelengths() const {
  if (sub_bands < 1 || bands() % sub_bands != 0) throw DomainError("mapping band count is not a multiple of sub_bands");
  std::vector<double> out;
  for (int k = 0; k < bands(); k += sub_bands) {
    double s = 0.0;
    for (int j = 0; j < sub_bands; ++j) s += wavelengths_[k + j];
    out.push_back(s / sub_bands);
  }
  return out;
}

std::size_t MappingTable::missing() const { return std::count(valid_.begin(), valid_.end(), 0); }

MappingTable MappingTable::reframed(const AcquisitionGeometry& target) const {
  if (target.pitch_mm != geometry_.pitch_mm) throw GeometryMismatch("reframe: pitch differs");
  MappingTable out(height_, width_, wavelengths_, target);
  out.system_name = system_name;
  out.scene_pitch_mm = scene_pitch_mm;
  out.sub_bands = sub_bands;
  const double du = (geometry_.origin_u_mm - target.origin_u_mm) / target.pitch_mm;
  const double dv = (geometry_.origin_v_mm - target.origin_v_mm) / target.pitch_mm;
  for (int k = 0; k < bands(); ++k)
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < width_; ++c)
        if (valid(r, c, k)) out.set(r, c, k, {at(r, c, k).x + du, at(r, c, k).y + dv});
  return out;
}

MappingTable build_mapping(const OpticalSystem& system, const SceneGrid& grid, const std::vector<double>& wavelengths,
                           const AcquisitionGeometry& geometry) {
  MappingTable t(grid.height, grid.width, wavelengths, geometry);
  t.system_name = system.name();
  t.scene_pitch_mm = grid.pitch_mm;
  parallel_for(wavelengths.size(), [&](std::size_t k) {
    const auto n = system.indices(wavelengths[k]);
    for (int r = 0; r < grid.height; ++r)
      for (int c = 0; c < grid.width; ++c) {
        const auto p = system.trace(system.chief_ray(grid.point(r, c), wavelengths[k]), n);
        if (p) t.set(r, c, static_cast<int>(k), geometry.to_pixels(*p));
      }
  });
  return t;
}

MappingTable build_mapping(const OpticalSystem& system, const SceneGrid& grid, const std::vector<double>& wavelengths,
                           int margin) {
  return build_mapping(system, grid, wavelengths, fit_acquisition_geometry(system, grid, wavelengths, margin));
}

MappingTable shift_only_mapping(const MappingTable& m) {
  MappingTable out(m.height(), m.width(), m.wavelengths(), m.geometry());
  out.system_name = m.system_name + " (shift only)";
  out.scene_pitch_mm = m.scene_pitch_mm;
  out.sub_bands = m.sub_bands;
  const int r0 = m.height() / 2, c0 = m.width() / 2;
  const int ref = m.bands() / 2;
  if (!m.valid(r0, c0, ref)) throw DomainError("shift_only_mapping: center entry missing");
  const double y0 = m.at(r0, c0, ref).y;
  const double scale = m.scene_pitch_mm / m.geometry().pitch_mm;
  for (int k = 0; k < m.bands(); ++k) {
    if (!m.valid(r0, c0, k)) throw DomainError("shift_only_mapping: center entry missing");
    const double x0 = m.at(r0, c0, k).x;
    for (int r = 0; r < m.height(); ++r)
      for (int col = 0; col < m.width(); ++col) out.set(r, col, k, {x0 + (col - c0) * scale, y0 + (r - r0) * scale});
  }
  return out;
}

SpotDiagram psf(const OpticalSystem& system, Vec2 field_mm, double wavelength_nm, int ray_count) {
  if (ray_count < 7) throw DomainError("psf needs at least 7 rays");
  const Ray<double> chief = system.chief_ray(field_mm, wavelength_nm);
  const Frame f = frame_around(chief.direction);
  const auto n = system.indices(wavelength_nm);
  SpotDiagram s;
  s.wavelength_nm = wavelength_nm;
  s.field_mm = field_mm;
  const auto pattern = hexapolar_pattern(hexapolar_rings_for(ray_count));
  s.launched = pattern.size();
  for (const Vec2& p : pattern) {
    const Ray<double> r{chief.origin, cone_direction(f, p, system.config().numerical_aperture), wavelength_nm, true};
    if (const auto hit = system.trace(r, n)) s.points_um.push_back({hit->x * 1e3, hit->y * 1e3});
  }
  if (s.points_um.empty())
    throw DomainError("psf: every ray dies for field (" + std::to_string(field_mm.x) + ", " +
                      std::to_string(field_mm.y) + ") mm at " + std::to_string(wavelength_nm) + " nm");
  for (const auto& p : s.points_um) s.centroid_um.x += p.x, s.centroid_um.y += p.y;
  s.centroid_um.x /= s.points_um.size();
  s.centroid_um.y /= s.points_um.size();
  double acc = 0.0;
  for (const auto& p : s.points_um) {
    const double dx = p.x - s.centroid_um.x, dy = p.y - s.centroid_um.y;
    acc += dx * dx + dy * dy;
  }
  s.rms_radius_um = std::sqrt(acc / s.points_um.size());
  return s;
}

std::vector<Point2<double>> field_grid(int grid, double half_field_mm) {
  if (grid < 2) throw DomainError("field grid needs at least 2 points per side");
  std::vector<Point2<double>> out;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      out.push_back({-half_field_mm + 2 * half_field_mm * j / (grid - 1), -half_field_mm + 2 * half_field_mm * i / (grid - 1)});
  return out;
}

namespace {

std::size_t closest(const std::vector<double>& v, double x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i] - x) < std::abs(v[best] - x)) best = i;
  return best;
}

}  // namespace

DistortionMap distortion_map(const OpticalSystem& system, const std::vector<double>& wavelengths, int grid,
                             double half_field_mm) {
  if (grid % 2 == 0) throw DomainError("distortion_map: grid must be odd so the center field is sampled");
  DistortionMap m;
  m.system_name = system.name();
  m.wavelengths = wavelengths;
  m.field_mm = field_grid(grid, half_field_mm);
  std::vector<Point2<double>> field_um;
  for (const auto& p : m.field_mm) field_um.push_back({p.x * 1e3, p.y * 1e3});

  std::vector<std::vector<std::optional<Point2<double>>>> traced(wavelengths.size());
  for (std::size_t k = 0; k < wavelengths.size(); ++k) {
    const auto n = system.indices(wavelengths[k]);
    for (const auto& p : m.field_mm) {
      const auto hit = system.trace(system.chief_ray({p.x, p.y}, wavelengths[k]), n);
      traced[k].push_back(hit ? std::optional<Point2<double>>({hit->x * 1e3, hit->y * 1e3}) : std::nullopt);
    }
  }
  const auto fit = fit_distortion(traced, field_um, m.field_mm.size() / 2, closest(wavelengths, kCentralWavelength));
  m.magnification = fit.magnification;
  m.displacement_um = fit.displacement;
  m.missing = fit.missing;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& band : fit.displacement)
    for (const auto& d : band)
      if (d) {
        const double e = magnitude(*d);
        m.max_um = std::max(m.max_um, e);
        sum += e;
        ++count;
      }
  if (count == 0) throw DomainError("distortion_map: every chief ray is dead");
  m.mean_um = sum / count;
  return m;
}

std::string distortion_csv(const DistortionMap& m) {
  std::ostringstream out;
  out.precision(10);
  out << "x_s_mm,y_s_mm,wavelength_nm,dx_um,dy_um\n";
  for (std::size_t k = 0; k < m.wavelengths.size(); ++k)
    for (std::size_t p = 0; p < m.field_mm.size(); ++p) {
      out << m.field_mm[p].x << ',' << m.field_mm[p].y << ',' << m.wavelengths[k] << ',';
      if (const auto& d = m.displacement_um[k][p])
        out << d->x << ',' << d->y << '\n';
      else
        out << "nan,nan\n";
    }
  return out.str();
}

}  // namespace cassi
