// Spatio-spectral mapping, spot diagrams and distortion maps.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cassi/distortion.hpp"
#include "cassi/system.hpp"

namespace cassi {

// Scene sampled on the object plane: pixel (row, col) sits at
// ((col - (W-1)/2) p, (row - (H-1)/2) p) with p the pitch in mm.
struct SceneGrid {
  int height = 64;
  int width = 64;
  double pitch_mm = 0.01;

  Vec2 point(double row, double col) const {
    return {(col - (width - 1) / 2.0) * pitch_mm, (row - (height - 1) / 2.0) * pitch_mm};
  }
};

// Detector window holding an acquisition. Pixel (row, col) is centered at
// detector coordinates (origin_u + col p, origin_v + row p) in mm.
struct AcquisitionGeometry {
  int width = 0;
  int height = 0;
  double origin_u_mm = 0.0;
  double origin_v_mm = 0.0;
  double pitch_mm = 0.01;

  Vec2 to_pixels(Vec2 detector_mm) const {
    return {(detector_mm.x - origin_u_mm) / pitch_mm, (detector_mm.y - origin_v_mm) / pitch_mm};
  }
  bool operator==(const AcquisitionGeometry&) const = default;
};

// Window covering every chief-ray position of the scene border at the given
// wavelengths plus `margin` pixels, snapped to the sensor pixel lattice.
AcquisitionGeometry fit_acquisition_geometry(const OpticalSystem& system, const SceneGrid& grid,
                                             const std::vector<double>& wavelengths, int margin = 4);

// f(row, col, band) -> fractional acquisition pixel (x = column, y = row).
class MappingTable {
 public:
  MappingTable() = default;
  MappingTable(int height, int width, std::vector<double> wavelengths, AcquisitionGeometry geometry);

  int height() const { return height_; }
  int width() const { return width_; }
  int bands() const { return static_cast<int>(wavelengths_.size()); }
  const std::vector<double>& wavelengths() const { return wavelengths_; }
  const AcquisitionGeometry& geometry() const { return geometry_; }
  std::string system_name;
  double scene_pitch_mm = 0.01;
  // Consecutive entries per native band when the table samples sub-band
  // wavelengths (see render_mapping).
  int sub_bands = 1;
  int native_bands() const { return bands() / sub_bands; }
  std::vector<double> native_wavelengths() const;  // mean of each group

  std::size_t index(int row, int col, int band) const {
    return (static_cast<std::size_t>(band) * height_ + row) * width_ + col;
  }
  Vec2 at(int row, int col, int band) const { return entries_[index(row, col, band)]; }
  bool valid(int row, int col, int band) const { return valid_[index(row, col, band)] != 0; }
  void set(int row, int col, int band, Vec2 v) {
    entries_[index(row, col, band)] = v;
    valid_[index(row, col, band)] = 1;
  }
  void invalidate(int row, int col, int band);
  std::size_t missing() const;

  // Same entries expressed in another acquisition window.
  MappingTable reframed(const AcquisitionGeometry& target) const;

 private:
  int height_ = 0, width_ = 0;
  std::vector<double> wavelengths_;
  AcquisitionGeometry geometry_;
  std::vector<Vec2> entries_;
  std::vector<std::uint8_t> valid_;
};

// Chief-ray mapping of every scene pixel at every wavelength.
MappingTable build_mapping(const OpticalSystem& system, const SceneGrid& grid, const std::vector<double>& wavelengths,
                           const AcquisitionGeometry& geometry);
MappingTable build_mapping(const OpticalSystem& system, const SceneGrid& grid, const std::vector<double>& wavelengths,
                           int margin = 4);

// The x-shift-only rule: at unit magnification each band is the scene shifted
// along x by the center pixel's displacement; rows keep the center row's y
// at the middle band.
MappingTable shift_only_mapping(const MappingTable& mapping);

struct SpotDiagram {
  std::vector<Vec2> points_um;  // detector coordinates
  Vec2 centroid_um;
  double rms_radius_um = 0.0;
  double wavelength_nm = 0.0;
  Vec2 field_mm;
  std::size_t launched = 0;
};

// Hexapolar bundle over the NA cone around the chief ray. The pattern uses
// the fewest rings holding at least `ray_count` rays.
SpotDiagram psf(const OpticalSystem& system, Vec2 field_mm, double wavelength_nm, int ray_count);

struct DistortionMap {
  std::string system_name;
  std::vector<double> wavelengths;
  std::vector<Point2<double>> field_mm;
  std::vector<std::vector<std::optional<Point2<double>>>> displacement_um;  // [band][point]
  Point2<double> magnification;  // per detector axis
  double max_um = 0.0;
  double mean_um = 0.0;
  std::size_t missing = 0;
};

// Distortion over a grid x grid field of +-half_field_mm.
DistortionMap distortion_map(const OpticalSystem& system, const std::vector<double>& wavelengths = {450.0, 520.0, 650.0},
                             int grid = 21, double half_field_mm = 2.5);

// Rows x_s, y_s (mm), wavelength (nm), dx, dy (um).
std::string distortion_csv(const DistortionMap& map);

// Regular field grid, row-major from (-h, -h); the center point is grid*grid/2 for odd grids.
std::vector<Point2<double>> field_grid(int grid, double half_field_mm);

}  // namespace cassi
