// Hyperspectral cubes, binary coding masks and detector acquisitions.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cassi/mapping.hpp"

namespace cassi {

// H x W x N radiance cube stored band-major: data[(band * H + row) * W + col].
struct SpectralCube {
  int height = 0;
  int width = 0;
  std::vector<double> wavelengths;  // nm, ascending
  double pitch_um = 10.0;
  std::vector<double> data;

  SpectralCube() = default;
  SpectralCube(int height, int width, std::vector<double> wavelengths, double pitch_um = 10.0);

  int bands() const { return static_cast<int>(wavelengths.size()); }
  std::size_t index(int row, int col, int band) const {
    return (static_cast<std::size_t>(band) * height + row) * width + col;
  }
  double& at(int row, int col, int band) { return data[index(row, col, band)]; }
  double at(int row, int col, int band) const { return data[index(row, col, band)]; }
  double band_sum(int band) const;
  double total() const;
  SceneGrid grid() const { return {height, width, pitch_um * 1e-3}; }

  // DomainError on negative or non-finite radiance, non-ascending wavelengths
  // or a data size that does not match the shape.
  void validate() const;
};

struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // row-major, 0 or 1
  std::uint64_t seed = 0;
  double open_ratio = 1.0;

  static Mask filled(int height, int width, bool open);
  // Each entry open with probability open_ratio.
  static Mask random(int height, int width, double open_ratio, std::uint64_t seed);
  // A single open column.
  static Mask slit(int height, int width, int column);

  bool open(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col] != 0; }
  double open_fraction() const;
};

struct Acquisition {
  AcquisitionGeometry geometry;
  std::vector<double> data;  // geometry.height x geometry.width, row-major
  std::string system_name;
  int rays_per_pixel = 0;
  std::uint64_t seed = 0;
  std::vector<double> wavelengths;  // rendered (oversampled) bands
  std::vector<double> dead_fraction;  // per rendered band
  std::vector<std::string> warnings;

  int height() const { return geometry.height; }
  int width() const { return geometry.width; }
  double& at(int row, int col) { return data[static_cast<std::size_t>(row) * geometry.width + col]; }
  double at(int row, int col) const { return data[static_cast<std::size_t>(row) * geometry.width + col]; }
  double total() const;
};

// Elementwise product of every band with the mask; DomainError on shape mismatch.
SpectralCube code_scene(const SpectralCube& cube, const Mask& mask);

// Binary container: "CASSIHSC", u32 version, u32 H, W, bands, channels,
// f64 pitch (um), f64 wavelengths[bands], u32 metadata length, metadata
// (JSON text), then f32 data[band][channel][row][col]; all little-endian.
struct Container {
  int height = 0, width = 0, channels = 1;
  double pitch_um = 10.0;
  std::vector<double> wavelengths;
  std::string metadata = "{}";
  std::vector<float> data;
};
void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);  // ConfigError on malformed files

void save_cube(const std::string& path, const SpectralCube& cube);
SpectralCube load_cube(const std::string& path);
void save_acquisition(const std::string& path, const Acquisition& acq);
Acquisition load_acquisition(const std::string& path);
void save_mapping(const std::string& path, const MappingTable& mapping);
MappingTable load_mapping(const std::string& path);

// Portable graymap (binary P5). Masks map 1 to 255; images are scaled to their maximum.
void save_mask_pgm(const std::string& path, const Mask& mask);
Mask load_mask_pgm(const std::string& path);  // nonzero pixels are open
void save_pgm(const std::string& path, const std::vector<double>& image, int height, int width);

}  // namespace cassi
