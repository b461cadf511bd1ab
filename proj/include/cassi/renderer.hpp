// Backward Monte-Carlo rendering of coded scenes through an optical system.
#pragma once

#include <cstdint>
#include <vector>

#include "cassi/cube.hpp"
#include "cassi/system.hpp"

namespace cassi {

struct RenderConfig {
  int oversampling = 4;
  int rays_per_pixel = 20;  // per scene pixel and rendered band
  double airy_diameter_at_520 = 2.5;  // first-zero diameter in detector pixels
  std::uint64_t seed = 0;
  int margin = 4;  // acquisition window margin in pixels, added to the largest Airy radius
};

// Sub-band centers: band k covers the interval between the midpoints to its
// neighbours (mirrored at the ends) and is split into n equal parts.
std::vector<double> oversampled_wavelengths(const std::vector<double>& wavelengths, int n);
// Each band replicated into n sub-bands carrying 1/n of its radiance.
SpectralCube oversample_cube(const SpectralCube& cube, int n);

struct AiryKernel {
  int radius = 0;  // support is (2 radius + 1)^2
  double first_zero_radius_px = 0.0;
  double truncation_radius_px = 0.0;  // second zero
  std::vector<double> weights;  // row-major, sums to 1

  double at(int dy, int dx) const { return weights[std::size_t(dy + radius) * (2 * radius + 1) + dx + radius]; }
};
// Pixel-averaged Airy pattern (2 J1(x) / x)^2 with first-zero diameter
// diameter_at_520 * wavelength / 520 pixels, truncated at its second zero.
AiryKernel airy_kernel(double wavelength_nm, double pitch_um, double diameter_at_520_px);

// Window used for both rendering and mapping of a scene: chief rays of the
// scene border at the rendered sub-band wavelengths, widened by the margin
// and the Airy radius of the longest sub-band.
AcquisitionGeometry render_geometry(const OpticalSystem& system, const SceneGrid& grid,
                                    const std::vector<double>& wavelengths, const RenderConfig& config);

// Mapping at the rendered sub-band wavelengths over the render window, with
// sub_bands set to the oversampling factor.
MappingTable render_mapping(const OpticalSystem& system, const SceneGrid& grid, const std::vector<double>& wavelengths,
                            const RenderConfig& config);

// Renders the (already coded) cube. Per rendered band every scene pixel sends
// rays_per_pixel rays from stratified jittered positions in directions drawn
// from a randomly rotated hexapolar NA pattern; each ray deposits its share of
// the radiance in the nearest detector pixel. The band image is convolved
// with the Airy kernel and bands are summed. The random stream of a pixel
// depends only on (seed, band, pixel).
Acquisition render(const SpectralCube& cube, const OpticalSystem& system, const RenderConfig& config = {});
Acquisition render(const SpectralCube& cube, const OpticalSystem& system, const RenderConfig& config,
                   const AcquisitionGeometry& geometry);

// Same-size 2-D convolution with zero padding.
std::vector<double> convolve(const std::vector<double>& image, int height, int width, const AiryKernel& kernel);

}  // namespace cassi
