#include "cassi/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cassi/parallel.hpp"
#include "cassi/sampling.hpp"

namespace cassi {

std::vector<double> oversampled_wavelengths(const std::vector<double>& wl, int n) {
  if (n < 1) throw DomainError("oversampling factor must be at least 1");
  if (n == 1 || wl.size() < 2) {
    std::vector<double> out;
    for (double w : wl)
      for (int j = 0; j < n; ++j) out.push_back(w);
    return out;
  }
  std::vector<double> out;
  const std::size_t m = wl.size();
  for (std::size_t k = 0; k < m; ++k) {
    const double lo = k > 0 ? 0.5 * (wl[k - 1] + wl[k]) : wl[0] - 0.5 * (wl[1] - wl[0]);
    const double hi = k + 1 < m ? 0.5 * (wl[k] + wl[k + 1]) : wl[m - 1] + 0.5 * (wl[m - 1] - wl[m - 2]);
    for (int j = 0; j < n; ++j) out.push_back(lo + (j + 0.5) * (hi - lo) / n);
  }
  return out;
}

SpectralCube oversample_cube(const SpectralCube& cube, int n) {
  if (n < 1) throw DomainError("oversampling factor must be at least 1");
  if (n == 1) return cube;
  SpectralCube out(cube.height, cube.width, oversampled_wavelengths(cube.wavelengths, n), cube.pitch_um);
  const std::size_t plane = std::size_t(cube.height) * cube.width;
  for (int k = 0; k < cube.bands(); ++k)
    for (int j = 0; j < n; ++j)
      for (std::size_t i = 0; i < plane; ++i) out.data[(std::size_t(k) * n + j) * plane + i] = cube.data[k * plane + i] / n;
  return out;
}

namespace {

constexpr double kAiryZero1 = 3.8317059702075125;
constexpr double kAiryZero2 = 7.0155866698156188;
constexpr int kAirySubsamples = 8;

double airy(double x) {
  if (x < 1e-8) return 1.0;
  const double j = 2.0 * std::cyl_bessel_j(1.0, x) / x;
  return j * j;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t band, std::uint64_t pixel) {
  return splitmix(splitmix(splitmix(seed) ^ band) ^ pixel);
}

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

}  // namespace

AiryKernel airy_kernel(double wavelength_nm, double pitch_um, double diameter_at_520_px) {
  if (!(wavelength_nm > 0.0)) throw DomainError("airy kernel wavelength must be positive");
  if (!(pitch_um > 0.0) || !(diameter_at_520_px > 0.0)) throw DomainError("airy kernel size must be positive");
  AiryKernel k;
  k.first_zero_radius_px = 0.5 * diameter_at_520_px * wavelength_nm / 520.0;
  k.truncation_radius_px = k.first_zero_radius_px * kAiryZero2 / kAiryZero1;
  k.radius = static_cast<int>(std::ceil(k.truncation_radius_px + 0.5));
  const int side = 2 * k.radius + 1;
  k.weights.assign(std::size_t(side) * side, 0.0);
  const double scale = kAiryZero1 / k.first_zero_radius_px;
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      double acc = 0.0;
      for (int sy = 0; sy < kAirySubsamples; ++sy)
        for (int sx = 0; sx < kAirySubsamples; ++sx) {
          const double y = dy - 0.5 + (sy + 0.5) / kAirySubsamples;
          const double x = dx - 0.5 + (sx + 0.5) / kAirySubsamples;
          const double r = std::hypot(x, y);
          if (r <= k.truncation_radius_px) acc += airy(r * scale);
        }
      k.weights[std::size_t(dy + k.radius) * side + dx + k.radius] = acc;
    }
  const double sum = std::accumulate(k.weights.begin(), k.weights.end(), 0.0);
  if (sum == 0.0) {
    // disk smaller than the subsampling: a delta
    k.weights[std::size_t(k.radius) * side + k.radius] = 1.0;
    return k;
  }
  for (auto& w : k.weights) w /= sum;
  return k;
}

std::vector<double> convolve(const std::vector<double>& image, int height, int width, const AiryKernel& kernel) {
  std::vector<double> out(image.size(), 0.0);
  const int r = kernel.radius;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double v = image[std::size_t(y) * width + x];
      if (v == 0.0) continue;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= height) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= width) continue;
          out[std::size_t(yy) * width + xx] += v * kernel.at(dy, dx);
        }
      }
    }
  return out;
}

AcquisitionGeometry render_geometry(const OpticalSystem& system, const SceneGrid& grid,
                                    const std::vector<double>& wavelengths, const RenderConfig& config) {
  const auto sub = oversampled_wavelengths(wavelengths, config.oversampling);
  // the blur of the longest wavelength must stay inside the window
  const int blur = airy_kernel(*std::max_element(sub.begin(), sub.end()), system.config().sensor.pitch_um,
                               config.airy_diameter_at_520)
                       .radius;
  return fit_acquisition_geometry(system, grid, sub, config.margin + blur);
}

MappingTable render_mapping(const OpticalSystem& system, const SceneGrid& grid, const std::vector<double>& wavelengths,
                            const RenderConfig& config) {
  auto m = build_mapping(system, grid, oversampled_wavelengths(wavelengths, config.oversampling),
                         render_geometry(system, grid, wavelengths, config));
  m.sub_bands = config.oversampling;
  return m;
}

Acquisition render(const SpectralCube& cube, const OpticalSystem& system, const RenderConfig& config) {
  cube.validate();
  return render(cube, system, config, render_geometry(system, cube.grid(), cube.wavelengths, config));
}

Acquisition render(const SpectralCube& native, const OpticalSystem& system, const RenderConfig& config,
                   const AcquisitionGeometry& geometry) {
  native.validate();
  if (config.rays_per_pixel < 1) throw DomainError("render needs at least one ray per pixel");
  const double sensor_pitch = system.config().sensor.pitch_um;
  if (std::abs(native.pitch_um - sensor_pitch) > 1e-9 * sensor_pitch)
    throw DomainError("cube pitch " + std::to_string(native.pitch_um) + " um does not match the sensor pitch " +
                      std::to_string(sensor_pitch) + " um");
  if (native.width * native.pitch_um * 1e-3 > system.config().field_of_view_mm_x() + 1e-9 ||
      native.height * native.pitch_um * 1e-3 > system.config().field_of_view_mm_y() + 1e-9)
    throw DomainError("cube does not fit the field of view");

  const SpectralCube cube = oversample_cube(native, config.oversampling);
  const SceneGrid grid = cube.grid();
  const int N = config.rays_per_pixel;
  const int strata = static_cast<int>(std::ceil(std::sqrt(double(N))));
  const auto pattern = hexapolar_pattern(hexapolar_rings_for(N));
  const double na = system.config().numerical_aperture;
  const Vec3<double> target = system.objective_center();
  const double object_z = system.config().object_z_mm;

  Acquisition acq;
  acq.geometry = geometry;
  acq.system_name = system.name();
  acq.rays_per_pixel = N;
  acq.seed = config.seed;
  acq.wavelengths = cube.wavelengths;
  acq.dead_fraction.assign(cube.bands(), 0.0);
  const std::size_t pixels = std::size_t(geometry.height) * geometry.width;
  acq.data.assign(pixels, 0.0);
  std::vector<std::uint64_t> outside(cube.bands(), 0);

  // Bands are rendered in batches and summed in band order so the result
  // does not depend on the thread count.
  const std::size_t batch = std::max<std::size_t>(thread_count(), 1) * 2;
  for (std::size_t first = 0; first < std::size_t(cube.bands()); first += batch) {
    const std::size_t count = std::min(batch, cube.bands() - first);
    std::vector<std::vector<double>> images(count);
    parallel_for(count, [&](std::size_t b) {
      const int k = static_cast<int>(first + b);
      const double wl = cube.wavelengths[k];
      const auto n = system.indices(wl);
      std::vector<double> img(pixels, 0.0);
      std::vector<int> cells(strata * strata);
      std::vector<std::size_t> dirs(pattern.size());
      std::uint64_t traced = 0, dead = 0, out = 0;
      for (int row = 0; row < cube.height; ++row)
        for (int col = 0; col < cube.width; ++col) {
          const double L = cube.at(row, col, k);
          if (L == 0.0) continue;
          std::mt19937_64 rng(stream_seed(config.seed, k, std::uint64_t(row) * cube.width + col));
          std::iota(cells.begin(), cells.end(), 0);
          std::iota(dirs.begin(), dirs.end(), std::size_t{0});
          for (int i = 0; i < N; ++i) {
            std::swap(cells[i], cells[i + rng() % (cells.size() - i)]);
            std::swap(dirs[i], dirs[i + rng() % (dirs.size() - i)]);
          }
          const double rot = 2.0 * kPi * uniform01(rng);
          const double c = std::cos(rot), s = std::sin(rot);
          const double share = L / N;
          for (int i = 0; i < N; ++i) {
            const double jx = (cells[i] % strata + uniform01(rng)) / strata - 0.5;
            const double jy = (cells[i] / strata + uniform01(rng)) / strata - 0.5;
            const Vec2 p = grid.point(row + jy, col + jx);
            const Vec3<double> origin(p.x, p.y, object_z);
            const Vec2 d = pattern[dirs[i]];
            const Vec2 disk{c * d.x - s * d.y, s * d.x + c * d.y};
            const Ray<double> ray{origin, cone_direction(frame_around(normalized(target - origin)), disk, na), wl, true};
            ++traced;
            const auto hit = system.trace(ray, n);
            if (!hit) {
              ++dead;
              continue;
            }
            const Vec2 px = geometry.to_pixels(*hit);
            const long x = std::lround(px.x), y = std::lround(px.y);
            if (x < 0 || y < 0 || x >= geometry.width || y >= geometry.height) {
              ++out;
              continue;
            }
            img[std::size_t(y) * geometry.width + x] += share;
          }
        }
      acq.dead_fraction[k] = traced ? double(dead) / traced : 0.0;
      outside[k] = out;
      const auto kernel = airy_kernel(wl, sensor_pitch, config.airy_diameter_at_520);
      images[b] = convolve(img, geometry.height, geometry.width, kernel);
    });
    for (const auto& img : images)
      for (std::size_t i = 0; i < pixels; ++i) acq.data[i] += img[i];
  }

  for (int k = 0; k < cube.bands(); ++k) {
    if (acq.dead_fraction[k] > 0.5)
      acq.warnings.push_back("band " + std::to_string(cube.wavelengths[k]) + " nm: " +
                             std::to_string(100.0 * acq.dead_fraction[k]) + "% of rays died");
    if (outside[k] > 0)
      acq.warnings.push_back("band " + std::to_string(cube.wavelengths[k]) + " nm: " + std::to_string(outside[k]) +
                             " rays fell outside the acquisition window");
  }
  return acq;
}

}  // namespace cassi
