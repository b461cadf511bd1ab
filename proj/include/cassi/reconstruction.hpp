// Mapping-aware forward model, initialization, TV solver and quality metrics.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cassi/cube.hpp"

namespace cassi {

// Phi: masks the cube, then splats every (row, col, band) value onto the four
// acquisition pixels around f(row, col, band) with bilinear weights. With a
// sub-band mapping a native band is split evenly over its sub-band entries.
// Entries missing from the mapping and taps outside the window contribute
// nothing.
class ForwardOperator {
 public:
  ForwardOperator(MappingTable mapping, Mask mask);

  const MappingTable& mapping() const { return mapping_; }
  const Mask& mask() const { return mask_; }
  const AcquisitionGeometry& geometry() const { return mapping_.geometry(); }
  int height() const { return mapping_.height(); }
  int width() const { return mapping_.width(); }
  int bands() const { return mapping_.native_bands(); }
  std::size_t cube_size() const { return std::size_t(height()) * width() * bands(); }
  std::size_t acquisition_size() const { return std::size_t(geometry().height) * geometry().width; }

  // Raw vectors: cube band-major as in SpectralCube, acquisition row-major.
  std::vector<double> apply(const std::vector<double>& cube) const;
  std::vector<double> adjoint(const std::vector<double>& acquisition) const;
  // Bilinear read of the acquisition at every mapping entry, without the mask.
  std::vector<double> read(const std::vector<double>& acquisition) const;

  Acquisition forward(const SpectralCube& cube) const;
  SpectralCube empty_cube() const;

  // Largest eigenvalue of Phi^T Phi by power iteration.
  double norm_squared(int iterations = 30) const;

 private:
  MappingTable mapping_;
  Mask mask_;
  int per_voxel_ = 4;  // 4 taps per sub-band entry
  std::vector<std::int64_t> tap_index_;  // -1 for unused taps
  std::vector<double> tap_weight_;
};

// I = A o f: bilinear read of the acquisition at each mapping entry. Missing
// entries read 0 and are counted in *missing. GeometryMismatch when the
// acquisition window differs from the mapping's.
SpectralCube init_cube(const Acquisition& acq, const MappingTable& mapping, std::size_t* missing = nullptr);

struct TvConfig {
  int iterations = 200;
  double tv_weight = 0.02;
  double spectral_weight = 1.0;  // weight of the wavelength differences inside TV
  double smoothing = 1e-2;  // epsilon of sqrt(|grad|^2 + eps^2)
  bool keep_best = true;  // false returns the last iterate
};

struct TvResult {
  SpectralCube cube;
  int best_iteration = 0;  // 0 is the initialization
  std::vector<double> residual;  // ||Phi x - A|| per iterate, starting with the initialization
};

class ReconstructionDiverged : public DomainError {
 public:
  explicit ReconstructionDiverged(int iteration);
  int iteration;
};

// Accelerated projected gradient on ||Phi x - A||^2 + w TV(x) with x >= 0,
// started from the (rescaled) initialization; returns the iterate with the
// smallest data residual.
TvResult reconstruct_tv(const Acquisition& acq, const ForwardOperator& op, const TvConfig& config = {});

// Smoothed 3-D total variation and its gradient (added to grad).
double tv_value(const SpectralCube& x, double spectral_weight, double smoothing, std::vector<double>* grad = nullptr,
                double scale = 1.0);

inline constexpr double kPsnrCap = 100.0;

struct QualityReport {
  double rmse = 0.0;
  double psnr = 0.0;  // dB, peak 1, capped at kPsnrCap
  double ssim = 0.0;
  double sam = 0.0;  // radians
  double sam_normalized = 0.0;  // sam / (pi / 2)
  std::size_t sam_excluded = 0;  // pixels with a zero spectrum
};
QualityReport quality(const SpectralCube& truth, const SpectralCube& estimate);
double psnr_from_mse(double mse);
// Mean over bands of SSIM with an 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, L = 1, over windows lying inside the image.
double ssim(const SpectralCube& a, const SpectralCube& b);

// Desk-scale synthetic scenes with values in [0, 1].
enum class SceneKind { Blocks, Smooth, Disks };
SpectralCube synthetic_scene(SceneKind kind, int height, int width, const std::vector<double>& wavelengths,
                             std::uint64_t seed, double pitch_um = 10.0);

}  // namespace cassi
