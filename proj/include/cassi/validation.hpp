// Self-checks shared by the command-line validator and the acceptance run.
#pragma once

#include <string>
#include <vector>

#include "cassi/renderer.hpp"

namespace cassi {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Traced deviation of a 60 deg N-BK7 prism at minimum deviation against
// 2 asin(n sin(A/2)) - A, at 450, 520 and 650 nm; tolerance 1e-9 rad.
CheckResult check_minimum_deviation();
// Impulse-render centroids against the mapping for random (pixel, band) probes; 0.5 px.
CheckResult check_mapping_consistency(const OpticalSystem& system, int probes = 20, std::uint64_t seed = 1);
// Total rendered flux against the cube total within 4 Monte-Carlo standard errors.
CheckResult check_flux_conservation(const OpticalSystem& system, std::uint64_t seed = 1);
// Fixed-seed renders are bit-identical.
CheckResult check_determinism(const OpticalSystem& system, std::uint64_t seed = 1);
// <Phi x, y> = <x, Phi^T y> within 1e-10 relative on random pairs.
CheckResult check_adjoint(const OpticalSystem& system, int pairs = 10, std::uint64_t seed = 1);

std::vector<CheckResult> validate_system(const OpticalSystem& system);

// Single-slit spectrometer test: a scene of three rectangular regions with
// constant spectra is coded by a one-column slit at the scene center and
// rendered. Each region's acquisition rows are averaged and compared with a
// reference built from the continuous spectra (upsampled to
// reference_samples wavelengths), each sample traced as a dense
// deterministic bundle and convolved with its Airy disk.
struct SlitRegion {
  int row_begin = 0, row_end = 0;  // scene rows
  std::vector<double> rendered, reference;  // averaged acquisition rows, per column
  double relative_rmse = 0.0;  // ||rendered - reference|| / ||reference||
};
struct SlitReport {
  int slit_column = 0;
  std::vector<SlitRegion> regions;
  double worst() const;
};
SlitReport slit_spectrometer_test(const OpticalSystem& system, const RenderConfig& config = {}, int size = 64,
                                  int reference_samples = 280);

}  // namespace cassi
