#include "cassi/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cassi/parallel.hpp"

namespace cassi {

ForwardOperator::ForwardOperator(MappingTable mapping, Mask mask) : mapping_(std::move(mapping)), mask_(std::move(mask)) {
  if (mask_.height != mapping_.height() || mask_.width != mapping_.width())
    throw GeometryMismatch("mask " + std::to_string(mask_.height) + "x" + std::to_string(mask_.width) +
                           " does not match the mapping grid " + std::to_string(mapping_.height()) + "x" +
                           std::to_string(mapping_.width()));
  const int n = mapping_.sub_bands;
  if (n < 1 || mapping_.bands() % n != 0) throw DomainError("mapping band count is not a multiple of sub_bands");
  const auto& g = mapping_.geometry();
  per_voxel_ = 4 * n;
  tap_index_.assign(cube_size() * per_voxel_, -1);
  tap_weight_.assign(cube_size() * per_voxel_, 0.0);
  const std::size_t plane = std::size_t(height()) * width();
  for (int k = 0; k < bands(); ++k)
    for (int r = 0; r < height(); ++r)
      for (int c = 0; c < width(); ++c) {
        const std::size_t voxel = k * plane + std::size_t(r) * width() + c;
        for (int j = 0; j < n; ++j) {
          const int e = k * n + j;
          if (!mapping_.valid(r, c, e)) continue;
          const Vec2 p = mapping_.at(r, c, e);
          const double x0 = std::floor(p.x), y0 = std::floor(p.y);
          const double fx = p.x - x0, fy = p.y - y0;
          const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
          for (int q = 0; q < 4; ++q) {
            const auto x = static_cast<std::int64_t>(x0) + (q & 1), y = static_cast<std::int64_t>(y0) + (q >> 1);
            if (x < 0 || y < 0 || x >= g.width || y >= g.height || w[q] == 0.0) continue;
            const std::size_t t = voxel * per_voxel_ + 4 * j + q;
            tap_index_[t] = y * g.width + x;
            tap_weight_[t] = w[q] / n;
          }
        }
      }
}

std::vector<double> ForwardOperator::apply(const std::vector<double>& cube) const {
  if (cube.size() != cube_size()) throw GeometryMismatch("forward operator: cube size does not match");
  std::vector<double> out(acquisition_size(), 0.0);
  const std::size_t plane = std::size_t(height()) * width();
  for (std::size_t i = 0; i < cube.size(); ++i) {
    if (!mask_.data[i % plane]) continue;
    const double v = cube[i];
    if (v == 0.0) continue;
    for (std::size_t t = i * per_voxel_; t < (i + 1) * per_voxel_; ++t)
      if (tap_index_[t] >= 0) out[tap_index_[t]] += tap_weight_[t] * v;
  }
  return out;
}

std::vector<double> ForwardOperator::read(const std::vector<double>& acq) const {
  if (acq.size() != acquisition_size()) throw GeometryMismatch("forward operator: acquisition size does not match");
  std::vector<double> out(cube_size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t t = i * per_voxel_; t < (i + 1) * per_voxel_; ++t)
      if (tap_index_[t] >= 0) s += tap_weight_[t] * acq[tap_index_[t]];
    out[i] = s;
  }
  return out;
}

std::vector<double> ForwardOperator::adjoint(const std::vector<double>& acq) const {
  auto out = read(acq);
  const std::size_t plane = std::size_t(height()) * width();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask_.data[i % plane]) out[i] = 0.0;
  return out;
}

SpectralCube ForwardOperator::empty_cube() const {
  return SpectralCube(height(), width(), mapping_.native_wavelengths(), mapping_.scene_pitch_mm * 1e3);
}

Acquisition ForwardOperator::forward(const SpectralCube& cube) const {
  if (cube.height != height() || cube.width != width() || cube.bands() != bands())
    throw GeometryMismatch("forward operator: cube shape does not match the mapping");
  Acquisition a;
  a.geometry = geometry();
  a.system_name = mapping_.system_name;
  a.wavelengths = mapping_.wavelengths();
  a.seed = 0;
  a.data = apply(cube.data);
  return a;
}

double ForwardOperator::norm_squared(int iterations) const {
  std::vector<double> x(cube_size());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (auto& v : x) v = u(rng);
  double lambda = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const double n = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    if (n == 0.0) return 0.0;
    for (auto& v : x) v /= n;
    x = adjoint(apply(x));
    lambda = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
  }
  return lambda;
}

SpectralCube init_cube(const Acquisition& acq, const MappingTable& mapping, std::size_t* missing) {
  if (!(acq.geometry == mapping.geometry()))
    throw GeometryMismatch("acquisition window (" + std::to_string(acq.height()) + "x" + std::to_string(acq.width()) +
                           ") does not match the mapping window (" + std::to_string(mapping.geometry().height) + "x" +
                           std::to_string(mapping.geometry().width) + ")");
  const ForwardOperator op(mapping, Mask::filled(mapping.height(), mapping.width(), true));
  SpectralCube out = op.empty_cube();
  out.data = op.read(acq.data);
  if (missing) *missing = mapping.missing();
  return out;
}

// ---------------------------------------------------------------------------
// TV solver

ReconstructionDiverged::ReconstructionDiverged(int it)
    : DomainError("reconstruction produced a non-finite iterate at iteration " + std::to_string(it)), iteration(it) {}

double tv_value(const SpectralCube& x, double sw, double eps, std::vector<double>* grad, double scale) {
  const int H = x.height, W = x.width, K = x.bands();
  double total = 0.0;
  for (int k = 0; k < K; ++k)
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        const double v = x.at(r, c, k);
        const double dx = c + 1 < W ? x.at(r, c + 1, k) - v : 0.0;
        const double dy = r + 1 < H ? x.at(r + 1, c, k) - v : 0.0;
        const double dl = k + 1 < K ? sw * (x.at(r, c, k + 1) - v) : 0.0;
        const double t = std::sqrt(dx * dx + dy * dy + dl * dl + eps * eps);
        total += t - eps;
        if (!grad) continue;
        auto& g = *grad;
        const double s = scale / t;
        g[x.index(r, c, k)] -= s * (dx + dy + sw * dl);
        if (c + 1 < W) g[x.index(r, c + 1, k)] += s * dx;
        if (r + 1 < H) g[x.index(r + 1, c, k)] += s * dy;
        if (k + 1 < K) g[x.index(r, c, k + 1)] += s * sw * dl;
      }
  return total;
}

TvResult reconstruct_tv(const Acquisition& acq, const ForwardOperator& op, const TvConfig& cfg) {
  if (cfg.iterations < 0) throw DomainError("iterations must be non-negative");
  if (!(cfg.tv_weight >= 0.0) || !(cfg.smoothing > 0.0)) throw DomainError("bad TV parameters");
  TvResult res;
  SpectralCube x = init_cube(acq, op.mapping());
  const auto& A = acq.data;
  auto residual_of = [&](const std::vector<double>& phix) {
    double s = 0.0;
    for (std::size_t i = 0; i < phix.size(); ++i) s += (phix[i] - A[i]) * (phix[i] - A[i]);
    return std::sqrt(s);
  };

  if (cfg.iterations == 0) {
    res.cube = x;
    res.residual.push_back(residual_of(op.apply(x.data)));
    return res;
  }
  // The raw read sums every band on a pixel; rescale it to best fit A.
  std::vector<double> phix = op.apply(x.data);
  const double num = std::inner_product(phix.begin(), phix.end(), A.begin(), 0.0);
  const double den = std::inner_product(phix.begin(), phix.end(), phix.begin(), 0.0);
  const double alpha = den > 0.0 ? std::max(num / den, 0.0) : 0.0;
  for (auto& v : x.data) v *= alpha;
  for (auto& v : phix) v *= alpha;

  const double lip =
      2.0 * op.norm_squared() + cfg.tv_weight * (8.0 + 4.0 * cfg.spectral_weight * cfg.spectral_weight) / cfg.smoothing;
  const double step = 1.0 / lip;
  res.residual.push_back(residual_of(phix));
  res.cube = x;
  double best = res.residual.back();

  SpectralCube y = x, prev = x;
  std::vector<double> phiy = phix, phiprev = phix;
  double t = 1.0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    std::vector<double> diff(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) diff[i] = 2.0 * (phiy[i] - A[i]);
    std::vector<double> grad = op.adjoint(diff);
    if (cfg.tv_weight > 0.0) tv_value(y, cfg.spectral_weight, cfg.smoothing, &grad, cfg.tv_weight);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = std::max(0.0, y.data[i] - step * grad[i]);
    phix = op.apply(x.data);
    const double r = residual_of(phix);
    if (!std::isfinite(r)) throw ReconstructionDiverged(it);
    res.residual.push_back(r);
    if (r < best || !cfg.keep_best) best = r, res.best_iteration = it, res.cube = x;

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    t = t_next;
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] + beta * (x.data[i] - prev.data[i]);
    for (std::size_t i = 0; i < phix.size(); ++i) phiy[i] = phix[i] + beta * (phix[i] - phiprev[i]);
    prev.data = x.data;
    phiprev = phix;
  }
  return res;
}

// ---------------------------------------------------------------------------
// metrics

double psnr_from_mse(double mse) {
  if (!(mse > 0.0)) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

namespace {

void require_same_shape(const SpectralCube& a, const SpectralCube& b) {
  if (a.height != b.height || a.width != b.width || a.bands() != b.bands())
    throw GeometryMismatch("quality metrics need cubes of the same shape");
}

}  // namespace

double ssim(const SpectralCube& a, const SpectralCube& b) {
  require_same_shape(a, b);
  constexpr int R = 5;
  if (a.height < 2 * R + 1 || a.width < 2 * R + 1) throw DomainError("SSIM needs images of at least 11x11");
  double win[2 * R + 1][2 * R + 1], wsum = 0.0;
  for (int i = -R; i <= R; ++i)
    for (int j = -R; j <= R; ++j) wsum += win[i + R][j + R] = std::exp(-(i * i + j * j) / (2 * 1.5 * 1.5));
  for (auto& row : win)
    for (auto& w : row) w /= wsum;
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  std::vector<double> per_band(a.bands());
  parallel_for(a.bands(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    double acc = 0.0;
    int count = 0;
    for (int r = R; r + R < a.height; ++r)
      for (int c = R; c + R < a.width; ++c) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = -R; i <= R; ++i)
          for (int j = -R; j <= R; ++j) {
            const double w = win[i + R][j + R], va = a.at(r + i, c + j, k), vb = b.at(r + i, c + j, k);
            ma += w * va, mb += w * vb, saa += w * va * va, sbb += w * vb * vb, sab += w * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        acc += (2 * ma * mb + C1) * (2 * cov + C2) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        ++count;
      }
    per_band[k] = acc / count;
  });
  return std::accumulate(per_band.begin(), per_band.end(), 0.0) / a.bands();
}

QualityReport quality(const SpectralCube& truth, const SpectralCube& est) {
  require_same_shape(truth, est);
  QualityReport q;
  double se = 0.0;
  for (std::size_t i = 0; i < truth.data.size(); ++i) se += (truth.data[i] - est.data[i]) * (truth.data[i] - est.data[i]);
  const double mse = se / truth.data.size();
  q.rmse = std::sqrt(mse);
  q.psnr = psnr_from_mse(mse);
  q.ssim = ssim(truth, est);
  double angle = 0.0;
  std::size_t used = 0;
  for (int r = 0; r < truth.height; ++r)
    for (int c = 0; c < truth.width; ++c) {
      double ab = 0, aa = 0, bb = 0;
      for (int k = 0; k < truth.bands(); ++k) {
        const double x = truth.at(r, c, k), y = est.at(r, c, k);
        ab += x * y, aa += x * x, bb += y * y;
      }
      if (aa == 0.0 || bb == 0.0) {
        ++q.sam_excluded;
        continue;
      }
      angle += std::acos(std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0));
      ++used;
    }
  q.sam = used ? angle / used : 0.0;
  q.sam_normalized = q.sam / (kPi / 2);
  return q;
}

// ---------------------------------------------------------------------------
// synthetic scenes

namespace {

struct Spectrum {
  double base;
  std::vector<std::array<double, 3>> bumps;  // amplitude, center, width

  double operator()(double wl) const {
    double v = base;
    for (const auto& [a, c, w] : bumps) v += a * std::exp(-(wl - c) * (wl - c) / (2 * w * w));
    return std::clamp(v, 0.0, 1.0);
  }
};

Spectrum random_spectrum(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Spectrum s{0.05 + 0.25 * u(rng), {}};
  const int n = 1 + static_cast<int>(rng() % 2);
  for (int i = 0; i < n; ++i) s.bumps.push_back({0.3 + 0.5 * u(rng), 440.0 + 220.0 * u(rng), 25.0 + 50.0 * u(rng)});
  return s;
}

}  // namespace

SpectralCube synthetic_scene(SceneKind kind, int h, int w, const std::vector<double>& wl, std::uint64_t seed,
                             double pitch_um) {
  SpectralCube cube(h, w, wl, pitch_um);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto fill = [&](int r, int c, const Spectrum& s) {
    for (int k = 0; k < cube.bands(); ++k) cube.at(r, c, k) = s(wl[k]);
  };
  switch (kind) {
    case SceneKind::Blocks: {
      // 4 x 4 blocks with jittered edges
      std::vector<int> rows{0}, cols{0};
      for (int i = 1; i < 4; ++i) {
        rows.push_back(static_cast<int>(h * (i + 0.6 * (u(rng) - 0.5)) / 4));
        cols.push_back(static_cast<int>(w * (i + 0.6 * (u(rng) - 0.5)) / 4));
      }
      rows.push_back(h), cols.push_back(w);
      for (int bi = 0; bi < 4; ++bi)
        for (int bj = 0; bj < 4; ++bj) {
          const Spectrum s = random_spectrum(rng);
          for (int r = rows[bi]; r < rows[bi + 1]; ++r)
            for (int c = cols[bj]; c < cols[bj + 1]; ++c) fill(r, c, s);
        }
      break;
    }
    case SceneKind::Smooth: {
      // three endmembers mixed by smooth abundance fields
      Spectrum e[3] = {random_spectrum(rng), random_spectrum(rng), random_spectrum(rng)};
      double fx[3], fy[3], ph[3];
      for (int j = 0; j < 3; ++j) fx[j] = 1 + 2 * u(rng), fy[j] = 1 + 2 * u(rng), ph[j] = 2 * kPi * u(rng);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          double a[3], sum = 0.0;
          for (int j = 0; j < 3; ++j)
            sum += a[j] = 1.1 + std::sin(2 * kPi * (fx[j] * c / w + fy[j] * r / h) + ph[j]);
          for (int k = 0; k < cube.bands(); ++k) {
            double v = 0.0;
            for (int j = 0; j < 3; ++j) v += a[j] / sum * e[j](wl[k]);
            cube.at(r, c, k) = v;
          }
        }
      break;
    }
    case SceneKind::Disks: {
      const Spectrum bg = random_spectrum(rng);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) fill(r, c, bg);
      for (int d = 0; d < 6; ++d) {
        const Spectrum s = random_spectrum(rng);
        const double cr = h * u(rng), cc = w * u(rng), rad = std::min(h, w) * (0.08 + 0.14 * u(rng));
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < w; ++c)
            if (std::hypot(r - cr, c - cc) <= rad) fill(r, c, s);
      }
      break;
    }
  }
  return cube;
}

}  // namespace cassi
