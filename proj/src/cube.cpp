#include "cassi/cube.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

namespace cassi {

SpectralCube::SpectralCube(int h, int w, std::vector<double> wl, double pitch)
    : height(h), width(w), wavelengths(std::move(wl)), pitch_um(pitch) {
  if (h <= 0 || w <= 0) throw DomainError("cube dimensions must be positive");
  data.assign(static_cast<std::size_t>(h) * w * wavelengths.size(), 0.0);
}

double SpectralCube::band_sum(int band) const {
  double s = 0.0;
  const std::size_t n = static_cast<std::size_t>(height) * width;
  for (std::size_t i = 0; i < n; ++i) s += data[band * n + i];
  return s;
}

double SpectralCube::total() const {
  double s = 0.0;
  for (double v : data) s += v;
  return s;
}

void SpectralCube::validate() const {
  if (height <= 0 || width <= 0 || wavelengths.empty()) throw DomainError("cube has an empty shape");
  if (data.size() != static_cast<std::size_t>(height) * width * wavelengths.size())
    throw DomainError("cube data size does not match its shape");
  if (!(pitch_um > 0.0)) throw DomainError("cube pitch must be positive");
  for (std::size_t k = 1; k < wavelengths.size(); ++k)
    if (!(wavelengths[k] > wavelengths[k - 1])) throw DomainError("cube wavelengths must be strictly ascending");
  for (double v : data)
    if (!std::isfinite(v) || v < 0.0) throw DomainError("cube radiance must be finite and non-negative");
}

Mask Mask::filled(int h, int w, bool open) {
  if (h <= 0 || w <= 0) throw DomainError("mask dimensions must be positive");
  Mask m;
  m.height = h, m.width = w;
  m.open_ratio = open ? 1.0 : 0.0;
  m.data.assign(static_cast<std::size_t>(h) * w, open ? 1 : 0);
  return m;
}

Mask Mask::random(int h, int w, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw DomainError("mask open ratio must lie in [0, 1]");
  Mask m = filled(h, w, false);
  m.seed = seed;
  m.open_ratio = ratio;
  std::mt19937_64 rng(seed);
  for (auto& v : m.data) v = (rng() >> 11) * 0x1.0p-53 < ratio ? 1 : 0;
  return m;
}

Mask Mask::slit(int h, int w, int column) {
  if (column < 0 || column >= w) throw DomainError("slit column outside the mask");
  Mask m = filled(h, w, false);
  for (int r = 0; r < h; ++r) m.data[static_cast<std::size_t>(r) * w + column] = 1;
  m.open_ratio = 1.0 / w;
  return m;
}

double Mask::open_fraction() const {
  std::size_t n = 0;
  for (auto v : data) n += v != 0;
  return data.empty() ? 0.0 : double(n) / data.size();
}

double Acquisition::total() const {
  double s = 0.0;
  for (double v : data) s += v;
  return s;
}

SpectralCube code_scene(const SpectralCube& cube, const Mask& mask) {
  if (mask.height != cube.height || mask.width != cube.width)
    throw DomainError("mask shape " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                      " does not match cube " + std::to_string(cube.height) + "x" + std::to_string(cube.width));
  SpectralCube out = cube;
  const std::size_t n = mask.data.size();
  for (int k = 0; k < cube.bands(); ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (!mask.data[i]) out.data[k * n + i] = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// container

namespace {

constexpr char kMagic[8] = {'C', 'A', 'S', 'S', 'I', 'H', 'S', 'C'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), sizeof(T));
  } else {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

template <class T>
T get(std::istream& is, const std::string& path) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw ConfigError(path + ": truncated container");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

nlohmann::json parse_meta(const Container& c, const std::string& path) {
  try {
    return nlohmann::json::parse(c.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": bad container metadata: " + e.what());
  }
}

nlohmann::json geometry_json(const AcquisitionGeometry& g) {
  return {{"width", g.width}, {"height", g.height}, {"origin_u_mm", g.origin_u_mm},
          {"origin_v_mm", g.origin_v_mm}, {"pitch_mm", g.pitch_mm}};
}

AcquisitionGeometry geometry_from(const nlohmann::json& j, const std::string& path) {
  try {
    AcquisitionGeometry g;
    g.width = j.at("width"), g.height = j.at("height");
    g.origin_u_mm = j.at("origin_u_mm"), g.origin_v_mm = j.at("origin_v_mm"), g.pitch_mm = j.at("pitch_mm");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": bad acquisition geometry: " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

}  // namespace

void write_container(const std::string& path, const Container& c) {
  const std::size_t expected = static_cast<std::size_t>(c.height) * c.width * c.channels * c.wavelengths.size();
  if (c.data.size() != expected) throw DomainError("container data size does not match its header");
  auto os = open_out(path);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, c.height);
  put<std::uint32_t>(os, c.width);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.wavelengths.size()));
  put<std::uint32_t>(os, c.channels);
  put<double>(os, c.pitch_um);
  for (double w : c.wavelengths) put<double>(os, w);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.metadata.size()));
  os.write(c.metadata.data(), c.metadata.size());
  for (float v : c.data) put<float>(os, v);
  if (!os) throw std::runtime_error("failed writing " + path);
}

Container read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path + ": cannot open");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError(path + ": not a cube container");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion) throw ConfigError(path + ": unsupported container version " + std::to_string(version));
  Container c;
  const auto h = get<std::uint32_t>(is, path), w = get<std::uint32_t>(is, path);
  const auto bands = get<std::uint32_t>(is, path), channels = get<std::uint32_t>(is, path);
  constexpr std::uint32_t kLimit = 1u << 16;
  if (h == 0 || w == 0 || bands == 0 || channels == 0 || h > kLimit || w > kLimit || bands > kLimit || channels > 16)
    throw ConfigError(path + ": implausible container shape");
  c.height = h, c.width = w, c.channels = channels;
  c.pitch_um = get<double>(is, path);
  for (std::uint32_t k = 0; k < bands; ++k) c.wavelengths.push_back(get<double>(is, path));
  const auto meta_len = get<std::uint32_t>(is, path);
  if (meta_len > (1u << 24)) throw ConfigError(path + ": implausible metadata length");
  c.metadata.resize(meta_len);
  if (!is.read(c.metadata.data(), meta_len)) throw ConfigError(path + ": truncated container");
  const std::size_t n = std::size_t(h) * w * bands * channels;
  c.data.resize(n);
  for (auto& v : c.data) v = get<float>(is, path);
  if (is.peek() != std::char_traits<char>::eof()) throw ConfigError(path + ": trailing bytes after container data");
  return c;
}

void save_cube(const std::string& path, const SpectralCube& cube) {
  cube.validate();
  Container c;
  c.height = cube.height, c.width = cube.width, c.pitch_um = cube.pitch_um;
  c.wavelengths = cube.wavelengths;
  c.metadata = nlohmann::json{{"kind", "cube"}}.dump();
  c.data.assign(cube.data.begin(), cube.data.end());
  write_container(path, c);
}

SpectralCube load_cube(const std::string& path) {
  const Container c = read_container(path);
  if (c.channels != 1) throw ConfigError(path + ": cube containers hold one channel");
  SpectralCube cube(c.height, c.width, c.wavelengths, c.pitch_um);
  cube.data.assign(c.data.begin(), c.data.end());
  try {
    cube.validate();
  } catch (const DomainError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return cube;
}

void save_acquisition(const std::string& path, const Acquisition& acq) {
  Container c;
  c.height = acq.height(), c.width = acq.width(), c.pitch_um = acq.geometry.pitch_mm * 1e3;
  // a single band; its wavelength entry is the center of the rendered range
  c.wavelengths = {acq.wavelengths.empty() ? 0.0 : 0.5 * (acq.wavelengths.front() + acq.wavelengths.back())};
  c.metadata = nlohmann::json{{"kind", "acquisition"},
                              {"system", acq.system_name},
                              {"rays_per_pixel", acq.rays_per_pixel},
                              {"seed", acq.seed},
                              {"geometry", geometry_json(acq.geometry)},
                              {"warnings", acq.warnings}}
                   .dump();
  c.data.assign(acq.data.begin(), acq.data.end());
  write_container(path, c);
}

Acquisition load_acquisition(const std::string& path) {
  const Container c = read_container(path);
  if (c.channels != 1 || c.wavelengths.size() != 1) throw ConfigError(path + ": not an acquisition container");
  const auto meta = parse_meta(c, path);
  if (meta.value("kind", "") != "acquisition") throw ConfigError(path + ": not an acquisition container");
  Acquisition a;
  a.geometry = geometry_from(meta.at("geometry"), path);
  if (a.geometry.width != c.width || a.geometry.height != c.height)
    throw ConfigError(path + ": acquisition geometry disagrees with the data shape");
  a.system_name = meta.value("system", "");
  a.rays_per_pixel = meta.value("rays_per_pixel", 0);
  a.seed = meta.value("seed", std::uint64_t{0});
  a.warnings = meta.value("warnings", std::vector<std::string>{});
  a.data.assign(c.data.begin(), c.data.end());
  return a;
}

void save_mapping(const std::string& path, const MappingTable& m) {
  Container c;
  c.height = m.height(), c.width = m.width(), c.channels = 2, c.pitch_um = m.scene_pitch_mm * 1e3;
  c.wavelengths = m.wavelengths();
  c.metadata = nlohmann::json{{"kind", "mapping"},
                              {"system", m.system_name},
                              {"sub_bands", m.sub_bands},
                              {"geometry", geometry_json(m.geometry())}}
                   .dump();
  const std::size_t plane = std::size_t(m.height()) * m.width();
  c.data.resize(plane * 2 * m.bands());
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (int k = 0; k < m.bands(); ++k)
    for (int r = 0; r < m.height(); ++r)
      for (int col = 0; col < m.width(); ++col) {
        const std::size_t i = std::size_t(r) * m.width() + col;
        const bool ok = m.valid(r, col, k);
        const Vec2 v = m.at(r, col, k);
        c.data[(2 * k) * plane + i] = ok ? float(v.x) : nan;
        c.data[(2 * k + 1) * plane + i] = ok ? float(v.y) : nan;
      }
  write_container(path, c);
}

MappingTable load_mapping(const std::string& path) {
  const Container c = read_container(path);
  if (c.channels != 2) throw ConfigError(path + ": mapping containers hold two channels");
  const auto meta = parse_meta(c, path);
  if (meta.value("kind", "") != "mapping") throw ConfigError(path + ": not a mapping container");
  MappingTable m(c.height, c.width, c.wavelengths, geometry_from(meta.at("geometry"), path));
  m.system_name = meta.value("system", "");
  m.scene_pitch_mm = c.pitch_um * 1e-3;
  m.sub_bands = meta.value("sub_bands", 1);
  if (m.sub_bands < 1 || m.bands() % m.sub_bands != 0) throw ConfigError(path + ": sub_bands does not divide the band count");
  const std::size_t plane = std::size_t(c.height) * c.width;
  for (int k = 0; k < m.bands(); ++k)
    for (int r = 0; r < c.height; ++r)
      for (int col = 0; col < c.width; ++col) {
        const std::size_t i = std::size_t(r) * c.width + col;
        const float x = c.data[(2 * k) * plane + i], y = c.data[(2 * k + 1) * plane + i];
        if (std::isfinite(x) && std::isfinite(y)) m.set(r, col, k, {x, y});
      }
  return m;
}

// ---------------------------------------------------------------------------
// PGM

void save_pgm(const std::string& path, const std::vector<double>& image, int height, int width) {
  if (image.size() != std::size_t(height) * width) throw DomainError("pgm image size does not match its shape");
  double peak = 0.0;
  for (double v : image) peak = std::max(peak, v);
  auto os = open_out(path);
  os << "P5\n" << width << " " << height << "\n255\n";
  for (double v : image) {
    const double s = peak > 0.0 ? std::clamp(v / peak, 0.0, 1.0) : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(s * 255))));
  }
}

void save_mask_pgm(const std::string& path, const Mask& mask) {
  auto os = open_out(path);
  os << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (auto v : mask.data) os.put(static_cast<char>(v ? 255 : 0));
}

Mask load_mask_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(path + ": cannot open");
  // header tokens, skipping comments
  auto token = [&]() {
    std::string t;
    while (is >> t) {
      if (t[0] != '#') return t;
      std::string rest;
      std::getline(is, rest);
    }
    throw ConfigError(path + ": truncated PGM header");
  };
  if (token() != "P5") throw ConfigError(path + ": only binary PGM (P5) masks are supported");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token()), h = std::stoi(token()), maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw ConfigError(path + ": bad PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw ConfigError(path + ": unsupported PGM header");
  is.get();
  Mask m = Mask::filled(h, w, false);
  std::vector<char> buf(m.data.size());
  if (!is.read(buf.data(), buf.size())) throw ConfigError(path + ": truncated PGM data");
  for (std::size_t i = 0; i < buf.size(); ++i) m.data[i] = buf[i] != 0;
  m.open_ratio = m.open_fraction();
  return m;
}

}  // namespace cassi
