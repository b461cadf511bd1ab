#include "cassi/glass.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "schott_catalog_data.hpp"

namespace cassi {

GlassModel GlassModel::relaxed(double n_d, double v_d, std::string name) {
  if (!(n_d > 1.0) || !(v_d > 0.0)) throw DomainError("relaxed glass needs n_d > 1 and V_d > 0");
  return {std::move(name), RelaxedGlass<double>{n_d, v_d}, n_d, v_d};
}

double refractive_index(const GlassModel& glass, double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw DomainError("refractive_index: wavelength must be positive");
  if (const auto* s = std::get_if<Sellmeier>(&glass.kind)) {
    const double l2 = (wavelength_nm * 1e-3) * (wavelength_nm * 1e-3);
    double n2 = 1.0;
    for (int i = 0; i < 3; ++i) n2 += s->b[i] * l2 / (l2 - s->c[i]);
    return std::sqrt(n2);
  }
  return std::get<RelaxedGlass<double>>(glass.kind).index(wavelength_nm);
}

GlassCatalog::GlassCatalog(std::vector<GlassModel> glasses) : glasses_(std::move(glasses)) {
  if (glasses_.empty()) return;
  nd_min_ = vd_min_ = std::numeric_limits<double>::infinity();
  nd_max_ = vd_max_ = -std::numeric_limits<double>::infinity();
  for (const auto& g : glasses_) {
    nd_min_ = std::min(nd_min_, g.n_d);
    nd_max_ = std::max(nd_max_, g.n_d);
    vd_min_ = std::min(vd_min_, g.v_d);
    vd_max_ = std::max(vd_max_, g.v_d);
  }
}

GlassCatalog GlassCatalog::parse(std::istream& in, std::string_view source) {
  std::vector<GlassModel> glasses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    GlassModel g;
    if (!(fields >> g.name)) continue;
    Sellmeier s;
    if (!(fields >> g.n_d >> g.v_d >> s.b[0] >> s.b[1] >> s.b[2] >> s.c[0] >> s.c[1] >> s.c[2])) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected 'name n_d V_d B1 B2 B3 C1 C2 C3'");
    }
    if (!(g.n_d > 1.0)) throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": n_d must be > 1");
    if (!(g.v_d > 0.0)) throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": V_d must be > 0");
    g.kind = s;
    glasses.push_back(std::move(g));
  }
  return GlassCatalog(std::move(glasses));
}

GlassCatalog GlassCatalog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open glass catalog '" + path + "'");
  return parse(in, path);
}

const GlassCatalog& GlassCatalog::schott() {
  static const GlassCatalog catalog = [] {
    std::istringstream in{std::string(detail::kSchottCatalog)};
    return parse(in, "schott.cat");
  }();
  return catalog;
}

const GlassModel* GlassCatalog::find(std::string_view name) const {
  const auto it = std::find_if(glasses_.begin(), glasses_.end(), [&](const GlassModel& g) { return g.name == name; });
  return it == glasses_.end() ? nullptr : &*it;
}

const GlassModel& GlassCatalog::at(std::string_view name) const {
  if (const auto* g = find(name)) return *g;
  throw ConfigError("unknown glass '" + std::string(name) + "'");
}

const GlassModel& GlassCatalog::nearest(double n_d, double v_d) const {
  if (glasses_.empty()) throw DomainError("nearest: empty glass catalog");
  const GlassModel* best = &glasses_.front();
  double best_d = distance2(n_d, v_d, *best);
  for (const auto& g : glasses_) {
    const double d = distance2(n_d, v_d, g);
    if (d < best_d) {
      best_d = d;
      best = &g;
    }
  }
  return *best;
}

}  // namespace cassi
