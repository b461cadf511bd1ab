// Python module _cassi. Cubes cross the boundary as (bands, rows, cols) float64
// arrays, acquisitions and masks as (rows, cols) arrays.
#include <numeric>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cassi/designer.hpp"
#include "cassi/parallel.hpp"
#include "cassi/reconstruction.hpp"
#include "cassi/validation.hpp"

namespace py = pybind11;
using namespace cassi;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  Array a(shape);
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

Array cube_array(const SpectralCube& c) { return to_array(c.data, {c.bands(), c.height, c.width}); }

SpectralCube cube_from(Array a, std::vector<double> wavelengths, double pitch_um) {
  if (a.ndim() != 3) throw DomainError("cube array must have shape (bands, rows, cols)");
  if (a.shape(0) != static_cast<py::ssize_t>(wavelengths.size()))
    throw DomainError("cube has " + std::to_string(a.shape(0)) + " bands but " + std::to_string(wavelengths.size()) +
                      " wavelengths");
  SpectralCube c(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)), std::move(wavelengths), pitch_um);
  std::copy(a.data(), a.data() + a.size(), c.data.begin());
  return c;
}

Mask mask_from(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 2) throw DomainError("mask array must be 2-D");
  Mask m = Mask::filled(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), false);
  for (py::ssize_t i = 0; i < a.size(); ++i) m.data[i] = a.data()[i] != 0;
  m.open_ratio = m.open_fraction();
  return m;
}

OpticalSystem system_from(const py::object& o) {
  if (py::isinstance<OpticalSystem>(o)) return o.cast<OpticalSystem>();
  if (py::isinstance<SystemConfig>(o)) return OpticalSystem(o.cast<SystemConfig>());
  const auto s = o.cast<std::string>();
  if (s.ends_with(".json")) return OpticalSystem(load_system_config(s));
  return OpticalSystem(build_reference_system(s));
}

py::dict params_dict(const PrismDesignParams& p) {
  py::dict d;
  d["alpha_c_deg"] = p.alpha_c_deg, d["a1_deg"] = p.a1_deg, d["a2_deg"] = p.a2_deg;
  d["n1"] = p.n1, d["v1"] = p.v1, d["n2"] = p.n2, d["v2"] = p.v2;
  d["glass1"] = p.glass1, d["glass2"] = p.glass2;
  return d;
}

}  // namespace

PYBIND11_MODULE(_cassi, m) {
  m.doc() = "Dispersive CASSI simulation core";
  m.attr("__version__") = CASSI_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<GeometryMismatch>(m, "GeometryMismatch", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("set_threads", &set_thread_count, py::arg("n"), "Worker threads; 0 uses the hardware concurrency.");
  m.def("refractive_index",
        [](const std::string& glass, double wl) { return refractive_index(GlassCatalog::schott().at(glass), wl); },
        py::arg("glass"), py::arg("wavelength_nm"));
  m.def("glass_names", [] {
    std::vector<std::string> names;
    for (const auto& g : GlassCatalog::schott().glasses()) names.push_back(g.name);
    return names;
  });

  // optics
  py::class_<SystemConfig>(m, "SystemConfig")
      .def_readonly("name", &SystemConfig::name)
      .def_readonly("band_count", &SystemConfig::band_count)
      .def("band_wavelengths", &SystemConfig::band_wavelengths)
      .def("to_json", &dump_system_config)
      .def("save", [](const SystemConfig& c, const std::string& path) { save_system_config(c, path); });
  m.def("reference_config", [](const std::string& name) { return build_reference_system(name); }, py::arg("name"));
  m.def("load_config", [](const std::string& path) { return load_system_config(path); }, py::arg("path"));
  m.def("parse_config", [](const std::string& text) { return parse_system_config(text); }, py::arg("text"));

  py::class_<OpticalSystem>(m, "OpticalSystem")
      .def(py::init<SystemConfig>())
      .def(py::init([](const std::string& name) { return system_from(py::str(name)); }))
      .def_property_readonly("name", &OpticalSystem::name)
      .def_property_readonly("config", &OpticalSystem::config)
      .def_property_readonly("pitch_mm", &OpticalSystem::pitch_mm)
      .def("trace_chief",
           [](const OpticalSystem& s, double x_mm, double y_mm, double wl) -> py::object {
             const auto p = s.trace(s.chief_ray({x_mm, y_mm}, wl));
             if (!p) return py::none();
             return py::make_tuple(p->x, p->y);
           },
           py::arg("x_mm"), py::arg("y_mm"), py::arg("wavelength_nm"), "Detector (u, v) in mm, or None.");

  m.def("spectral_spread_um", [](const py::object& s) { return spectral_spread_um(system_from(s)); }, py::arg("system"));
  m.def(
      "distortion",
      [](const py::object& s, std::vector<double> wl, int grid) {
        const auto d = distortion_map(system_from(s), wl, grid);
        py::dict r;
        r["max_um"] = d.max_um, r["mean_um"] = d.mean_um, r["missing"] = d.missing;
        r["magnification"] = py::make_tuple(d.magnification.x, d.magnification.y);
        r["csv"] = distortion_csv(d);
        return r;
      },
      py::arg("system"), py::arg("wavelengths") = std::vector<double>{450.0, 520.0, 650.0}, py::arg("grid") = 21);
  m.def(
      "spot",
      [](const py::object& s, double x, double y, double wl, int rays) {
        const auto p = psf(system_from(s), {x, y}, wl, rays);
        py::dict r;
        r["centroid_um"] = py::make_tuple(p.centroid_um.x, p.centroid_um.y);
        r["rms_radius_um"] = p.rms_radius_um;
        std::vector<double> pts;
        for (auto q : p.points_um) pts.push_back(q.x), pts.push_back(q.y);
        r["points_um"] = to_array(pts, {static_cast<py::ssize_t>(p.points_um.size()), 2});
        return r;
      },
      py::arg("system"), py::arg("x_mm"), py::arg("y_mm"), py::arg("wavelength_nm"), py::arg("rays") = 91);

  // design
  m.def("reported_design", [] { return params_dict(design_params(reported_amici_design())); });
  m.def(
      "optimize_prism",
      [](std::optional<double> alpha_c, std::optional<double> a1, std::optional<double> a2, int iterations, int polish,
         bool image_plane) {
        auto p = design_params(reported_amici_design());
        p.alpha_c_deg = alpha_c.value_or(p.alpha_c_deg);
        p.a1_deg = a1.value_or(p.a1_deg);
        p.a2_deg = a2.value_or(p.a2_deg);
        AdamConfig adam;
        adam.iterations = iterations, adam.polish_iterations = polish;
        const auto run = optimize_prism(p, image_plane ? image_plane_weights() : LossWeights{}, adam);
        py::dict r = params_dict(run.final);
        r["dispersion_deg"] = run.final_metrics.dispersion_deg;
        r["deviation_mrad"] = run.final_metrics.deviation_mrad;
        r["max_distortion_um"] = run.final_metrics.max_distortion_um;
        r["mean_distortion_um"] = run.final_metrics.mean_distortion_um;
        r["loss_trace"] = run.loss_trace;
        r["config"] = build_reference_system(ReferenceSystem::AP, to_amici(run.final));
        return r;
      },
      py::arg("alpha_c_deg") = py::none(), py::arg("a1_deg") = py::none(), py::arg("a2_deg") = py::none(),
      py::arg("iterations") = 2000,
      py::arg("polish_iterations") = 300, py::arg("image_plane_weights") = true,
      "Optimize from the reported design; angles left as None keep its values.");

  // scenes and rendering
  py::enum_<SceneKind>(m, "SceneKind")
      .value("blocks", SceneKind::Blocks)
      .value("smooth", SceneKind::Smooth)
      .value("disks", SceneKind::Disks);
  m.def(
      "synthetic_scene",
      [](SceneKind k, int h, int w, std::vector<double> wl, std::uint64_t seed) {
        return cube_array(synthetic_scene(k, h, w, wl, seed));
      },
      py::arg("kind"), py::arg("height"), py::arg("width"), py::arg("wavelengths"), py::arg("seed") = 0);
  m.def(
      "random_mask",
      [](int h, int w, double ratio, std::uint64_t seed) {
        const auto mk = Mask::random(h, w, ratio, seed);
        py::array_t<std::uint8_t> a({h, w});
        std::copy(mk.data.begin(), mk.data.end(), a.mutable_data());
        return a;
      },
      py::arg("height"), py::arg("width"), py::arg("open_ratio") = 0.5, py::arg("seed") = 0);

  py::class_<RenderConfig>(m, "RenderConfig")
      .def(py::init<>())
      .def_readwrite("oversampling", &RenderConfig::oversampling)
      .def_readwrite("rays_per_pixel", &RenderConfig::rays_per_pixel)
      .def_readwrite("airy_diameter_at_520", &RenderConfig::airy_diameter_at_520)
      .def_readwrite("seed", &RenderConfig::seed)
      .def_readwrite("margin", &RenderConfig::margin);

  py::class_<AcquisitionGeometry>(m, "AcquisitionGeometry")
      .def_readonly("width", &AcquisitionGeometry::width)
      .def_readonly("height", &AcquisitionGeometry::height)
      .def_readonly("origin_u_mm", &AcquisitionGeometry::origin_u_mm)
      .def_readonly("origin_v_mm", &AcquisitionGeometry::origin_v_mm)
      .def("__eq__", [](const AcquisitionGeometry& a, const AcquisitionGeometry& b) { return a == b; });

  py::class_<Acquisition>(m, "Acquisition")
      .def_readonly("geometry", &Acquisition::geometry)
      .def_readonly("warnings", &Acquisition::warnings)
      .def_readonly("dead_fraction", &Acquisition::dead_fraction)
      .def_property_readonly("image", [](const Acquisition& a) { return to_array(a.data, {a.height(), a.width()}); })
      .def("total", &Acquisition::total)
      .def("save", [](const Acquisition& a, const std::string& p) { save_acquisition(p, a); });
  m.def("load_acquisition", &load_acquisition, py::arg("path"));

  m.def(
      "render",
      [](Array cube, std::vector<double> wl, Array mask, const py::object& sys, const RenderConfig& cfg) {
        const auto system = system_from(sys);
        const auto c = cube_from(cube, std::move(wl), system.config().sensor.pitch_um);
        const auto mk = mask_from(mask);
        py::gil_scoped_release release;
        return render(code_scene(c, mk), system, cfg);
      },
      py::arg("cube"), py::arg("wavelengths"), py::arg("mask"), py::arg("system"), py::arg("config") = RenderConfig{},
      "Code the (bands, rows, cols) cube with the mask and render it.");

  py::class_<MappingTable>(m, "MappingTable")
      .def_property_readonly("height", &MappingTable::height)
      .def_property_readonly("width", &MappingTable::width)
      .def_property_readonly("bands", &MappingTable::bands)
      .def_readonly("sub_bands", &MappingTable::sub_bands)
      .def_property_readonly("geometry", &MappingTable::geometry)
      .def("missing", &MappingTable::missing)
      .def("shift_only", [](const MappingTable& t) { return shift_only_mapping(t); })
      .def("reframed", &MappingTable::reframed)
      .def("entries",
           [](const MappingTable& t) {
             std::vector<double> v;
             for (int k = 0; k < t.bands(); ++k)
               for (int r = 0; r < t.height(); ++r)
                 for (int c = 0; c < t.width(); ++c) {
                   const auto p = t.at(r, c, k);
                   const bool ok = t.valid(r, c, k);
                   v.push_back(ok ? p.x : NAN), v.push_back(ok ? p.y : NAN);
                 }
             return to_array(v, {t.bands(), t.height(), t.width(), 2});
           },
           "(bands, rows, cols, 2) fractional pixel positions (x, y); NaN where missing.")
      .def("save", [](const MappingTable& t, const std::string& p) { save_mapping(p, t); });
  m.def("load_mapping", &load_mapping, py::arg("path"));
  m.def(
      "render_mapping",
      [](const py::object& sys, int h, int w, const RenderConfig& cfg) {
        const auto system = system_from(sys);
        return render_mapping(system, SceneGrid{h, w, system.pitch_mm()}, system.config().band_wavelengths(), cfg);
      },
      py::arg("system"), py::arg("height"), py::arg("width"), py::arg("config") = RenderConfig{});

  // reconstruction
  py::class_<ForwardOperator>(m, "ForwardOperator")
      .def(py::init([](MappingTable t, Array mask) { return ForwardOperator(std::move(t), mask_from(mask)); }))
      .def("apply",
           [](const ForwardOperator& op, Array x) {
             const std::vector<double> v(x.data(), x.data() + x.size());
             if (v.size() != op.cube_size()) throw DomainError("cube size does not match the operator");
             return to_array(op.apply(v), {op.geometry().height, op.geometry().width});
           })
      .def("adjoint",
           [](const ForwardOperator& op, Array y) {
             const std::vector<double> v(y.data(), y.data() + y.size());
             if (v.size() != op.acquisition_size()) throw DomainError("acquisition size does not match the operator");
             return to_array(op.adjoint(v), {op.bands(), op.height(), op.width()});
           })
      .def("norm_squared", &ForwardOperator::norm_squared, py::arg("iterations") = 30);

  m.def(
      "reconstruct",
      [](const Acquisition& acq, const ForwardOperator& op, int iterations, double tv_weight) {
        TvConfig cfg;
        cfg.iterations = iterations, cfg.tv_weight = tv_weight;
        TvResult r;
        {
          py::gil_scoped_release release;
          r = reconstruct_tv(acq, op, cfg);
        }
        return py::make_tuple(cube_array(r.cube), r.best_iteration, r.residual);
      },
      py::arg("acquisition"), py::arg("operator"), py::arg("iterations") = 200, py::arg("tv_weight") = 0.02,
      "Returns (cube, best_iteration, residual per iterate).");
  m.def(
      "quality",
      [](Array truth, Array estimate) {
        // the metrics never look at the wavelengths
        std::vector<double> asc(static_cast<std::size_t>(truth.ndim() == 3 ? truth.shape(0) : 0));
        std::iota(asc.begin(), asc.end(), 0.0);
        const auto q = quality(cube_from(truth, asc, 10.0), cube_from(estimate, asc, 10.0));
        py::dict d;
        d["rmse"] = q.rmse, d["psnr"] = q.psnr, d["ssim"] = q.ssim, d["sam"] = q.sam;
        d["sam_normalized"] = q.sam_normalized, d["sam_excluded"] = q.sam_excluded;
        return d;
      },
      py::arg("truth"), py::arg("estimate"));

  // validation
  m.def(
      "validate",
      [](const py::object& sys) {
        std::vector<std::tuple<std::string, bool, std::string>> out;
        for (const auto& c : validate_system(system_from(sys))) out.emplace_back(c.name, c.pass, c.detail);
        return out;
      },
      py::arg("system"), "(name, passed, detail) per check.");
  m.def(
      "slit_test",
      [](const py::object& sys, int size) {
        const auto rep = slit_spectrometer_test(system_from(sys), {}, size);
        std::vector<double> e;
        for (const auto& r : rep.regions) e.push_back(r.relative_rmse);
        return e;
      },
      py::arg("system") = "SP", py::arg("size") = 64, "Relative RMSE per region.");
}
