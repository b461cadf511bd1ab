// cassi: design, render, map, analyze, reconstruct and validate from the command line.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cassi/designer.hpp"
#include "cassi/parallel.hpp"
#include "cassi/reconstruction.hpp"
#include "cassi/renderer.hpp"
#include "cassi/validation.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cassi;

namespace {

constexpr const char* kOutputEnv = "CASSI_OUTPUT_DIR";

enum Exit { kOk = 0, kRuntime = 1, kConfig = 2, kGeometry = 3 };

struct Run {
  std::string command;
  fs::path out;
  std::uint64_t seed = 0;
  std::vector<std::string> argv;
  json inputs = json::object();
  json outputs = json::array();
  json timings = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  fs::path file(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
  // Times a step and records it in the manifest.
  template <class F>
  auto timed(const std::string& step, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    timings[step] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }
  void write_manifest() {
    timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m{{"command", command}, {"argv", argv},       {"seed", seed},         {"output_dir", out.string()},
           {"inputs", inputs},   {"outputs", outputs}, {"version", CASSI_VERSION}, {"threads", thread_count()},
           {"timings_s", timings}};
    std::ofstream(out / "run_manifest.json") << m.dump(2) << "\n";
  }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// A reference name (SP, AP, mSP, mAP) or a system config file.
SystemConfig system_arg(const std::string& arg) {
  if (fs::exists(arg) || arg.ends_with(".json")) return load_system_config(arg);
  return build_reference_system(arg);
}

SceneKind scene_kind(const std::string& s) {
  if (s == "blocks") return SceneKind::Blocks;
  if (s == "smooth") return SceneKind::Smooth;
  if (s == "disks") return SceneKind::Disks;
  throw ConfigError("unknown synthetic scene '" + s + "' (blocks, smooth, disks)");
}

std::string table(const std::vector<CheckResult>& checks) {
  std::ostringstream s;
  for (const auto& c : checks) s << (c.pass ? "PASS" : "FAIL") << "  " << c.name << ": " << c.detail << "\n";
  return s.str();
}

json params_json(const PrismDesignParams& p) {
  return {{"alpha_c_deg", p.alpha_c_deg}, {"a1_deg", p.a1_deg}, {"a2_deg", p.a2_deg}, {"n1", p.n1},
          {"v1", p.v1}, {"n2", p.n2}, {"v2", p.v2}, {"glass1", p.glass1}, {"glass2", p.glass2}};
}

// ---------------------------------------------------------------------------

int cmd_design(Run& run, const std::string& config_path) {
  PrismDesignParams initial = design_params(reported_amici_design());
  LossWeights weights = image_plane_weights();
  AdamConfig adam;
  if (!config_path.empty()) {
    run.inputs["config"] = config_path;
    const json j = read_json(config_path);
    try {
      if (j.contains("initial")) {
        const auto& i = j.at("initial");
        initial.alpha_c_deg = i.value("alpha_c_deg", initial.alpha_c_deg);
        initial.a1_deg = i.value("a1_deg", initial.a1_deg);
        initial.a2_deg = i.value("a2_deg", initial.a2_deg);
        const auto& cat = GlassCatalog::schott();
        for (auto [key, name, n, v] : {std::tuple{"glass1", &initial.glass1, &initial.n1, &initial.v1},
                                       std::tuple{"glass2", &initial.glass2, &initial.n2, &initial.v2}})
          if (i.contains(key)) {
            *name = i.at(key).get<std::string>();
            const auto& g = cat.at(*name);
            *n = g.n_d, *v = g.v_d;
          }
      }
      if (j.contains("weights")) {
        const auto& w = j.at("weights");
        if (w.is_string()) {
          if (w == "default") weights = LossWeights{};
          else if (w != "image_plane") throw ConfigError(config_path + ": weights must be 'default', 'image_plane' or an object");
        } else {
          weights.dispersion = w.value("dispersion", weights.dispersion);
          weights.distortion = w.value("distortion", weights.distortion);
          weights.deviation = w.value("deviation", weights.deviation);
          weights.thickness = w.value("thickness", weights.thickness);
          weights.glass = w.value("glass", weights.glass);
          weights.tir = w.value("tir", weights.tir);
        }
      }
      if (j.contains("adam")) {
        const auto& a = j.at("adam");
        adam.iterations = a.value("iterations", adam.iterations);
        adam.polish_iterations = a.value("polish_iterations", adam.polish_iterations);
        adam.lr_angle = a.value("lr_angle", adam.lr_angle);
        adam.lr_glass = a.value("lr_glass", adam.lr_glass);
      }
    } catch (const json::exception& e) {
      throw ConfigError(config_path + ": " + e.what());
    } catch (const std::out_of_range& e) {
      throw ConfigError(config_path + ": " + e.what());
    }
    validate(initial);
  }
  DesignRun result;
  try {
    result = run.timed("optimize", [&] { return optimize_prism(initial, weights, adam); });
  } catch (const OptimizationDiverged& e) {
    std::cerr << "error: " << e.what() << "\nlast valid parameters: " << params_json(e.last_valid).dump() << "\n";
    return kRuntime;
  }
  const auto& m = result.final_metrics;
  json report{{"initial", params_json(result.initial)},
              {"relaxed", params_json(result.relaxed)},
              {"final", params_json(result.final)},
              {"adam_iterations", result.adam_iterations},
              {"final_loss", result.loss_trace.empty() ? 0.0 : result.loss_trace.back()},
              {"metrics",
               {{"dispersion_deg", m.dispersion_deg},
                {"deviation_mrad", m.deviation_mrad},
                {"max_distortion_um", m.max_distortion_um},
                {"mean_distortion_um", m.mean_distortion_um},
                {"max_tir_margin", m.max_tir_margin}}}};
  std::ofstream(run.file("design_report.json")) << report.dump(2) << "\n";
  std::ofstream trace(run.file("loss_trace.txt"));
  trace.precision(12);
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) trace << i + 1 << " " << result.loss_trace[i] << "\n";
  save_system_config(build_reference_system(ReferenceSystem::AP, to_amici(result.final)),
                     run.file("AP_designed.json").string());
  std::cout << "dispersion " << m.dispersion_deg << " deg, deviation " << m.deviation_mrad << " mrad, distortion max "
            << m.max_distortion_um << " um, glasses " << result.final.glass1 << "/" << result.final.glass2 << "\n";
  return kOk;
}

struct RenderArgs {
  std::string system = "AP", scene, synthetic = "blocks", mask_path;
  int size = 64, rays = 20, oversampling = 4;
  double mask_ratio = 0.5;
  std::uint64_t mask_seed = 0;
};

int cmd_render(Run& run, const RenderArgs& a) {
  const OpticalSystem system(system_arg(a.system));
  run.inputs["system"] = a.system;
  SpectralCube scene;
  if (!a.scene.empty()) {
    run.inputs["scene"] = a.scene;
    scene = load_cube(a.scene);
  } else {
    scene = synthetic_scene(scene_kind(a.synthetic), a.size, a.size, system.config().band_wavelengths(), run.seed,
                            system.config().sensor.pitch_um);
    save_cube(run.file("scene.bin").string(), scene);
  }
  Mask mask;
  if (!a.mask_path.empty()) {
    run.inputs["mask"] = a.mask_path;
    mask = load_mask_pgm(a.mask_path);
  } else {
    mask = Mask::random(scene.height, scene.width, a.mask_ratio, a.mask_seed);
  }
  if (mask.height != scene.height || mask.width != scene.width)
    throw GeometryMismatch("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                           " does not match scene " + std::to_string(scene.height) + "x" + std::to_string(scene.width));
  save_mask_pgm(run.file("mask.pgm").string(), mask);
  RenderConfig cfg;
  cfg.rays_per_pixel = a.rays;
  cfg.oversampling = a.oversampling;
  cfg.seed = run.seed;
  const auto acq = run.timed("render", [&] { return render(code_scene(scene, mask), system, cfg); });
  for (const auto& w : acq.warnings) std::cerr << "warning: " << w << "\n";
  save_acquisition(run.file("acquisition.bin").string(), acq);
  save_pgm(run.file("acquisition.pgm").string(), acq.data, acq.height(), acq.width());
  std::cout << "acquisition " << acq.height() << "x" << acq.width() << ", total flux " << acq.total() << "\n";
  return kOk;
}

int cmd_map(Run& run, const std::string& sys, int height, int width, int oversampling) {
  const OpticalSystem system(system_arg(sys));
  run.inputs["system"] = sys;
  RenderConfig cfg;
  cfg.oversampling = oversampling;
  const SceneGrid grid{height, width, system.pitch_mm()};
  const auto m = run.timed("map", [&] { return render_mapping(system, grid, system.config().band_wavelengths(), cfg); });
  save_mapping(run.file("mapping.bin").string(), m);
  std::cout << "mapping " << m.height() << "x" << m.width() << "x" << m.bands() << ", window " << m.geometry().height
            << "x" << m.geometry().width << ", missing " << m.missing() << "\n";
  return kOk;
}

int cmd_analyze(Run& run, const std::string& sys, int grid) {
  const OpticalSystem system(system_arg(sys));
  run.inputs["system"] = sys;
  const auto d = run.timed("distortion", [&] { return distortion_map(system, {450.0, 520.0, 650.0}, grid); });
  std::ofstream(run.file("distortion.csv")) << distortion_csv(d);
  std::ofstream spots(run.file("spots.csv"));
  spots << "x_mm,y_mm,wavelength_nm,centroid_x_um,centroid_y_um,rms_radius_um\n";
  for (double wl : {450.0, 520.0, 650.0})
    for (Vec2 f : {Vec2{0, 0}, Vec2{2.5, 0}, Vec2{0, 2.5}, Vec2{2.5, 2.5}, Vec2{-2.5, -2.5}}) {
      const auto s = psf(system, f, wl, 91);
      spots << f.x << "," << f.y << "," << wl << "," << s.centroid_um.x << "," << s.centroid_um.y << ","
            << s.rms_radius_um << "\n";
    }
  const json summary{{"system", system.name()},
                     {"max_distortion_um", d.max_um},
                     {"mean_distortion_um", d.mean_um},
                     {"magnification", {d.magnification.x, d.magnification.y}},
                     {"spectral_spread_um", spectral_spread_um(system)}};
  std::ofstream(run.file("analysis.json")) << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_reconstruct(Run& run, const std::string& acq_path, const std::string& map_path, const std::string& mask_path,
                    const std::string& truth_path, const TvConfig& tv) {
  run.inputs["acquisition"] = acq_path;
  run.inputs["mapping"] = map_path;
  run.inputs["mask"] = mask_path;
  const auto acq = load_acquisition(acq_path);
  const auto mapping = load_mapping(map_path);
  const auto mask = load_mask_pgm(mask_path);
  if (!(acq.geometry == mapping.geometry()))
    throw GeometryMismatch("acquisition window " + std::to_string(acq.height()) + "x" + std::to_string(acq.width()) +
                           " does not match mapping window " + std::to_string(mapping.geometry().height) + "x" +
                           std::to_string(mapping.geometry().width) + " (or its origin)");
  const ForwardOperator op(mapping, mask);
  const auto res = run.timed("reconstruct", [&] { return reconstruct_tv(acq, op, tv); });
  save_cube(run.file("reconstruction.bin").string(), res.cube);
  json report{{"best_iteration", res.best_iteration}, {"residual", res.residual[res.best_iteration]}};
  if (!truth_path.empty()) {
    run.inputs["truth"] = truth_path;
    const auto q = quality(load_cube(truth_path), res.cube);
    report["quality"] = {{"rmse", q.rmse},       {"psnr_db", q.psnr},
                         {"ssim", q.ssim},       {"sam_rad", q.sam},
                         {"sam_normalized", q.sam_normalized}, {"sam_excluded_pixels", q.sam_excluded}};
  }
  report["note"] = "the splat operator ignores the Airy blur of the renderer";
  std::ofstream(run.file("quality.json")) << report.dump(2) << "\n";
  std::cout << report.dump(2) << "\n";
  return kOk;
}

int cmd_validate(Run& run, const std::string& sys) {
  const OpticalSystem system(system_arg(sys));
  run.inputs["system"] = sys;
  auto checks = run.timed("checks", [&] { return validate_system(system); });
  if (system.config().name == "mSP" || system.config().name == "mAP") {
    const auto curve = spectral_spread_curve(system, {0, 0}, {system.config().wavelength_min_nm, system.config().wavelength_max_nm});
    const double dy = std::abs(curve.back().dy_um);
    checks.push_back({"y-spread", dy > 1.0, "center-field y spread " + std::to_string(dy) + " um"});
  }
  const auto text = table(checks);
  std::cout << text;
  std::ofstream(run.file("validate.txt")) << text;
  for (const auto& c : checks)
    if (!c.pass) return kRuntime;
  return kOk;
}

int cmd_export(Run& run) {
  for (auto s : {ReferenceSystem::SP, ReferenceSystem::AP, ReferenceSystem::mSP, ReferenceSystem::mAP})
    save_system_config(build_reference_system(s), run.file(to_string(s) + ".json").string());
  return kOk;
}

int dispatch(int argc, char** argv);

int cmd_rerun(const std::string& manifest_path) {
  const json m = read_json(manifest_path);
  std::vector<std::string> args;
  try {
    args = m.at("argv").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path + ": " + e.what());
  }
  if (args.empty()) throw ConfigError(manifest_path + ": empty argv");
  std::vector<char*> ptrs;
  for (auto& a : args) ptrs.push_back(a.data());
  return dispatch(static_cast<int>(ptrs.size()), ptrs.data());
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Dispersive CASSI simulation: prism design, rendering, mapping and reconstruction"};
  app.require_subcommand(1);
  Run run;
  const char* env = std::getenv(kOutputEnv);
  std::string out = env ? env : "cassi_out";
  unsigned threads = 0;
  app.add_option("-o,--out", out, std::string("Output directory (default $") + kOutputEnv + " or ./cassi_out)");
  app.add_option("-j,--threads", threads, "Worker threads (default: hardware concurrency)");
  app.add_option("--seed", run.seed, "Random seed");

  std::string design_config;
  auto* design = app.add_subcommand("design", "Optimize the double-Amici prism");
  design->add_option("-c,--config", design_config, "Design config (JSON)");

  RenderArgs ra;
  auto* rend = app.add_subcommand("render", "Render a coded acquisition");
  rend->add_option("-s,--system", ra.system, "Reference name or system config file");
  rend->add_option("--scene", ra.scene, "Scene cube container");
  rend->add_option("--synthetic", ra.synthetic, "Synthetic scene when no --scene: blocks, smooth, disks");
  rend->add_option("--size", ra.size, "Synthetic scene size");
  rend->add_option("--mask", ra.mask_path, "Mask graymap");
  rend->add_option("--mask-ratio", ra.mask_ratio, "Random mask open ratio");
  rend->add_option("--mask-seed", ra.mask_seed, "Random mask seed");
  rend->add_option("--rays", ra.rays, "Rays per pixel per wavelength");
  rend->add_option("--oversampling", ra.oversampling, "Spectral oversampling factor");

  std::string map_system = "AP";
  int map_h = 64, map_w = 64, map_over = 4;
  auto* map = app.add_subcommand("map", "Build the spatio-spectral mapping");
  map->add_option("-s,--system", map_system, "Reference name or system config file");
  map->add_option("--height", map_h, "Scene rows");
  map->add_option("--width", map_w, "Scene columns");
  map->add_option("--oversampling", map_over, "Sub-bands per native band (match the render)");

  std::string an_system = "AP";
  int an_grid = 21;
  auto* analyze = app.add_subcommand("analyze", "Distortion map, spot diagrams and spread");
  analyze->add_option("-s,--system", an_system, "Reference name or system config file");
  analyze->add_option("--grid", an_grid, "Field grid points per side (odd)");

  std::string acq_path, map_path, mask_path, truth_path;
  TvConfig tv;
  auto* rec = app.add_subcommand("reconstruct", "TV reconstruction from an acquisition");
  rec->add_option("--acquisition", acq_path, "Acquisition container")->required();
  rec->add_option("--mapping", map_path, "Mapping container")->required();
  rec->add_option("--mask", mask_path, "Mask graymap")->required();
  rec->add_option("--truth", truth_path, "Ground-truth cube for the quality report");
  rec->add_option("--iterations", tv.iterations, "Solver iterations");
  rec->add_option("--tv-weight", tv.tv_weight, "TV weight");

  std::string val_system = "AP";
  auto* val = app.add_subcommand("validate", "Run the module oracles on a system");
  val->add_option("-s,--system", val_system, "Reference name or system config file");

  auto* exp = app.add_subcommand("export-configs", "Write the four reference system configs");

  std::string manifest_path;
  auto* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest");
  rerun->add_option("manifest", manifest_path, "run_manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (rerun->parsed()) return cmd_rerun(manifest_path);

  set_thread_count(threads);
  run.out = out;
  run.argv.assign(argv, argv + argc);
  run.command = app.get_subcommands().front()->get_name();
  fs::create_directories(run.out);
  int code = kOk;
  if (design->parsed()) code = cmd_design(run, design_config);
  else if (rend->parsed()) code = cmd_render(run, ra);
  else if (map->parsed()) code = cmd_map(run, map_system, map_h, map_w, map_over);
  else if (analyze->parsed()) code = cmd_analyze(run, an_system, an_grid);
  else if (rec->parsed()) code = cmd_reconstruct(run, acq_path, map_path, mask_path, truth_path, tv);
  else if (val->parsed()) code = cmd_validate(run, val_system);
  else if (exp->parsed()) code = cmd_export(run);
  run.write_manifest();
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const GeometryMismatch& e) {
    std::cerr << "geometry mismatch: " << e.what() << "\n";
    return kGeometry;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
