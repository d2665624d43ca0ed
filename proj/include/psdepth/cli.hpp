#pragma once

// Command-line front end. `run_cli` is the whole program; the executable in
// tools/ only forwards argv so tests can drive every subcommand in-process.

#include "psdepth/bounds.hpp"
#include "psdepth/classic.hpp"
#include "psdepth/core.hpp"
#include "psdepth/dense_oracle.hpp"
#include "psdepth/gradcheck.hpp"
#include "psdepth/io.hpp"
#include "psdepth/ipiano.hpp"
#include "psdepth/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace psdepth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitSolver = 2;

/// Record of one command run, written as manifest.json next to its outputs.
class RunManifest {
 public:
  explicit RunManifest(std::string command) { doc_["command"] = std::move(command); }

  void input(const std::string& key, const std::string& value) { doc_["inputs"][key] = value; }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void config(const SolverConfig& c) { doc_["config"] = io::config_to_json(c); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void output(const fs::path& p) { outputs_.push_back(p); }

  /// Runs `fn` and books its wall-clock time under `phase`.
  template <class Fn>
  decltype(auto) timed(const std::string& phase, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    struct Stop {
      RunManifest* self;
      std::string phase;
      std::chrono::steady_clock::time_point start;
      ~Stop() {
        self->doc_["timings_seconds"][phase] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
    } stop{this, phase, start};
    return fn();
  }

  /// Checks every listed output exists, then writes `dir/manifest.json`.
  fs::path write(const fs::path& dir) {
    json outs = json::array();
    for (const auto& p : outputs_) {
      if (!fs::exists(p)) throw InputError("manifest: output '" + p.string() + "' was not written");
      outs.push_back(p.string());
    }
    doc_["outputs"] = outs;
    const fs::path path = dir / "manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << doc_.dump(2) << '\n';
    return path;
  }

  const json& document() const { return doc_; }

 private:
  json doc_ = json::object();
  std::vector<fs::path> outputs_;
};

namespace detail {

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory '" + dir.string() + "'");
}

/// "32" or "32x24".
inline Grid parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) {
      const long n = std::stol(s);
      return Grid(n, n);
    }
    return Grid(std::stol(s.substr(0, x)), std::stol(s.substr(x + 1)));
  } catch (const InputError&) {
    throw;
  } catch (const std::exception&) {
    throw InputError("invalid size '" + s + "' (expected N or WxH)");
  }
}

/// "0.8", "two-tone" or "two-tone:0.8,0.5".
inline void parse_albedo(const std::string& text, SceneParams& params) {
  const std::string tag = "two-tone";
  try {
    if (text.rfind(tag, 0) == 0) {
      params.albedo_pattern = AlbedoPattern::TwoTone;
      if (text.size() > tag.size()) {
        if (text[tag.size()] != ':') throw std::invalid_argument(text);
        const std::string rest = text.substr(tag.size() + 1);
        const auto comma = rest.find(',');
        if (comma == std::string::npos) throw std::invalid_argument(text);
        params.albedo = std::stod(rest.substr(0, comma));
        params.albedo_secondary = std::stod(rest.substr(comma + 1));
      }
      return;
    }
    std::size_t used = 0;
    params.albedo = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    params.albedo_pattern = AlbedoPattern::Constant;
  } catch (const std::exception&) {
    throw InputError("invalid albedo '" + text + "' (expected a value, two-tone or two-tone:A,B)");
  }
}

inline std::string image_name(Index i) {
  std::ostringstream os;
  os << "img_" << std::setw(3) << std::setfill('0') << i << ".pgm";
  return os.str();
}

inline std::string fmt(double v) { return io::format_double(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string scene = "sphere-cap";
  std::string size = "32";
  std::string lights;
  int ring = 0;
  double ring_tilt = 0.5;
  std::string albedo = "0.8";
  double sigma = 0.0;
  double radius = 0.0;
  double amplitude = 2.0;
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& out) {
  RunManifest manifest("synth");
  manifest.seed(o.seed);
  const Grid grid = detail::parse_size(o.size);
  SceneParams params;
  params.sphere_radius = o.radius;
  params.bump_amplitude = o.amplitude;
  detail::parse_albedo(o.albedo, params);
  LightMatrix lights;
  if (!o.lights.empty()) {
    lights = io::read_lights_csv(o.lights);
    manifest.input("lights", o.lights);
  } else if (o.ring > 0) {
    lights = ring_lights(o.ring, o.ring_tilt);
  } else {
    throw InputError("synth: give --lights FILE or --ring M");
  }

  const fs::path dir(o.out);
  detail::ensure_dir(dir / "images");
  const GradientOperator op(grid);
  const Scene scene = make_scene(parse_scene_kind(o.scene), grid, params);
  const ImageStack images = manifest.timed("render", [&] {
    return add_gaussian_noise(render_lambertian(scene.depth, scene.albedo, lights, op), o.sigma, o.seed);
  });

  manifest.timed("write", [&] {
    for (Index i = 0; i < images.count(); ++i) {
      const fs::path p = dir / "images" / detail::image_name(i);
      io::write_pgm(p, grid, images.intensities.row(i).transpose());
      manifest.output(p);
    }
    io::write_lights_csv(dir / "lights.csv", lights);
    io::write_depth(dir / "depth_gt.pfm", scene.depth);
    io::write_normals(dir / "normals_gt.pfm", normals_from_depth(scene.depth, op));
    io::write_albedo(dir / "albedo_gt.pfm", scene.albedo);
    for (const char* name : {"lights.csv", "depth_gt.pfm", "normals_gt.pfm", "albedo_gt.pfm"}) manifest.output(dir / name);
  });
  manifest.set("scene", {{"kind", o.scene},
                         {"width", grid.width()},
                         {"height", grid.height()},
                         {"albedo", o.albedo},
                         {"sigma", o.sigma},
                         {"images", images.count()}});
  manifest.write(dir);
  out << "wrote " << images.count() << " images (" << grid.width() << "x" << grid.height() << ") to " << dir.string()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// classic

struct ClassicOptions {
  std::string images;
  std::string lights;
  std::string out;
};

inline int cmd_classic(const ClassicOptions& o, std::ostream& out) {
  RunManifest manifest("classic");
  manifest.input("images", o.images);
  manifest.input("lights", o.lights);
  const ImageStack images = io::read_image_stack(io::list_images(o.images));
  const LightMatrix lights = io::read_lights_csv(o.lights);
  const GradientOperator op(images.grid);

  const PointwisePSResult ps = manifest.timed("pointwise", [&] { return estimate_normals_albedo(images, lights); });
  const DepthMap z0 = manifest.timed("integrate", [&] { return integrate_normals(ps.normals, op); });

  const fs::path dir(o.out);
  detail::ensure_dir(dir);
  io::write_depth(dir / "depth.pfm", z0);
  io::write_albedo(dir / "albedo.pfm", ps.albedo);
  io::write_normals(dir / "normals.pfm", ps.normals);
  io::write_pfm(dir / "residual.pfm", images.grid, ps.residual);
  for (const char* name : {"depth.pfm", "albedo.pfm", "normals.pfm", "residual.pfm"}) manifest.output(dir / name);
  manifest.write(dir);
  out << "classic photometric stereo: " << images.count() << " images, " << images.pixels() << " pixels, mean residual "
      << detail::fmt(ps.residual.mean()) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// refine

struct RefineOptions {
  std::string images;
  std::string lights;
  std::string init_depth;
  std::string init_albedo;
  std::string config;
  std::string mask;
  std::string gradient;
  bool record_descent = false;
  std::string out;
};

inline int cmd_refine(const RefineOptions& o, std::ostream& out) {
  RunManifest manifest("refine");
  manifest.input("images", o.images);
  manifest.input("lights", o.lights);
  manifest.input("init_depth", o.init_depth);
  manifest.input("init_albedo", o.init_albedo);
  SolverConfig config;
  if (!o.config.empty()) {
    config = io::read_config(o.config);
    manifest.input("config", o.config);
  }
  if (o.gradient == "exact") config.gradient_mode = GradientMode::Exact;
  else if (o.gradient == "approx") config.gradient_mode = GradientMode::Approx;
  else if (!o.gradient.empty()) throw InputError("--gradient must be approx or exact");
  if (o.record_descent) config.record_descent = true;
  config.validate();
  manifest.config(config);

  const ImageStack images = io::read_image_stack(io::list_images(o.images));
  const LightMatrix lights = io::read_lights_csv(o.lights);
  const DepthMap z0 = io::read_depth(o.init_depth);
  const AlbedoMap rho0 = io::read_albedo(o.init_albedo);
  require_same_grid(z0.grid, images.grid, "refine: initial depth");
  require_same_grid(rho0.grid, images.grid, "refine: initial albedo");
  Vector mask;
  if (!o.mask.empty()) {
    mask = io::read_mask(o.mask, images.grid);
    manifest.input("mask", o.mask);
  }

  const SolveResult result =
      manifest.timed("solve", [&] { return alternating_solve(images, lights, z0, rho0, config, mask); });
  const GradientOperator op(images.grid);
  Vector error = reprojection_error_map(result.depth, result.albedo, images, lights, op);
  if (mask.size() != 0) error = error.cwiseProduct(mask);

  const fs::path dir(o.out);
  detail::ensure_dir(dir);
  io::write_depth(dir / "depth.pfm", result.depth);
  io::write_albedo(dir / "albedo.pfm", result.albedo);
  io::write_normals(dir / "normals.pfm", normals_from_depth(result.depth, op));
  io::write_pfm(dir / "error.pfm", images.grid, error);
  io::write_trace_csv(dir / "trace.csv", result.trace);
  for (const char* name : {"depth.pfm", "albedo.pfm", "normals.pfm", "error.pfm", "trace.csv"}) {
    manifest.output(dir / name);
  }
  const auto& last = result.trace.outer.back();
  manifest.set("result", {{"outer_iterations", result.trace.outer.size()},
                          {"inner_iterations", result.trace.inner.size()},
                          {"initial_objective", result.trace.initial_objective},
                          {"final_objective", last.objective},
                          {"albedo_out_of_range", last.albedo_out_of_range}});
  manifest.write(dir);
  out << "refine: " << result.trace.outer.size() << " outer / " << result.trace.inner.size()
      << " inner iterations, f+g " << detail::fmt(result.trace.initial_objective) << " -> "
      << detail::fmt(last.objective) << '\n';
  if (last.albedo_out_of_range > 0) out << "warning: " << last.albedo_out_of_range << " albedo values outside [0, 1]\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string est_normals;
  std::string est_depth;
  std::string est_albedo;
  std::string gt_normals;
  std::string gt_depth;
  std::string images;
  std::string lights;
  std::string out;
};

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  if (o.est_normals.empty() == o.est_depth.empty()) throw InputError("eval: give exactly one of --est-normals, --est-depth");
  if (o.gt_normals.empty() == o.gt_depth.empty()) throw InputError("eval: give exactly one of --gt-normals, --gt-depth");
  auto load_normals = [](const std::string& normals, const std::string& depth) {
    if (!normals.empty()) return io::read_normals(normals);
    const DepthMap z = io::read_depth(depth);
    return normals_from_depth(z, GradientOperator(z.grid));
  };
  const NormalField est = load_normals(o.est_normals, o.est_depth);
  const NormalField gt = load_normals(o.gt_normals, o.gt_depth);
  json report;
  report["mae_degrees"] = mean_angular_error(est, gt);
  out << "mae_degrees " << detail::fmt(report["mae_degrees"].get<double>()) << '\n';

  if (!o.images.empty()) {
    if (o.est_depth.empty() || o.est_albedo.empty() || o.lights.empty()) {
      throw InputError("eval: reprojection error needs --est-depth, --est-albedo, --images and --lights");
    }
    const ImageStack images = io::read_image_stack(io::list_images(o.images));
    const LightMatrix lights = io::read_lights_csv(o.lights);
    const DepthMap z = io::read_depth(o.est_depth);
    const AlbedoMap rho = io::read_albedo(o.est_albedo);
    require_same_grid(z.grid, images.grid, "eval: depth");
    const Vector err = reprojection_error_map(z, rho, images, lights, GradientOperator(images.grid));
    report["reprojection_error"] = err.sum();
    report["mean_reprojection_error"] = err.mean();
    out << "reprojection_error " << detail::fmt(err.sum()) << '\n';
  }
  if (!o.out.empty()) {
    std::ofstream f(o.out, std::ios::trunc);
    if (!f) throw InputError("cannot write '" + o.out + "'");
    f << report.dump(2) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diag

struct DiagOptions {
  std::string size = "8";
  int lights = 4;
  std::uint64_t seed = 0;
  double sigma = 0.01;
  double albedo_scale = 1.0;
  int samples = 1000;
  double cap_factor = 1.5;
  int iterations = 100;
  bool perfect = false;
  std::string gradient = "approx";
};

inline int cmd_diag_gradcheck(const DiagOptions& o, std::ostream& out) {
  const RandomInstance inst = make_random_instance(detail::parse_size(o.size), o.lights, o.seed);
  const EnergyContext ctx = inst.context();
  const Vector& z = inst.depth.z;
  const Vector exact = grad_f_exact(ctx, z);
  out << "fd_relative_error " << detail::fmt(relative_linf(exact, finite_difference_gradient(ctx, z, 1e-6))) << '\n';
  if (ctx.pixels() <= kDenseOracleMaxPixels) {
    out << "oracle_relative_error " << detail::fmt(relative_linf(exact, dense_oracle_grad(ctx, z))) << '\n';
  } else {
    out << "oracle_relative_error skipped (more than " << kDenseOracleMaxPixels << " pixels)\n";
  }
  out << "approx_exact_relative_gap " << detail::fmt(relative_linf(grad_f_approx(ctx, z), exact)) << '\n';
  return kExitOk;
}

inline int cmd_diag_bounds(const DiagOptions& o, std::ostream& out) {
  const Grid grid = detail::parse_size(o.size);
  const RandomInstance inst = make_random_instance(grid, o.lights, o.seed);
  const GradientOperator op(grid);
  const AlbedoMap rho(grid, inst.albedo.rho * o.albedo_scale);
  const GradientCaps caps = caps_from_reference(inst.depth, op, o.cap_factor);
  const LipschitzReport r = global_constants(inst.images, inst.lights, op, rho, caps);
  const EnergyContext ctx(inst.images, inst.lights, op, rho, 1e-6, inst.depth);
  out << "cap " << detail::fmt(caps.Lz.size() ? caps.Lz(0) : 0.0) << '\n'
      << "M_norm " << detail::fmt(r.M_norm) << '\n'
      << "L_A " << detail::fmt(r.L_A) << '\n'
      << "L_f " << detail::fmt(r.L_f) << '\n'
      << "L_q " << detail::fmt(r.L_q) << '\n'
      << "L_grad_f " << detail::fmt(r.L_grad_f) << '\n'
      << "empirical_q " << detail::fmt(empirical_lipschitz(ctx, o.samples, caps, o.seed, GradientMode::Approx)) << '\n'
      << "empirical_grad_f " << detail::fmt(empirical_lipschitz(ctx, o.samples, caps, o.seed, GradientMode::Exact))
      << '\n';
  return kExitOk;
}

inline int cmd_diag_descent(const DiagOptions& o, std::ostream& out) {
  const Grid grid = detail::parse_size(o.size);
  const GradientOperator op(grid);
  const Scene scene = make_scene(SceneKind::SphereCap, grid);
  const LightMatrix lights = ring_lights(o.lights, 0.9);
  const ImageStack clean = render_lambertian(scene.depth, scene.albedo, lights, op);
  SolverConfig config;
  config.record_descent = true;
  config.inner_max_iters = o.iterations;
  if (o.gradient == "exact") config.gradient_mode = GradientMode::Exact;
  else if (o.gradient != "approx") throw InputError("--gradient must be approx or exact");

  ImageStack images = clean;
  DepthMap start = scene.depth;
  AlbedoMap rho = scene.albedo;
  if (!o.perfect) {
    images = add_gaussian_noise(clean, o.sigma, o.seed);
    const PointwisePSResult ps = estimate_normals_albedo(images, lights);
    start = integrate_normals(ps.normals, op);
    rho = ps.albedo;
  }
  const EnergyContext ctx(images, lights, op, rho, config.lambda, start);
  IterTrace trace;
  ipiano_inner(ctx, start, config, trace);
  out << "ell,q_dot_gradf,f_plus_g\n";
  for (const auto& r : trace.inner) {
    out << r.ell << ',' << detail::fmt(r.q_dot_gradf.value_or(0.0)) << ',' << detail::fmt(r.f_plus_g) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Runs `body` and maps escaping exceptions to exit codes: SolverError to 2,
/// everything else to 1. The message goes to `err`.
template <class Body>
int run_guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const SolverError& ex) {
    err << "solver error: " << ex.what() << '\n';
    return kExitSolver;
  } catch (const InputError& ex) {
    err << "input error: " << ex.what() << '\n';
    return kExitInput;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitInput;
  }
}

/// Parses argv and runs one subcommand. Returns the process exit code:
/// 0 success, 1 input error (including bad arguments), 2 solver error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Photometric-stereo depth refinement with iPiano"};
  app.require_subcommand(1);
  int threads = 0;
  std::uint64_t seed = 0;
  std::string mask;
  app.add_option("--threads", threads, "Worker threads for linear algebra (0 = library default)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--mask", mask, "PGM mask; zero pixels are excluded from the data term");

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic scene");
  s->add_option("--scene", synth.scene, "sphere-cap, gaussian-bump or plane")->capture_default_str();
  s->add_option("--size", synth.size, "N or WxH")->capture_default_str();
  s->add_option("--lights", synth.lights, "Lights CSV (sx,sy,sz per row)");
  s->add_option("--ring", synth.ring, "Use M ring lights instead of a lights file");
  s->add_option("--ring-tilt", synth.ring_tilt, "Ring polar angle in radians")->capture_default_str();
  s->add_option("--albedo", synth.albedo, "Constant value, two-tone or two-tone:A,B")->capture_default_str();
  s->add_option("--sigma", synth.sigma, "Noise level relative to the maximum intensity")->capture_default_str();
  s->add_option("--radius", synth.radius, "Sphere radius in pixels (0 = automatic)");
  s->add_option("--amplitude", synth.amplitude, "Gaussian bump height")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  ClassicOptions classic;
  auto* c = app.add_subcommand("classic", "Pointwise photometric stereo plus least-squares integration");
  c->add_option("--images", classic.images, "Directory of PGM images")->required();
  c->add_option("--lights", classic.lights, "Lights CSV")->required();
  c->add_option("--out", classic.out, "Output directory")->required();

  RefineOptions refine;
  auto* r = app.add_subcommand("refine", "Alternating iPiano depth / albedo refinement");
  r->add_option("--images", refine.images, "Directory of PGM images")->required();
  r->add_option("--lights", refine.lights, "Lights CSV")->required();
  r->add_option("--init-depth", refine.init_depth, "Initial depth and prior (PFM)")->required();
  r->add_option("--init-albedo", refine.init_albedo, "Initial albedo (PFM)")->required();
  r->add_option("--config", refine.config, "Solver configuration JSON");
  r->add_option("--gradient", refine.gradient, "approx or exact (overrides the config)");
  r->add_flag("--record-descent", refine.record_descent, "Record <q, grad f> in the trace");
  r->add_option("--out", refine.out, "Output directory")->required();

  EvalOptions eval;
  auto* e = app.add_subcommand("eval", "Mean angular error and reprojection error");
  e->add_option("--est-normals", eval.est_normals, "Estimated normals (PFM)");
  e->add_option("--est-depth", eval.est_depth, "Estimated depth (PFM)");
  e->add_option("--est-albedo", eval.est_albedo, "Estimated albedo (PFM), for the reprojection error");
  e->add_option("--gt-normals", eval.gt_normals, "Ground-truth normals (PFM)");
  e->add_option("--gt-depth", eval.gt_depth, "Ground-truth depth (PFM)");
  e->add_option("--images", eval.images, "Image directory, for the reprojection error");
  e->add_option("--lights", eval.lights, "Lights CSV, for the reprojection error");
  e->add_option("--out", eval.out, "Write a JSON report");

  DiagOptions grad_opts, bound_opts, descent_opts;
  bound_opts.size = descent_opts.size = "16";
  auto* d = app.add_subcommand("diag", "Gradient, Lipschitz and descent diagnostics");
  d->require_subcommand(1);
  auto add_common = [](CLI::App* sub, DiagOptions& opts) {
    sub->add_option("--size", opts.size, "N or WxH")->capture_default_str();
    sub->add_option("--lights", opts.lights, "Number of lights")->capture_default_str();
  };
  auto* dg = d->add_subcommand("gradcheck", "Exact gradient vs finite differences and the dense oracle");
  add_common(dg, grad_opts);
  auto* db = d->add_subcommand("bounds", "Analytic Lipschitz constants and sampled quotients");
  add_common(db, bound_opts);
  db->add_option("--albedo-scale", bound_opts.albedo_scale, "Multiply the albedo (0 gives all-zero bounds)")
      ->capture_default_str();
  db->add_option("--samples", bound_opts.samples, "Sampled pairs")->capture_default_str();
  db->add_option("--cap-factor", bound_opts.cap_factor, "Caps as a multiple of the scene's largest gradient")
      ->capture_default_str();
  auto* dd = d->add_subcommand("descent", "<q, grad f> along an inner iPiano loop");
  add_common(dd, descent_opts);
  dd->add_option("--sigma", descent_opts.sigma, "Noise level")->capture_default_str();
  dd->add_option("--iterations", descent_opts.iterations, "Inner iterations")->capture_default_str();
  dd->add_option("--gradient", descent_opts.gradient, "approx or exact")->capture_default_str();
  dd->add_flag("--perfect", descent_opts.perfect, "Start at the ground truth on noiseless data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kExitOk : kExitInput;
  }

  return run_guarded(err, [&] {
    if (threads > 0) Eigen::setNbThreads(threads);
    synth.seed = grad_opts.seed = bound_opts.seed = descent_opts.seed = seed;
    if (!mask.empty()) refine.mask = mask;

    if (s->parsed()) return cmd_synth(synth, out);
    if (c->parsed()) return cmd_classic(classic, out);
    if (r->parsed()) return cmd_refine(refine, out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (dg->parsed()) return cmd_diag_gradcheck(grad_opts, out);
    if (db->parsed()) return cmd_diag_bounds(bound_opts, out);
    if (dd->parsed()) return cmd_diag_descent(descent_opts, out);
    return kExitInput;
  });
}

}  // namespace psdepth::cli
