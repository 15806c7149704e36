// Command-line front end for the vector-beam sensing toolkit.
//
// Subcommands: simulate-rotor, simulate-track, simulate-knife,
// lut build | inspect, track. A JSON config document supplies defaults;
// command-line flags override individual fields. Every output file starts
// with a provenance comment (tool version, effective-config hash, seed).
//
// Exit codes: 0 success, 2 validation error, 3 parse/ingest error,
// 4 degenerate-inference warning (outputs still written).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vbsense/scenarios.hpp"
#include "vbsense/vbsense.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vbsense;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Global {
  std::string config_path;
  std::string out = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  json config = json::object();
};

json load_config_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw parse_error("cannot open config file: " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw parse_error(std::string("config JSON: ") + e.what());
  }
}

/// Seed a CLI option's default from the config document so that
/// flags override config fields which override built-in defaults.
template <typename T>
void config_default(const json& cfg, const char* key, T& value) {
  if (cfg.contains(key)) {
    try {
      value = cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      throw config_error(std::string("config field '") + key + "': " + e.what());
    }
  }
}

std::string provenance_line(const std::string& command, const json& effective,
                            std::uint64_t seed, const std::string& extra = {}) {
  const std::string canon = effective.dump();
  const std::uint64_t h = io::fnv1a64(canon.data(), canon.size());
  std::string line = "vbsense " + std::string(kVersion) + " command=" + command +
                     " config=" + io::hex64(h) + " seed=" + std::to_string(seed);
  if (!extra.empty()) line += " " + extra;
  return line;
}

fs::path out_file(const Global& g, const std::string& name) {
  fs::create_directories(g.out);
  return fs::path(g.out) / name;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw parse_error("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
}

void add_global_flags(CLI::App* cmd, Global& g, bool seed_required = false) {
  cmd->add_option("--config", g.config_path, "JSON config file; flags override its fields");
  auto* seed = cmd->add_option("--seed", g.seed, "RNG seed (bit-reproducible outputs)");
  if (seed_required) seed->required();
  cmd->add_option("--out", g.out, "output directory")->capture_default_str();
  cmd->add_option("--threads", g.threads, "worker threads")->capture_default_str();
}

// ---- simulate-rotor ----

int cmd_simulate_rotor(const Global& g, const scenarios::RotorConfig& cfg_in, const json& effective) {
  scenarios::RotorConfig cfg = cfg_in;
  cfg.seed = g.seed;
  const scenarios::RotorResult res = scenarios::run_rotor(cfg);
  const std::string prov = provenance_line("simulate-rotor", effective, g.seed);

  {
    std::ofstream f(out_file(g, "rotor_stokes.csv"));
    f << "# " << prov << "\n" << "theta_true_rad,s0,s1,s2\n";
    char buf[160];
    for (std::size_t k = 0; k < res.stokes.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", res.theta_true[k],
                    res.stokes[k].s0, res.stokes[k].s1, res.stokes[k].s2);
      f << buf;
    }
  }
  {
    std::ofstream f(out_file(g, "rotor_angles.csv"));
    f << "# " << prov << "\n" << "theta_true_rad,theta_est_rad,abs_error_rad\n";
    char buf[160];
    for (std::size_t k = 0; k < res.theta_est.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", res.theta_true[k],
                    res.theta_est[k], res.abs_error[k]);
      f << buf;
    }
  }
  write_json(json{{"provenance", prov},
                  {"n_angles", cfg.n_angles},
                  {"amplitude", res.amplitude},
                  {"mean_abs_error_rad", res.mean_abs_error},
                  {"max_abs_error_rad", res.max_abs_error},
                  {"mean_abs_error_deg", res.mean_abs_error * 180.0 / scenarios::pi},
                  {"radius_rel_spread", res.radius_rel_spread},
                  {"degenerate_poses", res.degenerate_poses}},
             out_file(g, "rotor_summary.json"));
  if (res.degenerate_poses > 0) {
    std::cerr << "warning: " << res.degenerate_poses
              << " pose(s) below the noise floor; estimates written as NaN\n";
    return 4;
  }
  return 0;
}

// ---- simulate-track ----

int cmd_simulate_track(const Global& g, const scenarios::TrackConfig& cfg_in, const json& effective) {
  scenarios::TrackConfig cfg = cfg_in;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  const scenarios::TrackResult res = scenarios::run_track(cfg);
  const std::string prov = provenance_line("simulate-track", effective, g.seed, "shape=disk");

  sensing::export_csv(res.trace, out_file(g, "track_trace.csv").string(), prov);
  tracking::export_track_csv(res.points, out_file(g, "track.csv").string(), prov);
  tracking::save_lut(res.lut, out_file(g, "track_lut.vbsa").string());

  int unreliable = 0, degenerate = 0, max_region = 0;
  for (const auto& p : res.points) {
    unreliable += p.reliable ? 0 : 1;
    degenerate += p.degenerate ? 1 : 0;
    max_region = std::max(max_region, p.region_cell_count);
  }
  write_json(json{{"provenance", prov},
                  {"n_steps", res.points.size()},
                  {"unreliable_steps", unreliable},
                  {"degenerate_steps", degenerate},
                  {"max_region_cells", max_region},
                  {"sigma_window", res.sigma[0]}},
             out_file(g, "track_summary.json"));
  if (degenerate > 0) {
    std::cerr << "warning: " << degenerate << " step(s) with a degenerate posterior\n";
    return 4;
  }
  return 0;
}

// ---- simulate-knife ----

int cmd_simulate_knife(const Global& g, const scenarios::KnifeConfig& cfg_in, const json& effective) {
  scenarios::KnifeConfig cfg = cfg_in;
  cfg.seed = g.seed;
  const scenarios::KnifeResult res = scenarios::run_knife(cfg);
  const std::string prov = provenance_line("simulate-knife", effective, g.seed);

  sensing::export_csv(res.trace, out_file(g, "knife_trace.csv").string(), prov);
  polarimetry::export_stokes_csv(res.t, res.stokes, out_file(g, "knife_stokes.csv").string(), prov);

  json events = json::array();
  for (const auto& e : res.events)
    events.push_back({{"t_start", e.t_start}, {"t_end", e.t_end}, {"duration", e.duration()}});
  json direction;
  if (res.direction) {
    direction = {{"axis", res.direction->axis == tracking::MotionAxis::horizontal ? "horizontal"
                                                                                  : "vertical"},
                 {"ambiguous_180", res.direction->ambiguous_180},
                 {"low_confidence", res.direction->low_confidence},
                 {"s1_energy", res.direction->s1_energy},
                 {"s2_energy", res.direction->s2_energy}};
  }
  write_json(json{{"provenance", prov}, {"events", events}, {"direction", direction}},
             out_file(g, "knife_events.json"));
  if (!res.direction) {
    std::cerr << "warning: transit direction could not be classified\n";
    return 4;
  }
  return 0;
}

// ---- lut build / inspect ----

struct LutBuildArgs {
  double beam_width = 2.84e-3;
  double wavelength = 1550e-9;
  int grid_n = 256;
  std::string shape = "disk";
  double diameter = 1.00e-3;
  double bar_width = 0.79e-3;
  double diffraction_scale = 1.35;
  double theta = 0;
  double resolution = 50e-6;
  double half_span = 0;  ///< 0 = 1.5 x beam width
  std::string field_path;  ///< measured-tomography source; empty = ideal mode
};

obstruction::Obstacle make_obstacle(const LutBuildArgs& a) {
  const obstruction::Pose pose{0, 0, a.theta};
  if (a.shape == "disk")
    return obstruction::Obstacle(obstruction::Disk{a.diameter}, pose, a.diffraction_scale);
  if (a.shape == "bar") return obstruction::Obstacle(obstruction::Bar{a.bar_width}, pose);
  if (a.shape == "half_plane") return obstruction::Obstacle(obstruction::HalfPlane{}, pose);
  throw config_error("lut build: unknown shape '" + a.shape + "' (disk, bar, half_plane)");
}

int cmd_lut_build(const Global& g, const LutBuildArgs& a) {
  polarimetry::Tomography tomo;
  tracking::LutSource source = tracking::LutSource::ideal_mode;
  if (!a.field_path.empty()) {
    tomo = polarimetry::tomography(beam::load_field(a.field_path));
    source = tracking::LutSource::measured_tomography;
  } else {
    const double waist = beam::calibrate_radial_waist(a.beam_width, a.wavelength);
    const GridGeometry geom = beam::default_geometry_for_width(a.beam_width, a.grid_n);
    tomo = polarimetry::tomography(beam::radial_mode(waist, a.wavelength, 0.0, geom));
  }
  const double half_span = a.half_span > 0 ? a.half_span : 1.5 * a.beam_width;
  const auto grid = tracking::LutGridSpec::centered(half_span, a.resolution);
  const tracking::LookupTable lut =
      tracking::build_lut(tomo, make_obstacle(a), grid, source, g.threads);
  tracking::save_lut(lut, out_file(g, "lut.vbsa").string());
  return 0;
}

int cmd_lut_inspect(const std::string& path) {
  const tracking::LookupTable lut = tracking::load_lut(path);
  const auto& gr = lut.grid;
  std::cout << "grid: " << gr.nx << " x " << gr.ny << " cells, resolution " << gr.resolution
            << " m, origin (" << gr.x_min << ", " << gr.y_min << ") m\n";
  std::cout << "source: "
            << (lut.source == tracking::LutSource::ideal_mode ? "ideal_mode" : "measured_tomography")
            << "\n";
  std::cout << "shape: " << tracking::detail::shape_name(lut.shape) << "\n";
  const char* names[4] = {"i0", "i90", "i45", "i135"};
  for (int c = 0; c < 4; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const double v : lut.expected[c]) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    std::cout << names[c] << ": min " << lo << ", max " << hi << "\n";
  }
  // 180-degree symmetry: compare each cell with its point reflection
  const double s0_max = lut.max_s0();
  double asym = 0;
  for (int j = 0; j < gr.ny; ++j)
    for (int i = 0; i < gr.nx; ++i) {
      const int ri = gr.nx - 1 - i, rj = gr.ny - 1 - j;
      for (int c = 0; c < 4; ++c)
        asym = std::max(asym, std::abs(lut.expected[c].at(i, j) - lut.expected[c].at(ri, rj)));
    }
  const double rel = asym / s0_max;
  std::cout << "symmetry: max |I(p) - I(-p)| = " << rel << " of peak s0 ("
            << (rel < 1e-6 ? "180-degree symmetric" : "broken symmetry") << ")\n";
  return 0;
}

// ---- track (ingest recorded trace) ----

struct TrackCmdArgs {
  std::string trace_path;
  std::string lut_path;
  std::string calibration_path;
  double window = 0;  ///< 0 = one sample period
  double period = 0;  ///< 0 = window
  double noise_sigma = -1;  ///< per-sample; < 0 = take from calibration
  std::vector<double> half_plane;  ///< x0 y0 theta
  double continuity_scale = 0;  ///< 0 = disabled
  double s0_floor = 1e-3;
};

/// The simulate-track provenance records the obstacle kind; reject a LUT
/// built for a different one when that record is present.
std::string trace_shape_hint(const std::string& path) {
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line) && !line.empty() && line[0] == '#') {
    const auto pos = line.find("shape=");
    if (pos != std::string::npos) {
      std::string v = line.substr(pos + 6);
      v = v.substr(0, v.find_first_of(" \t\r"));
      return v;
    }
  }
  return {};
}

int cmd_track(const Global& g, const TrackCmdArgs& a, const json& effective) {
  const tracking::LookupTable lut = tracking::load_lut(a.lut_path);

  const std::string hint = trace_shape_hint(a.trace_path);
  if (!hint.empty() && hint != tracking::detail::shape_name(lut.shape))
    throw config_error("trace/LUT mismatch: trace was recorded for shape '" + hint +
                       "' but the LUT is built for '" + tracking::detail::shape_name(lut.shape) +
                       "'");

  auto calibration = sensing::default_channels();
  if (!a.calibration_path.empty())
    calibration = sensing::load_calibration_json(a.calibration_path);
  const sensing::TraceSet trace = sensing::ingest(a.trace_path, calibration);

  const double window = a.window > 0 ? a.window : trace.sample_period;
  const double period = a.period > 0 ? a.period : window;
  const double t_last = trace.time_of(trace.length() - 1);
  if (window > t_last - trace.t0 + 1.5 * trace.sample_period)
    throw config_error("track: window longer than the trace");

  const auto n_window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::round(window / trace.sample_period)));
  double per_sample = a.noise_sigma;
  if (per_sample < 0) per_sample = trace.channels[0].noise_sigma;
  const double sigma_floor = 1e-9 * std::max(1e-300, lut.max_s0());
  const double sigma_w =
      std::max(sigma_floor, per_sample / std::sqrt(static_cast<double>(n_window)));

  std::vector<tracking::MeasuredSample> series;
  double peak_s0 = 0;
  for (std::size_t k = 0;; ++k) {
    const double t = trace.t0 + static_cast<double>(k) * period;
    if (t + window > t_last + 1.5 * trace.sample_period) break;
    const auto inten = sensing::integrate_window(trace, t, window);
    peak_s0 = std::max(peak_s0, inten[0] + inten[1]);
    series.push_back({t, inten});
  }
  if (series.empty()) throw config_error("track: no complete windows in the trace");
  if (peak_s0 > 1.05 * lut.max_s0() + 10.0 * sigma_w)
    throw config_error("trace/LUT mismatch: measured power exceeds the table's unobstructed level");

  tracking::PriorConfig prior;
  if (!a.half_plane.empty()) {
    if (a.half_plane.size() != 3)
      throw config_error("track: --half-plane needs x0 y0 theta");
    prior.initial_half_plane =
        tracking::PriorConfig::HalfPlanePrior{a.half_plane[0], a.half_plane[1], a.half_plane[2]};
  }
  if (a.continuity_scale > 0) prior.continuity_scale = a.continuity_scale;

  const auto points =
      tracking::track(lut, series, {sigma_w, sigma_w, sigma_w, sigma_w}, prior, a.s0_floor);
  const std::string prov = provenance_line("track", effective, g.seed);
  tracking::export_track_csv(points, out_file(g, "track.csv").string(), prov);

  int degenerate = 0;
  for (const auto& p : points) degenerate += p.degenerate ? 1 : 0;
  if (degenerate > 0) {
    std::cerr << "warning: " << degenerate << " window(s) with a degenerate posterior\n";
    return 4;
  }
  return 0;
}

std::string pre_scan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vector-beam kinematic sensing toolkit"};
  app.require_subcommand(1);

  Global g;
  try {
    const std::string cfg_path = pre_scan_config(argc, argv);
    if (!cfg_path.empty()) g.config = load_config_json(cfg_path);
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }

  int exit_code = 0;
  auto run = [&](auto fn) { return [&, fn]() { exit_code = fn(); }; };

  try {
    // simulate-rotor
    scenarios::RotorConfig rotor;
    config_default(g.config, "bar_width", rotor.bar_width);
    config_default(g.config, "beam_width", rotor.beam_width);
    config_default(g.config, "wavelength", rotor.wavelength);
    config_default(g.config, "grid_n", rotor.grid_n);
    config_default(g.config, "n_angles", rotor.n_angles);
    config_default(g.config, "sample_period", rotor.sample_period);
    config_default(g.config, "window", rotor.window);
    config_default(g.config, "noise_sigma", rotor.noise_sigma);
    auto* rot = app.add_subcommand("simulate-rotor", "rotating-bar angle sensing sweep");
    add_global_flags(rot, g, true);
    rot->add_option("--bar-width", rotor.bar_width, "bar width, m")->capture_default_str();
    rot->add_option("--beam-width", rotor.beam_width, "90-10 beam width, m")->capture_default_str();
    rot->add_option("--wavelength", rotor.wavelength, "m")->capture_default_str();
    rot->add_option("--grid-n", rotor.grid_n, "simulation grid size")->capture_default_str();
    rot->add_option("--n-angles", rotor.n_angles, "poses per revolution")->capture_default_str();
    rot->add_option("--sample-period", rotor.sample_period, "s")->capture_default_str();
    rot->add_option("--window", rotor.window, "integration window, s")->capture_default_str();
    rot->add_option("--noise-sigma", rotor.noise_sigma, "per-sample noise")->capture_default_str();
    rot->callback(run([&]() {
      json eff = {{"bar_width", rotor.bar_width}, {"beam_width", rotor.beam_width},
                  {"wavelength", rotor.wavelength}, {"grid_n", rotor.grid_n},
                  {"n_angles", rotor.n_angles}, {"sample_period", rotor.sample_period},
                  {"window", rotor.window}, {"noise_sigma", rotor.noise_sigma}};
      return cmd_simulate_rotor(g, rotor, eff);
    }));

    // simulate-track
    scenarios::TrackConfig trk;
    config_default(g.config, "sphere_diameter", trk.sphere_diameter);
    config_default(g.config, "diffraction_scale", trk.diffraction_scale);
    config_default(g.config, "beam_width", trk.beam_width);
    config_default(g.config, "wavelength", trk.wavelength);
    config_default(g.config, "grid_n", trk.grid_n);
    config_default(g.config, "step", trk.step);
    config_default(g.config, "start_x", trk.start_x);
    config_default(g.config, "start_y", trk.start_y);
    config_default(g.config, "end_x", trk.end_x);
    config_default(g.config, "end_y", trk.end_y);
    config_default(g.config, "sample_period", trk.sample_period);
    config_default(g.config, "window", trk.window);
    config_default(g.config, "noise_sigma", trk.noise_sigma);
    config_default(g.config, "lut_resolution", trk.lut_resolution);
    config_default(g.config, "continuity_scale", trk.continuity_scale);
    config_default(g.config, "use_half_plane_prior", trk.use_half_plane_prior);
    auto* str = app.add_subcommand("simulate-track", "sphere transit tracking scenario");
    add_global_flags(str, g, true);
    str->add_option("--sphere-diameter", trk.sphere_diameter, "m")->capture_default_str();
    str->add_option("--diffraction-scale", trk.diffraction_scale, "effective-size factor")
        ->capture_default_str();
    str->add_option("--beam-width", trk.beam_width, "90-10 beam width, m")->capture_default_str();
    str->add_option("--wavelength", trk.wavelength, "m")->capture_default_str();
    str->add_option("--grid-n", trk.grid_n, "simulation grid size")->capture_default_str();
    str->add_option("--step", trk.step, "stage step, m")->capture_default_str();
    str->add_option("--start-x", trk.start_x, "m")->capture_default_str();
    str->add_option("--start-y", trk.start_y, "m")->capture_default_str();
    str->add_option("--end-x", trk.end_x, "m")->capture_default_str();
    str->add_option("--end-y", trk.end_y, "m")->capture_default_str();
    str->add_option("--sample-period", trk.sample_period, "s")->capture_default_str();
    str->add_option("--window", trk.window, "acquisition window per step, s")->capture_default_str();
    str->add_option("--noise-sigma", trk.noise_sigma, "per-sample noise")->capture_default_str();
    str->add_option("--lut-resolution", trk.lut_resolution, "m")->capture_default_str();
    str->add_option("--continuity-scale", trk.continuity_scale, "m; 0 disables")
        ->capture_default_str();
    str->add_flag("--no-half-plane-prior", [&](std::int64_t) { trk.use_half_plane_prior = false; },
                  "disable the initial half-plane prior");
    str->callback(run([&]() {
      if (trk.continuity_scale == 0)
        trk.continuity_scale = std::numeric_limits<double>::infinity();
      json eff = {{"sphere_diameter", trk.sphere_diameter},
                  {"diffraction_scale", trk.diffraction_scale}, {"beam_width", trk.beam_width},
                  {"wavelength", trk.wavelength}, {"grid_n", trk.grid_n}, {"step", trk.step},
                  {"start_x", trk.start_x}, {"start_y", trk.start_y}, {"end_x", trk.end_x},
                  {"end_y", trk.end_y}, {"sample_period", trk.sample_period},
                  {"window", trk.window}, {"noise_sigma", trk.noise_sigma},
                  {"lut_resolution", trk.lut_resolution},
                  {"use_half_plane_prior", trk.use_half_plane_prior}};
      return cmd_simulate_track(g, trk, eff);
    }));

    // simulate-knife
    scenarios::KnifeConfig knf;
    config_default(g.config, "beam_width", knf.beam_width);
    config_default(g.config, "wavelength", knf.wavelength);
    config_default(g.config, "grid_n", knf.grid_n);
    config_default(g.config, "speed", knf.speed);
    config_default(g.config, "edge_theta", knf.edge_theta);
    config_default(g.config, "start_offset", knf.start_offset);
    config_default(g.config, "end_offset", knf.end_offset);
    config_default(g.config, "sample_period", knf.sample_period);
    config_default(g.config, "noise_sigma", knf.noise_sigma);
    config_default(g.config, "trigger_threshold", knf.trigger_threshold);
    config_default(g.config, "trigger_hysteresis", knf.trigger_hysteresis);
    auto* knc = app.add_subcommand("simulate-knife", "knife-edge transit across a focused beam");
    add_global_flags(knc, g, true);
    knc->add_option("--beam-width", knf.beam_width, "focused 90-10 width, m")->capture_default_str();
    knc->add_option("--wavelength", knf.wavelength, "m")->capture_default_str();
    knc->add_option("--grid-n", knf.grid_n, "simulation grid size")->capture_default_str();
    knc->add_option("--speed", knf.speed, "edge speed, m/s")->capture_default_str();
    knc->add_option("--edge-theta", knf.edge_theta, "covered-side normal, rad")->capture_default_str();
    knc->add_option("--start-offset", knf.start_offset, "m")->capture_default_str();
    knc->add_option("--end-offset", knf.end_offset, "m")->capture_default_str();
    knc->add_option("--sample-period", knf.sample_period, "s")->capture_default_str();
    knc->add_option("--noise-sigma", knf.noise_sigma, "per-sample noise")->capture_default_str();
    knc->add_option("--trigger-threshold", knf.trigger_threshold, "s0 departure fraction")
        ->capture_default_str();
    knc->add_option("--trigger-hysteresis", knf.trigger_hysteresis, "fraction")->capture_default_str();
    knc->callback(run([&]() {
      json eff = {{"beam_width", knf.beam_width}, {"wavelength", knf.wavelength},
                  {"grid_n", knf.grid_n}, {"speed", knf.speed}, {"edge_theta", knf.edge_theta},
                  {"start_offset", knf.start_offset}, {"end_offset", knf.end_offset},
                  {"sample_period", knf.sample_period}, {"noise_sigma", knf.noise_sigma},
                  {"trigger_threshold", knf.trigger_threshold},
                  {"trigger_hysteresis", knf.trigger_hysteresis}};
      return cmd_simulate_knife(g, knf, eff);
    }));

    // lut build | inspect
    auto* lut = app.add_subcommand("lut", "look-up table utilities");
    lut->require_subcommand(1);
    LutBuildArgs lb;
    config_default(g.config, "beam_width", lb.beam_width);
    config_default(g.config, "wavelength", lb.wavelength);
    config_default(g.config, "grid_n", lb.grid_n);
    config_default(g.config, "shape", lb.shape);
    config_default(g.config, "diameter", lb.diameter);
    config_default(g.config, "bar_width", lb.bar_width);
    config_default(g.config, "diffraction_scale", lb.diffraction_scale);
    config_default(g.config, "resolution", lb.resolution);
    auto* lbc = lut->add_subcommand("build", "build a LUT from the ideal mode or a stored field");
    add_global_flags(lbc, g);
    lbc->add_option("--beam-width", lb.beam_width, "90-10 beam width, m")->capture_default_str();
    lbc->add_option("--wavelength", lb.wavelength, "m")->capture_default_str();
    lbc->add_option("--grid-n", lb.grid_n, "simulation grid size")->capture_default_str();
    lbc->add_option("--shape", lb.shape, "disk | bar | half_plane")->capture_default_str();
    lbc->add_option("--diameter", lb.diameter, "disk diameter, m")->capture_default_str();
    lbc->add_option("--bar-width", lb.bar_width, "bar width, m")->capture_default_str();
    lbc->add_option("--diffraction-scale", lb.diffraction_scale, "disk effective-size factor")
        ->capture_default_str();
    lbc->add_option("--theta", lb.theta, "obstacle orientation, rad")->capture_default_str();
    lbc->add_option("--resolution", lb.resolution, "LUT cell size, m")->capture_default_str();
    lbc->add_option("--half-span", lb.half_span, "m; 0 = 1.5 x beam width")->capture_default_str();
    lbc->add_option("--field", lb.field_path, "stored field file (measured-tomography source)");
    lbc->callback(run([&]() { return cmd_lut_build(g, lb); }));

    std::string inspect_path;
    auto* lic = lut->add_subcommand("inspect", "print grid spec, extrema and symmetry diagnostics");
    lic->add_option("path", inspect_path, "LUT file")->required();
    lic->callback(run([&]() { return cmd_lut_inspect(inspect_path); }));

    // track
    TrackCmdArgs ta;
    config_default(g.config, "window", ta.window);
    config_default(g.config, "period", ta.period);
    config_default(g.config, "noise_sigma", ta.noise_sigma);
    config_default(g.config, "continuity_scale", ta.continuity_scale);
    auto* tc = app.add_subcommand("track", "invert a recorded trace against a LUT");
    add_global_flags(tc, g);
    tc->add_option("--trace", ta.trace_path, "trace CSV")->required();
    tc->add_option("--lut", ta.lut_path, "LUT file")->required();
    tc->add_option("--calibration", ta.calibration_path, "detector calibration JSON");
    tc->add_option("--window", ta.window, "integration window, s; 0 = one sample")
        ->capture_default_str();
    tc->add_option("--period", ta.period, "window spacing, s; 0 = window")->capture_default_str();
    tc->add_option("--noise-sigma", ta.noise_sigma, "per-sample noise; < 0 = from calibration")
        ->capture_default_str();
    tc->add_option("--half-plane", ta.half_plane, "initial half-plane prior: x0 y0 theta")
        ->expected(3);
    tc->add_option("--continuity-scale", ta.continuity_scale, "m; 0 disables")
        ->capture_default_str();
    tc->add_option("--s0-floor", ta.s0_floor, "covered-sample threshold fraction")
        ->capture_default_str();
    tc->callback(run([&]() {
      json eff = {{"trace", ta.trace_path}, {"lut", ta.lut_path},
                  {"calibration", ta.calibration_path}, {"window", ta.window},
                  {"period", ta.period}, {"noise_sigma", ta.noise_sigma},
                  {"half_plane", ta.half_plane}, {"continuity_scale", ta.continuity_scale},
                  {"s0_floor", ta.s0_floor}};
      return cmd_track(g, ta, eff);
    }));

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int c = app.exit(e);
      return c == 0 ? 0 : 2;
    }
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const degenerate_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
