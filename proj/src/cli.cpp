#include "nvstrain/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "nvstrain/error.hpp"
#include "nvstrain/geometry.hpp"
#include "nvstrain/io.hpp"

namespace nvstrain::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json num(double v) { return json(io::round_sig(v)); }

json vec_json(const Vector3d& v) { return json::array({num(v.x()), num(v.y()), num(v.z())}); }

json optional_num(std::optional<double> v) { return v ? num(*v) : json(nullptr); }

double get_number(const json& obj, const std::string& key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_number()) {
    throw ConfigError(fmt::format("{}: key '{}' must be a number", context, key));
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(fmt::format("{}: key '{}' is not finite", context, key));
  return d;
}

std::optional<double> opt_number(const json& obj, const std::string& key, const std::string& context) {
  if (!obj.contains(key)) return std::nullopt;
  return get_number(obj, key, context);
}

std::string get_string(const json& obj, const std::string& key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(fmt::format("{}: key '{}' must be a string", context, key));
  return v.get<std::string>();
}

const json& get_object(const json& obj, const std::string& key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_object()) throw ConfigError(fmt::format("{}: key '{}' must be an object", context, key));
  return v;
}

PhaseConvention parse_convention(const std::string& s) {
  if (s == "sum") return PhaseConvention::Sum;
  if (s == "difference") return PhaseConvention::Difference;
  throw ConfigError(fmt::format("phase_convention must be 'sum' or 'difference', got '{}'", s));
}

const char* convention_name(PhaseConvention c) {
  return c == PhaseConvention::Sum ? "sum" : "difference";
}

json amplitudes_json(const StrainAmplitudes& a) {
  return {{"m_z", num(a.m_z)}, {"m_x", num(a.m_x)}, {"m_y", num(a.m_y)},
          {"n_x", num(a.n_x)}, {"n_y", num(a.n_y)}};
}

json tensor_json(const StrainTensor& t) {
  return {{"e_xx", num(t.e_xx)}, {"e_yy", num(t.e_yy)}, {"e_zz", num(t.e_zz)},
          {"e_xy", num(t.e_xy)}, {"e_xz", num(t.e_xz)}, {"e_yz", num(t.e_yz)},
          {"frame", t.frame == Frame::NV ? "nv" : "lab"}};
}

StrainTensor parse_tensor(const json& obj) {
  const std::string ctx = "tensor";
  reject_unknown_keys(obj, {"e_xx", "e_yy", "e_zz", "e_xy", "e_xz", "e_yz", "frame"}, ctx);
  StrainTensor t;
  t.e_xx = opt_number(obj, "e_xx", ctx).value_or(0.0);
  t.e_yy = opt_number(obj, "e_yy", ctx).value_or(0.0);
  t.e_zz = opt_number(obj, "e_zz", ctx).value_or(0.0);
  t.e_xy = opt_number(obj, "e_xy", ctx).value_or(0.0);
  t.e_xz = opt_number(obj, "e_xz", ctx).value_or(0.0);
  t.e_yz = opt_number(obj, "e_yz", ctx).value_or(0.0);
  const std::string frame = obj.contains("frame") ? get_string(obj, "frame", ctx) : "nv";
  if (frame == "nv") {
    t.frame = Frame::NV;
  } else if (frame == "lab") {
    t.frame = Frame::Lab;
  } else {
    throw ConfigError(fmt::format("tensor: frame must be 'nv' or 'lab', got '{}'", frame));
  }
  return t;
}

StrainTensor parse_scenario(const json& obj) {
  const std::string ctx = "scenario";
  if (!obj.contains("kind")) throw ConfigError("scenario: missing key 'kind'");
  const std::string kind = get_string(obj, "kind", ctx);
  if (kind == "volumetric") {
    reject_unknown_keys(obj, {"kind", "strain"}, ctx);
    if (!obj.contains("strain")) throw ConfigError("scenario: volumetric needs 'strain'");
    return scenario::volumetric(get_number(obj, "strain", ctx));
  }
  if (kind == "shear_yz") {
    reject_unknown_keys(obj, {"kind", "e_yz"}, ctx);
    if (!obj.contains("e_yz")) throw ConfigError("scenario: shear_yz needs 'e_yz'");
    return scenario::shear_yz(get_number(obj, "e_yz", ctx));
  }
  if (kind == "shear_xy") {
    reject_unknown_keys(obj, {"kind", "e_xx", "e_yy", "e_xy"}, ctx);
    return scenario::shear_xy(opt_number(obj, "e_xx", ctx).value_or(0.0),
                              opt_number(obj, "e_yy", ctx).value_or(0.0),
                              opt_number(obj, "e_xy", ctx).value_or(0.0));
  }
  throw ConfigError(fmt::format(
      "scenario: kind must be volumetric, shear_yz or shear_xy, got '{}'", kind));
}

CouplingConstants parse_couplings(const json& obj) {
  const std::string ctx = "couplings";
  reject_unknown_keys(obj, {"h41", "h43", "h15", "h16", "h25", "h26"}, ctx);
  CouplingConstants c = default_couplings();
  c.h41 = opt_number(obj, "h41", ctx).value_or(c.h41);
  c.h43 = opt_number(obj, "h43", ctx).value_or(c.h43);
  c.h15 = opt_number(obj, "h15", ctx).value_or(c.h15);
  c.h16 = opt_number(obj, "h16", ctx).value_or(c.h16);
  c.h25 = opt_number(obj, "h25", ctx).value_or(c.h25);
  c.h26 = opt_number(obj, "h26", ctx).value_or(c.h26);
  return c;
}

json load_json_file(const std::string& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path, e.what()));
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json cfg = load_json_file(path);
  if (!cfg.is_object()) throw ConfigError(fmt::format("{}: config must be a JSON object", path));
  return cfg;
}

json meta(const std::string& command) {
  return {{"command", command}, {"version", kVersion}};
}

void emit_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimulateFlags {
  std::string config;
  std::optional<double> d, phi_mw, gamma, depth, baseline;
  std::optional<std::string> out_csv, out_json;
};

int cmd_simulate(const SimulateFlags& flags, std::ostream& out, std::ostream& err) {
  json cfg = load_config(flags.config);
  if (flags.d) cfg["d_ghz"] = *flags.d;
  if (flags.phi_mw) cfg["phi_mw_rad"] = *flags.phi_mw;
  if (flags.gamma) cfg["gamma_ghz"] = *flags.gamma;
  if (flags.depth) {
    cfg.erase("amplitude");
    cfg["depth"] = *flags.depth;
  }
  if (flags.baseline) cfg["baseline"] = *flags.baseline;
  if (flags.out_csv) cfg["output_csv"] = *flags.out_csv;
  if (flags.out_json) cfg["output_json"] = *flags.out_json;

  const SimulateConfig sim = parse_simulate_config(cfg);
  emit_warnings(sim.warnings, err);
  const SpectrumSamples spectrum = synthesize(sim.model, sim.grid);
  const json doc = simulate_document(sim);
  try {
    io::write_spectrum_csv(sim.output_csv, spectrum);
    io::write_text(sim.output_json, dump(doc));
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  const auto m = metrics(sim.model);
  out << fmt::format("wrote {} ({} samples) and {}\n", sim.output_csv, spectrum.size(),
                     sim.output_json);
  out << fmt::format("shift {} GHz, splitting {} GHz, imbalance {}\n", io::format_number(m.shift),
                     io::format_number(m.splitting),
                     m.degenerate ? std::string("undefined (degenerate)")
                                  : io::format_number(m.imbalance));
  return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitFlags {
  std::string config;
  std::optional<std::string> input, out, out_dir, residuals;
  std::optional<double> d, phi_mw;
  bool independent_widths = false;
  unsigned threads = 0;
};

struct FitJob {
  fs::path input;
  fs::path output;
  std::optional<fs::path> residuals;
  SpectrumSamples samples;
  FitResult result;
  std::string error;
};

void write_residuals(const fs::path& path, const SpectrumSamples& s, const FitResult& fit,
                     bool independent) {
  const DualLorentzian model(independent);
  const auto x = model.pack(fit.params);
  std::ostringstream os;
  os << "nu_ghz,pl,model,residual\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double m = model.value(x, s.nu[i]);
    os << io::format_number(s.nu[i]) << ',' << io::format_number(s.pl[i]) << ','
       << io::format_number(m) << ',' << io::format_number(s.pl[i] - m) << '\n';
  }
  io::write_text(path, os.str());
}

int cmd_fit(const FitFlags& flags, std::ostream& out, std::ostream& err) {
  json cfg = load_config(flags.config);
  const std::string ctx = "fit config";
  reject_unknown_keys(cfg,
                      {"input", "output_json", "output_dir", "residuals_csv", "independent_widths",
                       "max_iterations", "d_ghz", "phi_mw_rad", "phase_convention", "threads"},
                      ctx);
  std::string input = flags.input.value_or(cfg.contains("input") ? get_string(cfg, "input", ctx) : "");
  if (input.empty()) throw ConfigError("fit: no input CSV or directory given");
  const double d = flags.d.value_or(opt_number(cfg, "d_ghz", ctx).value_or(kZeroFieldSplittingGHz));
  std::optional<double> phi_mw = flags.phi_mw ? flags.phi_mw : opt_number(cfg, "phi_mw_rad", ctx);
  const PhaseConvention convention = cfg.contains("phase_convention")
                                         ? parse_convention(get_string(cfg, "phase_convention", ctx))
                                         : PhaseConvention::Sum;
  FitOptions options;
  if (cfg.contains("independent_widths")) {
    if (!cfg["independent_widths"].is_boolean()) throw ConfigError("fit config: independent_widths must be boolean");
    options.independent_widths = cfg["independent_widths"].get<bool>();
  }
  if (flags.independent_widths) options.independent_widths = true;
  if (cfg.contains("max_iterations")) {
    const double it = get_number(cfg, "max_iterations", ctx);
    if (it < 1 || it != std::floor(it)) throw ConfigError("fit config: max_iterations must be a positive integer");
    options.max_iterations = static_cast<int>(it);
  }
  unsigned threads = flags.threads;
  if (threads == 0 && cfg.contains("threads")) threads = static_cast<unsigned>(get_number(cfg, "threads", ctx));

  std::optional<std::string> residuals = flags.residuals;
  if (!residuals && cfg.contains("residuals_csv")) residuals = get_string(cfg, "residuals_csv", ctx);

  std::vector<FitJob> jobs;
  const fs::path in_path(input);
  if (fs::is_directory(in_path)) {
    const fs::path out_dir = flags.out_dir.value_or(
        cfg.contains("output_dir") ? get_string(cfg, "output_dir", ctx) : in_path.string());
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
          entry.path().filename().string().find(".residuals.") == std::string::npos) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      FitJob job;
      job.input = f;
      job.output = out_dir / (f.stem().string() + ".fit.json");
      if (residuals) job.residuals = out_dir / (f.stem().string() + ".residuals.csv");
      jobs.push_back(std::move(job));
    }
    if (jobs.empty()) throw ConfigError(fmt::format("fit: no .csv files in {}", input));
  } else {
    FitJob job;
    job.input = in_path;
    const std::string out_name = flags.out.value_or(
        cfg.contains("output_json") ? get_string(cfg, "output_json", ctx)
                                    : (in_path.parent_path() / (in_path.stem().string() + ".fit.json")).string());
    job.output = out_name;
    if (residuals) job.residuals = fs::path(*residuals);
    jobs.push_back(std::move(job));
  }

  // Parse everything first so malformed input fails before any fitting.
  for (auto& job : jobs) {
    try {
      job.samples = io::read_spectrum_csv(job.input);
    } catch (const io::ParseError&) {
      throw;
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        jobs[i].result = fit_dual_lorentzian(jobs[i].samples, std::nullopt, options);
      } catch (const std::exception& e) {
        jobs[i].error = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  int status = kExitOk;
  for (const auto& job : jobs) {
    const std::string name = job.input.filename().string();
    if (!job.error.empty()) {
      err << fmt::format("error: {}: {}\n", name, job.error);
      status = kExitNotConverged;
      continue;
    }
    const json doc = fit_document(job.result, name, d, phi_mw, convention);
    try {
      io::write_text(job.output, dump(doc));
      if (job.residuals) write_residuals(*job.residuals, job.samples, job.result, options.independent_widths);
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
    const auto& p = job.result.params;
    out << fmt::format("{}: nu- {} GHz, nu+ {} GHz, depths {} / {}, gamma {} GHz, {} after {} iterations -> {}\n",
                       name, io::format_number(p.nu_minus), io::format_number(p.nu_plus),
                       io::format_number(p.depth_minus), io::format_number(p.depth_plus),
                       io::format_number(p.gamma),
                       job.result.converged ? "converged" : "NOT converged",
                       job.result.iterations, job.output.string());
    if (job.result.rank_deficient) err << fmt::format("warning: {}: rank-deficient Jacobian at the optimum\n", name);
    if (!job.result.converged) status = kExitNotConverged;
  }
  return status;
}

// ----------------------------------------------------------------- metrics

struct MetricsFlags {
  std::string config;
  std::optional<std::string> input, out;
  std::optional<double> d;
};

int cmd_metrics(const MetricsFlags& flags, std::ostream& out, std::ostream& err) {
  StrainMetrics m;
  std::string source;
  if (flags.input) {
    const json doc = load_json_file(*flags.input);
    m = metrics_from_document(doc, flags.d);
    source = doc.contains("fit") ? "fit" : "model";
  } else if (!flags.config.empty()) {
    json cfg = load_config(flags.config);
    if (flags.d) cfg["d_ghz"] = *flags.d;
    const SimulateConfig sim = parse_simulate_config(cfg);
    emit_warnings(sim.warnings, err);
    m = metrics(sim.model);
    source = "model";
  } else {
    throw ConfigError("metrics: give --input <result.json> or --config <model.json>");
  }
  out << fmt::format("shift      (delta nu) = {} GHz ({} MHz)\n", io::format_number(m.shift),
                     io::format_number(m.shift * 1e3));
  out << fmt::format("splitting  (d nu)     = {} GHz ({} MHz)\n", io::format_number(m.splitting),
                     io::format_number(m.splitting * 1e3));
  if (m.degenerate) {
    out << "imbalance  (I)        = undefined (degenerate dips)\n";
  } else {
    out << fmt::format("imbalance  (I)        = {}\n", io::format_number(m.imbalance));
  }
  if (flags.out) {
    json doc = {{"meta", meta("metrics")},
                {"metrics",
                 {{"shift_ghz", num(m.shift)},
                  {"splitting_ghz", num(m.splitting)},
                  {"imbalance", m.degenerate ? json(nullptr) : num(m.imbalance)},
                  {"degenerate", m.degenerate},
                  {"source", source}}}};
    try {
      io::write_text(*flags.out, dump(doc));
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }
  return kExitOk;
}

// ------------------------------------------------------------ orientations

int cmd_orientations(const std::optional<std::string>& out_path, std::ostream& out) {
  json list = json::array();
  for (const auto& o : standard_orientations()) {
    list.push_back({{"index", o.index},
                    {"theta_deg", num(o.theta_deg)},
                    {"phi_deg", num(o.phi_deg)},
                    {"e_nv", vec_json(o.e_nv)},
                    {"d1", vec_json(o.d1)},
                    {"d2", vec_json(o.d2)}});
  }
  const json doc = {{"meta", meta("orientations")}, {"model", {{"orientations", list}}}};
  if (out_path) {
    try {
      io::write_text(*out_path, dump(doc));
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  } else {
    out << dump(doc);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- fidelity

struct FidelityFlags {
  std::string config;
  std::optional<double> contrast, n_min, n_max;
  std::optional<int> points;
  std::optional<std::string> spacing, out;
};

int cmd_fidelity(const FidelityFlags& flags, std::ostream& out) {
  const json cfg = load_config(flags.config);
  const std::string ctx = "fidelity config";
  reject_unknown_keys(cfg, {"contrast", "n_min", "n_max", "points", "spacing", "output_csv"}, ctx);
  const auto contrast = flags.contrast ? flags.contrast : opt_number(cfg, "contrast", ctx);
  if (!contrast) throw ConfigError("fidelity: contrast is required (the figure's contrasts are not published)");
  if (!(*contrast >= 0.0 && *contrast <= 1.0)) {
    throw ConfigError(fmt::format("fidelity: contrast must lie in [0, 1], got {}", *contrast));
  }
  const double n_min = flags.n_min.value_or(opt_number(cfg, "n_min", ctx).value_or(1.0));
  const double n_max = flags.n_max.value_or(opt_number(cfg, "n_max", ctx).value_or(1000.0));
  const int points = flags.points.value_or(static_cast<int>(opt_number(cfg, "points", ctx).value_or(100.0)));
  const std::string spacing = flags.spacing.value_or(cfg.contains("spacing") ? get_string(cfg, "spacing", ctx) : "log");
  std::vector<double> grid;
  if (spacing == "log") {
    grid = log_grid(n_min, n_max, points);
  } else if (spacing == "linear") {
    if (!(n_min >= 0.0) || !(n_max > n_min) || points < 2) throw ConfigError("fidelity: bad linear range");
    grid = linear_grid(n_min, n_max, static_cast<std::size_t>(points));
  } else {
    throw ConfigError(fmt::format("fidelity: spacing must be 'log' or 'linear', got '{}'", spacing));
  }
  const auto curve = fidelity_curve(*contrast, grid);
  std::ostringstream os;
  io::write_fidelity_csv(os, curve);
  std::optional<std::string> path = flags.out;
  if (!path && cfg.contains("output_csv")) path = get_string(cfg, "output_csv", ctx);
  if (path) {
    try {
      io::write_text(*path, os.str());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  } else {
    out << os.str();
  }
  return kExitOk;
}

}  // namespace

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& context) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", context));
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}'", context, key));
    }
  }
}

SimulateConfig parse_simulate_config(const json& cfg) {
  const std::string ctx = "simulate config";
  reject_unknown_keys(cfg,
                      {"d_ghz", "phi_mw_rad", "gamma_ghz", "depth", "amplitude", "baseline",
                       "phase_convention", "amplitudes", "tensor", "scenario", "nv_orientation",
                       "couplings", "grid", "output_csv", "output_json"},
                      ctx);
  SimulateConfig sim;
  SpectrumModel& model = sim.model;
  model.d = opt_number(cfg, "d_ghz", ctx).value_or(kZeroFieldSplittingGHz);
  model.phi_mw = opt_number(cfg, "phi_mw_rad", ctx).value_or(0.0);
  model.gamma = opt_number(cfg, "gamma_ghz", ctx).value_or(5e-3);
  model.baseline = opt_number(cfg, "baseline", ctx).value_or(1.0);
  if (cfg.contains("phase_convention")) {
    model.convention = parse_convention(get_string(cfg, "phase_convention", ctx));
  }
  if (!(model.gamma > 0.0)) throw ConfigError("simulate config: gamma_ghz must be > 0");
  if (cfg.contains("depth") && cfg.contains("amplitude")) {
    throw ConfigError("simulate config: give either 'depth' or 'amplitude', not both");
  }
  if (cfg.contains("amplitude")) {
    model.a = get_number(cfg, "amplitude", ctx);
  } else {
    model.a = opt_number(cfg, "depth", ctx).value_or(0.2) * model.gamma;
  }

  const int sources = static_cast<int>(cfg.contains("amplitudes")) +
                      static_cast<int>(cfg.contains("tensor")) +
                      static_cast<int>(cfg.contains("scenario"));
  if (sources > 1) {
    throw ConfigError("simulate config: give only one of 'amplitudes', 'tensor', 'scenario'");
  }
  const CouplingConstants couplings =
      cfg.contains("couplings") ? parse_couplings(get_object(cfg, "couplings", ctx)) : default_couplings();
  if (cfg.contains("nv_orientation")) {
    const double idx = get_number(cfg, "nv_orientation", ctx);
    if (idx != std::floor(idx) || idx < 1 || idx > 4) {
      throw ConfigError("simulate config: nv_orientation must be an integer 1..4");
    }
    sim.nv_orientation = static_cast<int>(idx);
  }

  if (cfg.contains("amplitudes")) {
    const auto& a = get_object(cfg, "amplitudes", ctx);
    reject_unknown_keys(a, {"m_z", "m_x", "m_y", "n_x", "n_y"}, "amplitudes");
    model.amps.m_z = opt_number(a, "m_z", "amplitudes").value_or(0.0);
    model.amps.m_x = opt_number(a, "m_x", "amplitudes").value_or(0.0);
    model.amps.m_y = opt_number(a, "m_y", "amplitudes").value_or(0.0);
    model.amps.n_x = opt_number(a, "n_x", "amplitudes").value_or(0.0);
    model.amps.n_y = opt_number(a, "n_y", "amplitudes").value_or(0.0);
    sim.source = "amplitudes";
  } else if (cfg.contains("tensor") || cfg.contains("scenario")) {
    StrainTensor t = cfg.contains("tensor") ? parse_tensor(get_object(cfg, "tensor", ctx))
                                            : parse_scenario(get_object(cfg, "scenario", ctx));
    sim.source = cfg.contains("tensor") ? "tensor" : "scenario";
    sim.tensor = t;
    if (auto w = strain_warning(t)) sim.warnings.push_back(*w);
    if (t.frame == Frame::Lab) {
      if (!sim.nv_orientation) {
        throw ConfigError("simulate config: a lab-frame tensor needs 'nv_orientation' (1..4)");
      }
      t = rotate_to_nv_frame(t, NvFrame::standard(*sim.nv_orientation));
    }
    model.amps = amplitudes_from_tensor(t, couplings);
  }
  if (auto w = amplitude_warning(model.amps)) sim.warnings.push_back(*w);

  double start = model.d - 0.03;
  double stop = model.d + 0.03;
  std::size_t points = 601;
  if (cfg.contains("grid")) {
    const auto& g = get_object(cfg, "grid", ctx);
    reject_unknown_keys(g, {"start_ghz", "stop_ghz", "points"}, "grid");
    start = opt_number(g, "start_ghz", "grid").value_or(start);
    stop = opt_number(g, "stop_ghz", "grid").value_or(stop);
    const double pts = opt_number(g, "points", "grid").value_or(601.0);
    if (pts < 2 || pts != std::floor(pts)) throw ConfigError("grid: points must be an integer >= 2");
    points = static_cast<std::size_t>(pts);
  }
  if (!(stop > start)) throw ConfigError("grid: stop_ghz must exceed start_ghz");
  sim.grid = linear_grid(start, stop, points);

  if (cfg.contains("output_csv")) sim.output_csv = get_string(cfg, "output_csv", ctx);
  if (cfg.contains("output_json")) {
    sim.output_json = get_string(cfg, "output_json", ctx);
  } else {
    sim.output_json = fs::path(sim.output_csv).replace_extension(".json").string();
  }

  try {
    model.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return sim;
}

json simulate_document(const SimulateConfig& sim) {
  const SpectrumModel& m = sim.model;
  const auto freqs = transition_frequencies(m.d, m.amps);
  const auto alpha = model_amplitudes(m);
  const auto fp = params_from_model(m);
  const auto met = metrics(m);
  json model = {{"d_ghz", num(m.d)},
                {"phi_mw_rad", num(m.phi_mw)},
                {"gamma_ghz", num(m.gamma)},
                {"amplitude", num(m.a)},
                {"depth", num(m.peak_depth())},
                {"baseline", num(m.baseline)},
                {"phase_convention", convention_name(m.convention)},
                {"amplitudes", amplitudes_json(m.amps)},
                {"strain_phase_rad", optional_num(strain_phase(m.amps))},
                {"nu_plus_ghz", num(freqs.nu_plus)},
                {"nu_minus_ghz", num(freqs.nu_minus)},
                {"alpha_plus", num(alpha.alpha_plus)},
                {"alpha_minus", num(alpha.alpha_minus)},
                {"depth_plus", num(fp.depth_plus)},
                {"depth_minus", num(fp.depth_minus)},
                {"source", sim.source},
                {"grid",
                 {{"start_ghz", num(sim.grid.front())},
                  {"stop_ghz", num(sim.grid.back())},
                  {"points", sim.grid.size()}}}};
  if (sim.tensor) model["tensor"] = tensor_json(*sim.tensor);
  if (sim.nv_orientation) model["nv_orientation"] = *sim.nv_orientation;
  json doc = {{"meta", meta("simulate")},
              {"model", model},
              {"metrics",
               {{"shift_ghz", num(met.shift)},
                {"splitting_ghz", num(met.splitting)},
                {"imbalance", met.degenerate ? json(nullptr) : num(met.imbalance)},
                {"degenerate", met.degenerate}}}};
  doc["meta"]["warnings"] = sim.warnings;
  return doc;
}

json fit_document(const FitResult& fit, const std::string& input_name, double d,
                  std::optional<double> phi_mw, PhaseConvention convention) {
  const auto& p = fit.params;
  const auto& u = fit.uncertainties;
  json params = {{"nu_plus_ghz", num(p.nu_plus)},   {"nu_minus_ghz", num(p.nu_minus)},
                 {"depth_plus", num(p.depth_plus)}, {"depth_minus", num(p.depth_minus)},
                 {"gamma_ghz", num(p.gamma)},       {"baseline", num(p.baseline)}};
  json unc = {{"nu_plus_ghz", num(u.nu_plus)},   {"nu_minus_ghz", num(u.nu_minus)},
              {"depth_plus", num(u.depth_plus)}, {"depth_minus", num(u.depth_minus)},
              {"gamma_ghz", num(u.gamma)},       {"baseline", num(u.baseline)}};
  if (p.gamma_minus) {
    params["gamma_minus_ghz"] = num(*p.gamma_minus);
    unc["gamma_minus_ghz"] = num(u.width_minus());
  }
  json fit_json = params;
  fit_json["uncertainties"] = unc;
  fit_json["residual_rms"] = num(fit.residual_rms);
  fit_json["iterations"] = fit.iterations;
  fit_json["converged"] = fit.converged;
  fit_json["termination"] = to_string(fit.termination);
  fit_json["rank_deficient"] = fit.rank_deficient;
  fit_json["single_line"] = fit.single_line;
  fit_json["correlation_nu_plus_nu_minus"] =
      num(fit.correlation(DualLorentzian::kNuPlus, DualLorentzian::kNuMinus));

  json metrics_json = nullptr;
  if (fit.converged && p.depth_plus + p.depth_minus > 0.0) {
    const auto est = invert_to_strain(fit, d, phi_mw, convention);
    metrics_json = {{"m_z_hat_ghz", num(est.m_z_hat)},
                    {"m_perp_hat_ghz", num(est.m_perp_hat)},
                    {"imbalance_hat", num(est.imbalance_hat)},
                    {"phase_sum_hat_rad", num(est.phase_sum_hat)},
                    {"ambiguity_flag", est.ambiguous},
                    {"degenerate", est.single_line},
                    {"shift_ghz", num(est.m_z_hat)},
                    {"splitting_ghz", num(2.0 * est.m_perp_hat)}};
    metrics_json["phi_str_hat_rad"] =
        est.phi_str_hat ? json::array({num((*est.phi_str_hat)[0]), num((*est.phi_str_hat)[1])})
                        : json(nullptr);
  }
  json meta_json = meta("fit");
  meta_json["input"] = input_name;
  return {{"meta", meta_json},
          {"model",
           {{"d_ghz", num(d)},
            {"phi_mw_rad", optional_num(phi_mw)},
            {"phase_convention", convention_name(convention)}}},
          {"fit", fit_json},
          {"metrics", metrics_json}};
}

StrainMetrics metrics_from_document(const json& doc, std::optional<double> d_override) {
  if (!doc.is_object()) throw ConfigError("metrics: input must be a JSON object");
  const std::string ctx = "metrics input";
  StrainMetrics m;
  if (doc.contains("fit")) {
    const auto& f = get_object(doc, "fit", ctx);
    for (const char* key : {"nu_plus_ghz", "nu_minus_ghz", "depth_plus", "depth_minus"}) {
      if (!f.contains(key)) throw ConfigError(fmt::format("metrics: fit is missing '{}'", key));
    }
    double d = kZeroFieldSplittingGHz;
    if (doc.contains("model") && doc["model"].is_object() && doc["model"].contains("d_ghz")) {
      d = get_number(doc["model"], "d_ghz", ctx);
    }
    if (d_override) d = *d_override;
    const double nu_p = get_number(f, "nu_plus_ghz", ctx);
    const double nu_m = get_number(f, "nu_minus_ghz", ctx);
    const double dp = get_number(f, "depth_plus", ctx);
    const double dm = get_number(f, "depth_minus", ctx);
    m.shift = 0.5 * (nu_p + nu_m) - d;
    m.splitting = nu_p - nu_m;
    const bool single = f.contains("single_line") && f["single_line"].is_boolean() &&
                        f["single_line"].get<bool>();
    if (dp + dm > 0.0 && !single) {
      m.imbalance = (dp - dm) / (dp + dm);
    } else {
      m.degenerate = true;
    }
    return m;
  }
  if (doc.contains("model")) {
    const auto& mod = get_object(doc, "model", ctx);
    if (!mod.contains("amplitudes")) throw ConfigError("metrics: model is missing 'amplitudes'");
    json cfg = {{"amplitudes", mod["amplitudes"]}};
    for (const char* key : {"d_ghz", "phi_mw_rad", "gamma_ghz", "baseline", "phase_convention"}) {
      if (mod.contains(key)) cfg[key] = mod[key];
    }
    if (mod.contains("amplitude")) cfg["amplitude"] = mod["amplitude"];
    if (d_override) cfg["d_ghz"] = *d_override;
    return metrics(parse_simulate_config(cfg).model);
  }
  throw ConfigError("metrics: input has neither 'fit' nor 'model'");
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-field ODMR strain modelling and fitting for single NV- centers", "nvodmr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateFlags sim;
  auto* sc = app.add_subcommand("simulate", "Synthesize a spectrum from strain and write CSV + JSON sidecar");
  sc->add_option("-c,--config", sim.config, "JSON config");
  sc->add_option("--d", sim.d, "Zero-field splitting (GHz)");
  sc->add_option("--phi-mw", sim.phi_mw, "Microwave field angle (rad)");
  sc->add_option("--gamma", sim.gamma, "Lorentzian HWHM (GHz)");
  sc->add_option("--depth", sim.depth, "Full dip depth a/gamma");
  sc->add_option("--baseline", sim.baseline, "Baseline PL");
  sc->add_option("--out-csv", sim.out_csv, "Spectrum CSV path");
  sc->add_option("--out-json", sim.out_json, "Sidecar JSON path");

  FitFlags fit;
  auto* fc = app.add_subcommand("fit", "Fit a dual-Lorentzian model to a CSV spectrum or a directory of them");
  fc->add_option("input", fit.input, "CSV file or directory");
  fc->add_option("-c,--config", fit.config, "JSON config");
  fc->add_option("-o,--out", fit.out, "Result JSON (single file input)");
  fc->add_option("--out-dir", fit.out_dir, "Output directory (directory input)");
  fc->add_option("--residuals", fit.residuals, "Residuals CSV path (any value enables it for directories)");
  fc->add_option("--d", fit.d, "Zero-field splitting (GHz)");
  fc->add_option("--phi-mw", fit.phi_mw, "Known microwave field angle (rad)");
  fc->add_flag("--independent-widths", fit.independent_widths, "Separate width per dip");
  fc->add_option("--threads", fit.threads, "Worker threads for directory input");

  MetricsFlags met;
  auto* mc = app.add_subcommand("metrics", "Print shift, splitting and imbalance");
  mc->add_option("-i,--input", met.input, "Fit or simulate result JSON");
  mc->add_option("-c,--config", met.config, "Model config JSON");
  mc->add_option("--d", met.d, "Zero-field splitting (GHz)");
  mc->add_option("-o,--out", met.out, "Write metrics JSON here");

  std::optional<std::string> orient_out;
  auto* oc = app.add_subcommand("orientations", "Emit the four NV orientations and their dipoles as JSON");
  oc->add_option("-o,--out", orient_out, "Output JSON path (stdout if omitted)");

  FidelityFlags fid;
  auto* dc = app.add_subcommand("fidelity", "Readout fidelity versus photon number as CSV");
  dc->add_option("-c,--config", fid.config, "JSON config");
  dc->add_option("--contrast", fid.contrast, "Fluorescence contrast in [0, 1]");
  dc->add_option("--n-min", fid.n_min, "Smallest n_avg");
  dc->add_option("--n-max", fid.n_max, "Largest n_avg");
  dc->add_option("--points", fid.points, "Grid points");
  dc->add_option("--spacing", fid.spacing, "log or linear");
  dc->add_option("-o,--out", fid.out, "Output CSV path (stdout if omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sc) return cmd_simulate(sim, out, err);
    if (*fc) return cmd_fit(fit, out, err);
    if (*mc) return cmd_metrics(met, out, err);
    if (*oc) return cmd_orientations(orient_out, out);
    if (*dc) return cmd_fidelity(fid, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const io::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FitError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNotConverged;
  }
  return kExitConfig;
}

}  // namespace nvstrain::cli
