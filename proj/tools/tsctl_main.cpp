#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tsctl/experiments.hpp"
#include "tsctl/jsonio.hpp"
#include "tsctl/svg.hpp"

using namespace tsctl;
using nlohmann::json;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Collects artifacts for one run and finishes with the manifest next to them.
struct Artifacts {
  std::string dir;
  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, double> timings;

  void write(const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/" + name, content);
    outputs.push_back(name);
    std::cout << "wrote " << dir << "/" << name << "\n";
  }
  void finish() {
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/manifest.json",
                    dump_json(manifest_json(command, inputs, outputs, timings)));
  }
};

std::string join_command(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    const std::string arg = argv[i];
    if (arg.find_first_of(" \t\"") == std::string::npos) {
      out += arg;
    } else {
      out += '"';
      for (char c : arg) {
        if (c == '"') out += '\\';
        out += c;
      }
      out += '"';
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError(what + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ParseError(what + " is empty");
  return out;
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

// Applies one `--set key=value` override. Dotted keys walk existing objects;
// a bare key that is not top-level falls through to params, then synthesis.
void apply_override(json& j, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ParseError("--set expects key=value, got '" + spec + "'");
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings (mode names, expressions) pass through
  }

  std::vector<std::string> path;
  std::stringstream ss(key);
  std::string seg;
  while (std::getline(ss, seg, '.')) path.push_back(seg);
  if (path.empty()) throw ParseError("--set key is empty");

  if (path.size() == 1) {
    const std::string& name = path[0];
    if (j.contains(name)) {
      j[name] = value;
      return;
    }
    for (const char* section : {"params", "synthesis"}) {
      if (j.contains(section) && j[section].is_object() && j[section].contains(name)) {
        j[section][name] = value;
        return;
      }
    }
    throw ParseError("--set " + name + ": no such key in the model file");
  }
  json* cur = &j;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!cur->is_object() || !cur->contains(path[i]))
      throw ParseError("--set " + key + ": '" + path[i] + "' is not in the model file");
    cur = &(*cur)[path[i]];
  }
  if (!cur->is_object()) throw ParseError("--set " + key + ": parent is not an object");
  (*cur)[path.back()] = value;
}

json load_model_json(const std::string& path, const std::vector<std::string>& overrides,
                     Artifacts& art) {
  art.inputs.push_back(path);
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  for (const std::string& spec : overrides) apply_override(j, spec);
  return j;
}

SynthesisConfig config_of(const json& mj, const TsModel& mdl, const std::string& mode_flag) {
  SynthesisConfig cfg;
  if (mj.contains("synthesis")) cfg = parse_config(mj.at("synthesis"), mdl.r);
  if (!mode_flag.empty()) cfg.mode = parse_mode(mode_flag);
  return cfg;
}

json load_certificate_json(const std::string& path, Artifacts& art) {
  art.inputs.push_back(path);
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

json outcome_diagnostics(SolveStatus status, const std::string& message, int condition_count,
                         const std::vector<std::pair<std::string, double>>& block_margins) {
  json d;
  d["status"] = to_string(status);
  d["message"] = message;
  d["condition_count"] = condition_count;
  json margins = json::object();
  for (const auto& [name, margin] : block_margins) margins[name] = margin;
  d["block_margins"] = std::move(margins);
  return d;
}

json verification_json(const CertificateCheck& chk) {
  json v;
  v["ok"] = chk.ok;
  v["samples"] = chk.samples;
  v["worst_stability_eigenvalue"] = chk.worst_stability;
  v["worst_lyapunov_eigenvalue"] = chk.worst_lyapunov;
  v["failures"] = chk.failures;
  return v;
}

void report_check(const CertificateCheck& chk) {
  std::cout << "verification: " << (chk.ok ? "ok" : "FAILED") << " over " << chk.samples
            << " samples (worst stability eigenvalue " << chk.worst_stability
            << ", worst Lyapunov eigenvalue " << chk.worst_lyapunov << ")\n";
  for (const std::string& f : chk.failures) std::cerr << "  " << f << "\n";
}

// ---------------------------------------------------------------- vertices

int cmd_vertices(const std::string& model_path, const std::string& phi_flag, int rules,
                 const std::vector<std::string>& overrides, Artifacts& art) {
  DerivativePolytope poly;
  if (!phi_flag.empty()) {
    std::vector<double> values = parse_double_list(phi_flag, "--phi");
    const int r = rules;
    Vec lo(r), hi(r);
    if (values.size() == 2 && values[0] < 0.0 && values[1] > 0.0) {
      lo.setConstant(values[0]);
      hi.setConstant(values[1]);
    } else if (static_cast<int>(values.size()) == r &&
               std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; })) {
      hi = to_vec(values);
      lo = -hi;
    } else if (static_cast<int>(values.size()) == 2 * r) {
      for (int i = 0; i < r; ++i) {
        lo[i] = values[static_cast<std::size_t>(2 * i)];
        hi[i] = values[static_cast<std::size_t>(2 * i + 1)];
      }
    } else {
      throw ParseError(
          "--phi expects lower,upper (spanning zero), one positive cap per rule, or "
          "per-rule lower,upper pairs");
    }
    poly = enumerate_vertices(lo, hi);
  } else if (!model_path.empty()) {
    json mj = load_model_json(model_path, overrides, art);
    TsModel mdl = parse_model(mj);
    SynthesisConfig cfg = config_of(mj, mdl, "");
    if (cfg.phi_lower.size() == 0)
      throw ParseError("model file carries no rate bounds (synthesis.phi or phi_lower/upper)");
    poly = enumerate_vertices(cfg.phi_lower, cfg.phi_upper);
  } else {
    throw ParseError("vertices needs --phi bounds or a model file");
  }

  const std::string csv = vertices_csv(poly);
  std::cout << csv;
  art.write("vertices.csv", csv);
  return 0;
}

// ------------------------------------------------------------------- synth

int cmd_synth(const std::string& model_path, const std::string& mode_flag,
              const std::vector<std::string>& overrides, std::uint64_t seed, Artifacts& art) {
  json mj = load_model_json(model_path, overrides, art);
  TsModel mdl = parse_model(mj);
  SynthesisConfig cfg = config_of(mj, mdl, mode_flag);

  try {
    auto t0 = std::chrono::steady_clock::now();
    SynthesisOutcome out = synthesize_global(mdl, cfg);
    art.timings["synthesize"] = seconds_since(t0);
    std::cout << "status: " << to_string(out.status) << " (" << out.condition_count
              << " matrix conditions)\n";
    if (!out.message.empty()) std::cout << out.message << "\n";
    if (!out.certificate) return 1;

    t0 = std::chrono::steady_clock::now();
    CertificateCheck chk = verify_certificate(mdl, *out.certificate, 200, seed);
    art.timings["verify"] = seconds_since(t0);
    report_check(chk);

    json cj = certificate_json(*out.certificate);
    cj["diagnostics"] =
        outcome_diagnostics(out.status, out.message, out.condition_count, out.block_margins);
    cj["verification"] = verification_json(chk);
    art.write("certificate.json", dump_json(cj));
    return chk.ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ------------------------------------------------------------- synth-local

int synth_local_branch(const TsModel& mdl, const SynthesisConfig& cfg, std::uint64_t seed,
                       const std::string& artifact_name, Artifacts& art) {
  SynthesisOutcome dummy;
  auto t0 = std::chrono::steady_clock::now();
  LocalOutcome out = synthesize_local(mdl, cfg);
  art.timings["synthesize_" + artifact_name] = seconds_since(t0);
  std::cout << "[" << artifact_name << "] status: " << to_string(out.status) << " ("
            << out.condition_count << " matrix conditions)\n";
  if (!out.message.empty()) std::cout << "[" << artifact_name << "] " << out.message << "\n";
  if (!out.certificate) return 1;
  std::cout << "[" << artifact_name << "] enlargement logdet: " << out.logdet_H << "\n";

  CertificateCheck chk = verify_certificate(mdl, *out.certificate, 200, seed);
  report_check(chk);
  const double boundary_level = enlargement_boundary_level(*out.certificate);
  std::cout << "enlargement boundary level: " << boundary_level << " (want <= 1)\n";

  json cj = certificate_json(*out.certificate);
  cj["diagnostics"] =
      outcome_diagnostics(out.status, out.message, out.condition_count, out.block_margins);
  cj["diagnostics"]["logdet_enlargement"] = out.logdet_H;
  cj["verification"] = verification_json(chk);
  cj["verification"]["enlargement_boundary_level"] = boundary_level;
  art.write(artifact_name + ".json", dump_json(cj));
  return (chk.ok && boundary_level <= 1.0 + 1e-6) ? 0 : 1;
}

int cmd_synth_local(const std::string& model_path, const std::string& mode_flag, bool baseline,
                    const std::vector<std::string>& overrides, std::uint64_t seed,
                    Artifacts& art) {
  json mj = load_model_json(model_path, overrides, art);
  TsModel mdl = parse_model(mj);
  SynthesisConfig cfg = config_of(mj, mdl, mode_flag);

  try {
    int rc = synth_local_branch(mdl, cfg, seed, "certificate", art);
    if (baseline) {
      const int rc_b =
          synth_local_branch(mdl, comparison_baseline(cfg), seed, "certificate_baseline", art);
      rc = std::max(rc, rc_b);
    }
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& model_path, const std::string& cert_path,
                 const std::string& x0_flag, double t_end, double dt,
                 const std::vector<std::string>& overrides, Artifacts& art) {
  json mj = load_model_json(model_path, overrides, art);
  TsModel mdl = parse_model(mj);
  json cj = load_certificate_json(cert_path, art);
  const bool is_local = certificate_is_local(cj);
  LocalCertificate cert = local_certificate_from_json(cj);
  Vec x0 = to_vec(parse_double_list(x0_flag, "--x0"));
  if (x0.size() != mdl.n)
    throw DimensionError("--x0 has " + std::to_string(x0.size()) + " entries, model has " +
                         std::to_string(mdl.n) + " states");

  try {
    auto t0 = std::chrono::steady_clock::now();
    Trajectory traj = integrate(mdl, cert, x0, t_end, dt);
    art.timings["simulate"] = seconds_since(t0);
    std::cout << "integrated " << traj.size() << " samples to t=" << traj.stop_time << "\n";
    if (traj.left_region) std::cout << "note: trajectory left the validated state box\n";
    if (traj.ill_conditioned)
      std::cout << "note: rate relation became ill-conditioned along the way\n";
    art.write("trajectory.csv", trajectory_csv(traj));

    if (is_local && cert.phi.size() == mdl.r && cert.mu.size() == mdl.r) {
      BoundsReport report = monitor_bounds(mdl, cert, traj);
      std::cout << "bound monitor: " << (report.ok ? "ok" : "VIOLATIONS") << " ("
                << report.samples_inside << " samples inside the sublevel set, worst rate margin "
                << report.worst_rate_margin << ", worst well-posedness margin "
                << report.worst_wellposed_margin << ")\n";
      for (const std::string& v : report.violations) std::cerr << "  " << v << "\n";
      if (!report.ok) return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// --------------------------------------------------------------------- doa

void overlay_doa(SvgPlot& plot, const DoaEstimate& doa, const std::string& color, bool fill) {
  std::size_t longest = 0;
  for (std::size_t l = 0; l < doa.boundary.size(); ++l)
    if (doa.boundary[l].size() > doa.boundary[longest].size()) longest = l;
  if (fill && !doa.boundary.empty())
    plot.fill_region(doa.boundary[longest], color, 0.18);
  for (const auto& loop : doa.boundary) plot.polyline(loop, color, 2.0, true);
}

void overlay_field(SvgPlot& plot, const TsModel& mdl, const GlobalCertificate& cert) {
  const Vec& xb = mdl.state_bounds;
  const int grid = 13;
  const double len = 2.0 * std::min(xb[0], xb[1]) / grid * 0.38;
  for (int iy = 0; iy < grid; ++iy)
    for (int ix = 0; ix < grid; ++ix) {
      Vec x(2);
      x[0] = -xb[0] + (ix + 0.5) * 2.0 * xb[0] / grid;
      x[1] = -xb[1] + (iy + 0.5) * 2.0 * xb[1] / grid;
      try {
        RateResolution rr = resolve_hdot(mdl, cert, x);
        const double norm = rr.xdot.norm();
        if (norm < 1e-9) continue;
        plot.arrow(x[0], x[1], len * rr.xdot[0] / norm, len * rr.xdot[1] / norm, "#b0b0b0");
      } catch (const IllPosedError&) {
        // direction field is decorative; skip singular spots
      }
    }
}

int cmd_doa(const std::string& model_path, const std::string& cert_path,
            const std::string& baseline_cert_path, int resolution, int starts, double t_end,
            double dt, const std::vector<std::string>& overrides, Artifacts& art) {
  json mj = load_model_json(model_path, overrides, art);
  TsModel mdl = parse_model(mj);
  LocalCertificate cert = local_certificate_from_json(load_certificate_json(cert_path, art));

  try {
    auto t0 = std::chrono::steady_clock::now();
    DoaEstimate doa = estimate_doa(mdl, cert, resolution);
    art.timings["estimate_doa"] = seconds_since(t0);
    std::cout << "estimated area " << doa.area << " at resolution " << resolution << "\n";
    art.write("mask.csv", mask_csv(doa));
    art.write("boundary.csv", boundary_csv(doa));

    json area = doa_json(doa);
    std::optional<DoaEstimate> doa_base;
    if (!baseline_cert_path.empty()) {
      LocalCertificate base =
          local_certificate_from_json(load_certificate_json(baseline_cert_path, art));
      doa_base = estimate_doa(mdl, base, resolution);
      json both;
      both["proposed"] = area;
      both["baseline"] = doa_json(*doa_base);
      if (doa_base->area > 0.0) both["ratio"] = doa.area / doa_base->area;
      area = std::move(both);
    }
    art.write("area.json", dump_json(area));

    if (mdl.n == 2) {
      SvgPlot plot(-mdl.state_bounds[0], mdl.state_bounds[0], -mdl.state_bounds[1],
                   mdl.state_bounds[1]);
      plot.axes("x1", "x2");
      overlay_field(plot, mdl, cert);
      overlay_doa(plot, doa, "#1f77b4", true);
      plot.legend(0, "square", "#1f77b4", "attraction-domain estimate");
      int slot = 1;
      if (doa_base) {
        overlay_doa(plot, *doa_base, "#d62728", false);
        plot.legend(slot++, "square", "#d62728", "baseline estimate");
      }
      if (starts > 0 && !doa.boundary.empty()) {
        std::vector<Vec> x0s = boundary_starts(mdl, cert, doa, starts);
        for (const Vec& x0 : x0s) {
          Trajectory traj = integrate(mdl, cert, x0, t_end, dt);
          plot.polyline(traj.x, "#2ca02c", 1.2);
          plot.marker(x0[0], x0[1], "circle", "#2ca02c", 3.0);
        }
        plot.legend(slot++, "circle", "#2ca02c", "boundary-start trajectories");
      }
      art.write("overlay.svg", plot.str());
    } else {
      std::cout << "note: overlay plot is produced for two-state models only\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ------------------------------------------------------------------- sweep

int cmd_sweep(const std::string& model_path, const std::string& grid_flag,
              const std::vector<std::string>& mode_flags,
              const std::vector<std::string>& overrides, int workers, std::uint64_t seed,
              Artifacts& art) {
  SweepSpec spec = default_sweep_spec();
  spec.workers = workers;
  spec.seed = seed;

  if (!grid_flag.empty()) {
    const std::size_t x = grid_flag.find('x');
    int na = 0, nb = 0;
    try {
      if (x == std::string::npos) throw std::invalid_argument(grid_flag);
      na = std::stoi(grid_flag.substr(0, x));
      nb = std::stoi(grid_flag.substr(x + 1));
    } catch (const std::exception&) {
      throw ParseError("--grid expects NxM, got '" + grid_flag + "'");
    }
    if (na < 1 || nb < 1) throw ParseError("--grid counts must be at least 1");
    const double a_lo = spec.a_values.front(), a_hi = spec.a_values.back();
    const double b_lo = spec.b_values.front(), b_hi = spec.b_values.back();
    spec.a_values.clear();
    spec.b_values.clear();
    for (int i = 0; i < na; ++i)
      spec.a_values.push_back(na == 1 ? a_lo : a_lo + (a_hi - a_lo) * i / (na - 1));
    for (int i = 0; i < nb; ++i)
      spec.b_values.push_back(nb == 1 ? b_lo : b_lo + (b_hi - b_lo) * i / (nb - 1));
  }
  if (!mode_flags.empty()) {
    spec.modes.clear();
    for (const std::string& m : mode_flags) spec.modes.push_back(parse_mode(m));
  }
  if (!model_path.empty()) {
    json tj = load_model_json(model_path, overrides, art);
    if (!tj.contains("params") || !tj["params"].contains("a") || !tj["params"].contains("b"))
      throw ParseError("sweep template needs params.a and params.b");
    TsModel probe = parse_model(tj);
    spec.config = config_of(tj, probe, "");
    spec.make_model = [tj](double a, double b) {
      json cell = tj;
      cell["params"]["a"] = a;
      cell["params"]["b"] = b;
      return parse_model(cell);
    };
  }

  try {
    auto t0 = std::chrono::steady_clock::now();
    SweepResult result = run_sweep(spec);
    art.timings["sweep"] = seconds_since(t0);
    for (SynthesisMode mode : spec.modes)
      std::cout << to_string(mode) << ": " << result.feasible_count(mode) << " / "
                << spec.a_values.size() * spec.b_values.size() << " grid points feasible\n";
    art.write("sweep.csv", sweep_csv(result));

    const double a_pad = 0.5, b_pad = 0.06;
    SvgPlot plot(result.a_values.front() - a_pad, result.a_values.back() + a_pad,
                 result.b_values.front() - b_pad, result.b_values.back() + b_pad);
    plot.axes("a", "b");
    const char* shapes[] = {"circle", "square", "cross"};
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
    const double sizes[] = {5.5, 3.2, 2.4};
    for (std::size_t im = 0; im < result.modes.size(); ++im) {
      const std::size_t style = std::min<std::size_t>(im, 2);
      for (std::size_t ia = 0; ia < result.a_values.size(); ++ia)
        for (std::size_t ib = 0; ib < result.b_values.size(); ++ib)
          if (result.at(ia, ib, im).feasible)
            plot.marker(result.a_values[ia], result.b_values[ib], shapes[style], colors[style],
                        sizes[style]);
      plot.legend(static_cast<int>(im), shapes[style], colors[style],
                  to_string(result.modes[im]) + " feasible");
    }
    art.write("sweep.svg", plot.str());
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ------------------------------------------------------------- doa-compare

int cmd_doa_compare(const std::string& model_path, int resolution, int starts, double t_end,
                    double dt, const std::vector<std::string>& overrides, Artifacts& art) {
  json mj = load_model_json(model_path, overrides, art);
  TsModel mdl = parse_model(mj);

  DoaComparisonSpec spec;
  spec.proposed = config_of(mj, mdl, "");
  spec.baseline = comparison_baseline(spec.proposed);
  spec.resolution = resolution;
  spec.monitor_starts = starts;
  spec.t_end = t_end;
  spec.dt = dt;

  try {
    auto t0 = std::chrono::steady_clock::now();
    DoaComparison cmp = run_doa_comparison(mdl, spec);
    art.timings["comparison"] = seconds_since(t0);
    std::cout << "with rate feedback: area " << cmp.doa_proposed.area << "\n";
    std::cout << "baseline:           area " << cmp.doa_baseline.area << "\n";
    if (cmp.ratio > 0.0) std::cout << "area ratio: " << cmp.ratio << "\n";
    for (const std::string& note : cmp.notes) std::cerr << "  " << note << "\n";
    art.write("comparison.json", dump_json(comparison_json(cmp)));

    if (mdl.n == 2 && mdl.has_state_bounds()) {
      SvgPlot plot(-mdl.state_bounds[0], mdl.state_bounds[0], -mdl.state_bounds[1],
                   mdl.state_bounds[1]);
      plot.axes("x1", "x2");
      overlay_doa(plot, cmp.doa_proposed, "#1f77b4", true);
      overlay_doa(plot, cmp.doa_baseline, "#d62728", false);
      plot.legend(0, "square", "#1f77b4",
                  "with rate feedback (area " + format_double(cmp.doa_proposed.area) + ")");
      plot.legend(1, "square", "#d62728",
                  "baseline (area " + format_double(cmp.doa_baseline.area) + ")");
      art.write("doa_compare.svg", plot.str());
    }
    return cmp.ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ------------------------------------------------------------------ verify

int cmd_verify(const std::string& model_path, const std::string& cert_path, int samples,
               std::uint64_t seed, const std::vector<std::string>& overrides, Artifacts& art) {
  json mj = load_model_json(model_path, overrides, art);
  TsModel mdl = parse_model(mj);
  json cj = load_certificate_json(cert_path, art);
  if (!cj.contains("R") || !cj.contains("T"))
    throw ParseError(
        "certificate carries no decision values (R, T); replay certificates hold gains only "
        "and cannot be re-verified against the synthesis conditions");
  const bool is_local = certificate_is_local(cj);
  LocalCertificate cert = local_certificate_from_json(cj);

  try {
    auto t0 = std::chrono::steady_clock::now();
    CertificateCheck chk = verify_certificate(mdl, cert, samples, seed);
    art.timings["verify"] = seconds_since(t0);
    report_check(chk);
    bool ok = chk.ok;
    if (is_local && cert.H_enl.size() > 0) {
      const double level = enlargement_boundary_level(cert);
      std::cout << "enlargement boundary level: " << level << " (want <= 1)\n";
      ok = ok && level <= 1.0 + 1e-6;
    }
    json report = verification_json(chk);
    art.write("verification.json", dump_json(report));
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// Joins `--flag -1,2` into `--flag=-1,2` so vector values with a leading
// minus survive flag tokenization.
std::vector<std::string> preprocess_args(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if ((arg == "--phi" || arg == "--x0") && i + 1 < argc && argv[i + 1][0] == '-' &&
        (std::isdigit(static_cast<unsigned char>(argv[i + 1][1])) || argv[i + 1][1] == '.')) {
      args.push_back(arg + "=" + argv[++i]);
    } else {
      args.push_back(std::move(arg));
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesis and verification toolkit for rate-aware fuzzy state feedback"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  std::string out_dir = "out";
  app.add_option("--out", out_dir, "output directory for artifacts")->capture_default_str();

  Artifacts art;
  art.command = join_command(argc, argv);

  std::string model_path, cert_path, baseline_cert_path, mode_flag, phi_flag, x0_flag, grid_flag;
  std::vector<std::string> overrides, mode_flags;
  int rules = 2, resolution = 201, starts = 4, samples = 200, workers = 0;
  double t_end = 10.0, dt = 1e-3;
  std::uint64_t seed = 0;
  bool baseline = false;
  int rc = 0;

  CLI::App* vertices = app.add_subcommand("vertices", "print the admissible rate-vertex matrix");
  vertices->add_option("model", model_path, "model file supplying the rate bounds");
  vertices->add_option("--phi", phi_flag, "rate bounds: lower,upper | per-rule caps | pairs");
  vertices->add_option("--rules", rules, "rule count used with --phi")->capture_default_str();
  vertices->add_option("--set", overrides, "override model keys (key=value)");
  vertices->callback([&] {
    art.dir = out_dir;
    rc = cmd_vertices(model_path, phi_flag, rules, overrides, art);
  });

  CLI::App* synth = app.add_subcommand("synth", "global stability synthesis");
  synth->add_option("model", model_path, "model file")->required();
  synth->add_option("--mode", mode_flag, "proposed | traditional-pdc | quadratic");
  synth->add_option("--set", overrides, "override model keys (key=value)");
  synth->add_option("--seed", seed, "verification sampling offset");
  synth->callback([&] {
    art.dir = out_dir;
    rc = cmd_synth(model_path, mode_flag, overrides, seed, art);
  });

  CLI::App* local = app.add_subcommand("synth-local", "region-constrained synthesis");
  local->add_option("model", model_path, "model file")->required();
  local->add_option("--mode", mode_flag, "proposed | traditional-pdc | quadratic");
  local->add_flag("--baseline", baseline, "also synthesize the no-rate-feedback baseline");
  local->add_option("--set", overrides, "override model keys (key=value)");
  local->add_option("--seed", seed, "verification sampling offset");
  local->callback([&] {
    art.dir = out_dir;
    rc = cmd_synth_local(model_path, mode_flag, baseline, overrides, seed, art);
  });

  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop trajectory from a certificate");
  simulate->add_option("model", model_path, "model file")->required();
  simulate->add_option("--cert", cert_path, "certificate file")->required();
  simulate->add_option("--x0", x0_flag, "initial state, comma separated")->required();
  simulate->add_option("--t-end", t_end, "horizon in seconds")->capture_default_str();
  simulate->add_option("--dt", dt, "integration step")->capture_default_str();
  simulate->add_option("--set", overrides, "override model keys (key=value)");
  simulate->callback([&] {
    art.dir = out_dir;
    rc = cmd_simulate(model_path, cert_path, x0_flag, t_end, dt, overrides, art);
  });

  CLI::App* doa = app.add_subcommand("doa", "attraction-domain estimate and overlay plot");
  doa->add_option("model", model_path, "model file")->required();
  doa->add_option("--cert", cert_path, "certificate file")->required();
  doa->add_option("--baseline-cert", baseline_cert_path, "second certificate to overlay");
  doa->add_option("--resolution", resolution, "grid cells per axis")->capture_default_str();
  doa->add_option("--starts", starts, "boundary trajectories drawn")->capture_default_str();
  doa->add_option("--t-end", t_end, "trajectory horizon")->capture_default_str();
  doa->add_option("--dt", dt, "integration step")->capture_default_str();
  doa->add_option("--set", overrides, "override model keys (key=value)");
  doa->callback([&] {
    art.dir = out_dir;
    rc = cmd_doa(model_path, cert_path, baseline_cert_path, resolution, starts, t_end, dt,
                 overrides, art);
  });

  CLI::App* sweep = app.add_subcommand("sweep", "parametric feasibility sweep");
  sweep->add_option("model", model_path, "template model file with params a and b");
  sweep->add_option("--grid", grid_flag, "grid size NxM over the benchmark rectangle");
  sweep->add_option("--mode", mode_flags, "modes to sweep (repeatable)");
  sweep->add_option("--workers", workers, "worker threads (0 = auto)")->capture_default_str();
  sweep->add_option("--seed", seed, "verification sampling offset");
  sweep->add_option("--set", overrides, "override model keys (key=value)");
  sweep->callback([&] {
    art.dir = out_dir;
    rc = cmd_sweep(model_path, grid_flag, mode_flags, overrides, workers, seed, art);
  });

  CLI::App* compare = app.add_subcommand("doa-compare", "rate-feedback vs baseline comparison");
  compare->add_option("model", model_path, "model file")->required();
  compare->add_option("--resolution", resolution, "grid cells per axis")->capture_default_str();
  compare->add_option("--starts", starts, "monitored boundary replays")->capture_default_str();
  compare->add_option("--t-end", t_end, "replay horizon")->capture_default_str();
  compare->add_option("--dt", dt, "integration step")->capture_default_str();
  compare->add_option("--set", overrides, "override model keys (key=value)");
  compare->callback([&] {
    art.dir = out_dir;
    rc = cmd_doa_compare(model_path, resolution, starts, t_end, dt, overrides, art);
  });

  CLI::App* verify = app.add_subcommand("verify", "re-check a synthesized certificate");
  verify->add_option("model", model_path, "model file")->required();
  verify->add_option("--cert", cert_path, "certificate file")->required();
  verify->add_option("--samples", samples, "verification sample count")->capture_default_str();
  verify->add_option("--seed", seed, "verification sampling offset");
  verify->add_option("--set", overrides, "override model keys (key=value)");
  verify->callback([&] {
    art.dir = out_dir;
    rc = cmd_verify(model_path, cert_path, samples, seed, overrides, art);
  });

  const auto t_start = std::chrono::steady_clock::now();
  try {
    std::vector<std::string> args = preprocess_args(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes back-to-front
    app.parse(std::move(args));
    art.dir = out_dir;  // callbacks set this too; keep it for the manifest below
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help exits clean, usage problems exit 2
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  art.timings["total"] = seconds_since(t_start);
  try {
    art.finish();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rc == 0 ? 1 : rc;
  }
  return rc;
}
