#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <limits>
#include <random>

#include "scenario.hpp"
#include "tdae/elimination.hpp"

namespace tdae::scenario {

namespace {

void print_error(const std::string& kind, const std::string& field, const std::string& message) {
  json e;
  e["error"] = {{"kind", kind}, {"field", field}, {"message", message}};
  std::cerr << e.dump() << '\n';
}

struct Common {
  std::string config;
  std::string out = "out";
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::string area;
  int samples = 0;
  int families = 0;
  int order = 0;
  std::string s_mode;
  bool rwa = false;
  bool no_rwa = false;
  double omega_scale = 0.0;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "scenario JSON");
  if (config_required) opt->required();
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--threads", c.threads, "worker threads for momentum families")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "seed recorded with the run");
  sub->add_option("--area", c.area, "target pulse area, e.g. pi or pi/2");
  sub->add_option("--samples", c.samples, "output sample count");
  sub->add_option("--families", c.families, "momentum families in the Doppler box");
  sub->add_option("--order", c.order, "elimination order");
  sub->add_option("--s-mode", c.s_mode, "closed or quadrature");
  sub->add_flag("--rwa", c.rwa, "use the simplified S coefficients");
  sub->add_flag("--no-rwa", c.no_rwa, "use the full S coefficients");
}

RunOptions options(const Common& c, const std::filesystem::path& base) {
  RunOptions o;
  o.threads = c.threads;
  o.seed = c.seed;
  if (!c.area.empty()) o.area = parse_area(json(c.area), "--area");
  if (c.samples > 0) o.samples = c.samples;
  if (c.families > 0) o.families = c.families;
  if (c.order > 0) o.order = c.order;
  if (!c.s_mode.empty()) o.s_mode = c.s_mode;
  if (c.rwa) o.rwa = true;
  if (c.no_rwa) o.rwa = false;
  if (c.omega_scale > 0.0) o.omega_scale = c.omega_scale;
  o.base_dir = base;
  return o;
}

int run_scenario(const Common& c, const std::string& scenario) {
  json cfg;
  std::filesystem::path base = std::filesystem::current_path();
  if (!c.config.empty()) {
    cfg = load_config(c.config);
    base = std::filesystem::absolute(c.config).parent_path();
    if (!cfg.is_object()) throw ConfigError("config", "expected a JSON object");
    if (!scenario.empty()) {
      if (!cfg.contains("scenario")) cfg["scenario"] = scenario;
      else if (!cfg.at("scenario").is_string()) throw ConfigError("scenario", "expected a string");
      else if (cfg.at("scenario").get<std::string>() != scenario && scenario != "validity")
        throw ConfigError("scenario", "config is for '" + cfg.at("scenario").get<std::string>() + "'");
      if (scenario == "validity") cfg["scenario"] = "validity";
    }
  } else {
    if (scenario.empty()) throw ConfigError("config", "missing");
    cfg = default_config(scenario);
  }
  if (!cfg.contains("scenario")) throw ConfigError("scenario", "missing");
  run_to_directory(cfg, options(c, base), c.out);
  return 0;
}

struct SArgs {
  std::string kind = "box";
  double a0 = 1.0, a1 = 0.0, a2 = 0.0, T = std::numeric_limits<double>::infinity(), t0 = 0.0, t = -1.0;
  std::vector<double> gammas{100.0};
  bool rwa = false;
  int random = 0;
  std::uint64_t seed = 0;
};

PulseShape make_shape(const std::string& kind, double a0, double a1, double a2, double t0, double T) {
  const PulseKind k = pulse_kind_from_string(kind);
  switch (k) {
    case PulseKind::box: return PulseShape::box(a0, t0, T);
    case PulseKind::sine_squared: return PulseShape::sine_squared(a0, t0, T);
    case PulseKind::blackman: return PulseShape::blackman(a0, a1, a2, t0, T);
    case PulseKind::tabulated: break;
  }
  throw ConfigError("--kind", "s-integral supports box, sine_squared and blackman");
}

int s_integral(const SArgs& a) {
  std::printf("# columns: kind,a0,T_s,gamma_rad_s,t_s,closed_re,closed_im,quadrature_re,quadrature_im,abs_diff\n");
  std::printf("kind,a0,T_s,gamma_rad_s,t_s,closed_re,closed_im,quadrature_re,quadrature_im,abs_diff\n");
  auto row = [&](const std::string& kind, double a0, double a1, double a2, double T, double gamma, double t) {
    const PulseShape p = make_shape(kind, a0, a1, a2, a.t0, T);
    const cplx c = a.rwa ? s_rwa(p, p, gamma, t) : s_closed(p, p, gamma, a.t0, t);
    const cplx q = s_quadrature(p, p, gamma, a.t0, t, 1e-13);
    std::printf("%s,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g,%.3e\n", kind.c_str(), a0, T, gamma, t, c.real(),
                c.imag(), q.real(), q.imag(), std::abs(c - q));
  };
  if (a.random > 0) {
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> ua(0.1, 10.0), uT(0.1, 10.0), ug(5.0, 500.0), uf(0.0, 1.0);
    const char* kinds[] = {"box", "sine_squared", "blackman"};
    for (int i = 0; i < a.random; ++i) {
      const std::string k = kinds[i % 3];
      const double a0 = ua(rng), T = uT(rng), g = ug(rng);
      const double t = a.t0 + T * std::max(1e-3, uf(rng));
      row(k, a0, k == "blackman" ? -0.5 * a0 : 0.0, k == "blackman" ? 0.08 * a0 : 0.0, T, g, t);
    }
    return 0;
  }
  const double t = a.t >= 0.0 ? a.t : a.t0 + (std::isfinite(a.T) ? 0.5 * a.T : 1.0);
  for (double g : a.gammas) row(a.kind, a.a0, a.a1, a.a2, a.T, g, t);
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Adiabatic elimination for time-dependent multilevel atoms"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tdae 0.1.0");

  Common run_c, fl_c, rp_c, bp_c, drp_c, dbp_c, val_c;
  auto* run = app.add_subcommand("run", "run the scenario named in the config");
  add_common(run, run_c, true);
  struct Named {
    CLI::App* app;
    Common* c;
    const char* scenario;
  };
  std::vector<Named> named = {
      {app.add_subcommand("five-level-compare", "compare elimination methods on the five-level system"), &fl_c,
       "five_level_compare"},
      {app.add_subcommand("raman-pulse", "velocity-selective Raman pulse"), &rp_c, "raman_pulse"},
      {app.add_subcommand("bragg-pulse", "Bragg pulse"), &bp_c, "bragg_pulse"},
      {app.add_subcommand("double-raman-pulse", "double Raman pulse"), &drp_c, "double_raman_pulse"},
      {app.add_subcommand("double-bragg-pulse", "double Bragg pulse"), &dbp_c, "double_bragg_pulse"},
      {app.add_subcommand("validity", "validity report only"), &val_c, "validity"},
  };
  for (auto& n : named) add_common(n.app, *n.c, false);
  named.back().app->add_option("--omega-scale", val_c.omega_scale, "scale factor on the five-level couplings");

  SArgs sa;
  auto* si = app.add_subcommand("s-integral", "closed vs quadrature S coefficients");
  si->add_option("--kind", sa.kind, "box, sine_squared or blackman");
  si->add_option("--a0", sa.a0);
  si->add_option("--a1", sa.a1);
  si->add_option("--a2", sa.a2);
  si->add_option("--T", sa.T, "pulse length, s (box default: unbounded)");
  si->add_option("--t0", sa.t0, "pulse start, s");
  si->add_option("--t", sa.t, "evaluation time, s (default mid-pulse, or t0 + 1 for an unbounded box)");
  si->add_option("--gamma", sa.gammas, "detunings, rad/s")->expected(1, -1);
  si->add_flag("--rwa", sa.rwa);
  si->add_option("--random", sa.random, "randomized cases instead of a sweep");
  si->add_option("--seed", sa.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("config", "argv", e.what());
    return 2;
  }

  try {
    if (run->parsed()) return run_scenario(run_c, "");
    if (si->parsed()) return s_integral(sa);
    for (auto& n : named)
      if (n.app->parsed()) {
        std::string sc = n.scenario;
        // validity without a config runs the five-level system
        return run_scenario(*n.c, sc);
      }
  } catch (const ConfigError& e) {
    print_error("config", e.field, e.what());
    return 2;
  } catch (const Error& e) {
    print_error(to_string(e.kind()), "", e.what());
    return e.kind() == ErrorKind::io ? 2 : 3;
  } catch (const std::exception& e) {
    print_error("internal", "", e.what());
    return 3;
  }
  return 2;
}

}  // namespace tdae::scenario
