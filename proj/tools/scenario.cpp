#include "scenario.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "tdae/error.hpp"

namespace tdae::scenario {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

const char* kRb87D2 = R"preset({
  "label": "87Rb D2",
  "mass_kg": 1.44316060e-25,
  "levels": {
    "g": 0.0,
    "e": 42943577360.06965,
    "a": 2414191334582973.5
  },
  "quoted": {
    "omega1_rad_s": 247982622728567.9,
    "delta_omega_rad_s": 42943587360.18467,
    "recoil_rad_s": 10000.0
  },
  "provenance": {
    "mass_kg": "87Rb atomic mass, Steck, Rubidium 87 D Line Data",
    "levels.g": "5S1/2 F=1, energy reference",
    "levels.e": "5S1/2 F=2, 2*pi * 6.834682610904290 GHz ground-state hyperfine splitting (Steck)",
    "levels.a": "5P3/2, 2*pi * 384.2304844685 THz D2 transition frequency (Steck)",
    "quoted.omega1_rad_s": "laser frequency quoted as 247.9826227285679 THz, read as rad/s",
    "quoted.delta_omega_rad_s": "laser frequency difference quoted as 42943.58736018467 MHz, read as rad/s",
    "quoted.recoil_rad_s": "recoil frequency quoted as 10^4"
  }
})preset";

const json& at(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + key, "missing");
  return j.at(key);
}

double num(const json& j, const std::string& key, const std::string& path) {
  const json& v = at(j, key, path);
  if (!v.is_number()) throw ConfigError(path + key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path + key, "not finite");
  return x;
}

double num_or(const json& j, const std::string& key, const std::string& path, double dflt) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  return num(j, key, path);
}

std::string str(const json& j, const std::string& key, const std::string& path) {
  const json& v = at(j, key, path);
  if (!v.is_string()) throw ConfigError(path + key, "expected a string");
  return v.get<std::string>();
}

std::string str_or(const json& j, const std::string& key, const std::string& path, const std::string& dflt) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  return str(j, key, path);
}

int int_or(const json& j, const std::string& key, const std::string& path, int dflt) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(path + key, "expected an integer");
  return v.get<int>();
}

bool bool_or(const json& j, const std::string& key, const std::string& path, bool dflt) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(path + key, "expected true or false");
  return v.get<bool>();
}

const json& obj_or_empty(const json& j, const std::string& key, const std::string& path) {
  static const json empty = json::object();
  if (!j.is_object() || !j.contains(key)) return empty;
  const json& v = j.at(key);
  if (!v.is_object()) throw ConfigError(path + key, "expected an object");
  return v;
}

// <name>_rad_s, or <name>_hz converted with 2 pi
double frequency(const json& j, const std::string& name, const std::string& path) {
  if (j.contains(name + "_rad_s")) return num(j, name + "_rad_s", path);
  if (j.contains(name + "_hz")) return 2.0 * pi * num(j, name + "_hz", path);
  throw ConfigError(path + name + "_rad_s", "missing (give " + name + "_rad_s or " + name + "_hz)");
}

std::optional<double> frequency_opt(const json& j, const std::string& name, const std::string& path) {
  if (!j.contains(name + "_rad_s") && !j.contains(name + "_hz")) return std::nullopt;
  return frequency(j, name, path);
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  if (n <= 1) return {b};
  for (int i = 0; i < n; ++i) v.push_back(i == n - 1 ? b : a + (b - a) * i / (n - 1));
  return v;
}

IntegratorConfig parse_integrator(const json& cfg, const RunOptions& opt) {
  const json& j = obj_or_empty(cfg, "integrator", "");
  IntegratorConfig ic;
  ic.rtol = num_or(j, "rtol", "integrator.", 1e-9);
  ic.atol = num_or(j, "atol", "integrator.", 1e-12);
  if (!(ic.rtol > 0.0)) throw ConfigError("integrator.rtol", "must be positive");
  if (!(ic.atol > 0.0)) throw ConfigError("integrator.atol", "must be positive");
  ic.max_step = num_or(j, "max_step_s", "integrator.", std::numeric_limits<double>::infinity());
  if (!(ic.max_step > 0.0)) throw ConfigError("integrator.max_step_s", "must be positive");
  ic.fixed_step = num_or(j, "fixed_step_s", "integrator.", 0.0);
  ic.method = method_from_string(str_or(j, "method", "integrator.", "rk45"));
  ic.dense_output = bool_or(j, "dense_output", "integrator.", true);
  ic.truncation_cap = num_or(j, "truncation_cap", "integrator.", 1e-10);
  ic.threads = std::max(1u, opt.threads);
  return ic;
}

EffectiveOptions parse_elimination(const json& cfg, const RunOptions& opt) {
  const json& j = obj_or_empty(cfg, "elimination", "");
  EffectiveOptions eo;
  eo.order = opt.order.value_or(int_or(j, "order", "elimination.", 1));
  if (eo.order < 1) throw ConfigError("elimination.order", "must be >= 1");
  eo.s_mode = s_mode_from_string(opt.s_mode.value_or(str_or(j, "s_mode", "elimination.", "closed")));
  eo.rwa = opt.rwa.value_or(bool_or(j, "rwa", "elimination.", false));
  eo.quad_tol = num_or(j, "quad_tol", "elimination.", 1e-12);
  return eo;
}

json integrator_json(const IntegratorConfig& ic) {
  json j;
  j["method"] = to_string(ic.method);
  j["rtol"] = ic.rtol;
  j["atol"] = ic.atol;
  j["max_step_s"] = std::isfinite(ic.max_step) ? json(ic.max_step) : json("inf");
  j["fixed_step_s"] = ic.fixed_step;
  j["truncation_cap"] = ic.truncation_cap;
  j["threads"] = ic.threads;
  return j;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  out << s;
}

std::string level_label(const SystemSpec& s, LevelId l) { return s.space.level(l).label; }

std::string populations_csv(const SystemSpec& spec, const TrajectoryResult& tr) {
  std::ostringstream o;
  o << "# columns: time_s,area_progress,level,population\n";
  o << "time_s,area_progress,level,population\n";
  for (std::size_t s = 0; s < tr.times.size(); ++s)
    for (std::size_t l = 0; l < tr.populations[s].size(); ++l)
      o << fmt(tr.times[s]) << ',' << fmt(tr.pulse_area_progress[s]) << ','
        << level_label(spec, static_cast<LevelId>(l)) << ',' << fmt(tr.populations[s][l]) << '\n';
  return o.str();
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"five_level_compare", "raman_pulse", "bragg_pulse", "double_raman_pulse", "double_bragg_pulse", "validity"};
}

std::string embedded_preset(const std::string& name) {
  if (name == "rb87_d2") return kRb87D2;
  throw ConfigError("system.atom.preset", "unknown preset '" + name + "'");
}

json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
}

double parse_area(const json& v, const std::string& field) {
  if (v.is_number()) {
    const double a = v.get<double>();
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError(field, "pulse area must be positive");
    return a;
  }
  if (!v.is_string()) throw ConfigError(field, "expected a number or an expression like \"pi/2\"");
  std::string s = v.get<std::string>();
  s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
  static const std::regex re(R"(^([0-9]*\.?[0-9]*)\*?pi(/([0-9]*\.?[0-9]+))?$)");
  std::smatch m;
  if (std::regex_match(s, m, re)) {
    double a = pi;
    if (m[1].length() > 0) a *= std::stod(m[1].str());
    if (m[3].length() > 0) a /= std::stod(m[3].str());
    if (!(a > 0.0)) throw ConfigError(field, "pulse area must be positive");
    return a;
  }
  try {
    std::size_t pos = 0;
    const double a = std::stod(s, &pos);
    if (pos == s.size() && a > 0.0) return a;
  } catch (const std::exception&) {
  }
  throw ConfigError(field, "cannot parse pulse area '" + s + "'");
}

AtomConstants resolve_atom(const json& atom, const fs::path& base_dir) {
  if (!atom.is_object()) throw ConfigError("system.atom", "expected an object");
  if (atom.contains("preset")) {
    const std::string name = str(atom, "preset", "system.atom.");
    return parse_atom_preset(embedded_preset(name));
  }
  if (atom.contains("preset_file")) {
    fs::path p = str(atom, "preset_file", "system.atom.");
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) throw ConfigError("system.atom.preset_file", "file not found: " + p.string());
    return load_atom_preset(p);
  }
  try {
    return parse_atom_preset(atom.dump());
  } catch (const ConfigError& e) {
    throw ConfigError("system.atom." + e.field, e.what());
  }
}

PulseShape parse_pulse(const json& j, const std::string& field, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
  const std::string path = field + ".";
  const std::string kind = str(j, "kind", path);
  const double t0 = num_or(j, "t0_s", path, 0.0);
  try {
    if (kind == "box") {
      const double T = j.contains("T_s") ? num(j, "T_s", path) : std::numeric_limits<double>::infinity();
      return PulseShape::box(frequency(j, "a0", path), t0, T);
    }
    if (kind == "sine_squared") return PulseShape::sine_squared(frequency(j, "a0", path), t0, num(j, "T_s", path));
    if (kind == "blackman")
      return PulseShape::blackman(frequency(j, "a0", path), frequency(j, "a1", path), frequency(j, "a2", path), t0,
                                  num(j, "T_s", path));
    if (kind == "tabulated") {
      fs::path p = str(j, "csv", path);
      if (p.is_relative()) p = base_dir / p;
      return load_tabulated_csv(p);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(field, e.what());
  }
  throw ConfigError(path + "kind", "unknown pulse kind '" + kind + "'");
}

namespace {

struct LaserDraft {
  LaserSpec laser;
  bool resonant_k = false;
  bool has_pulse = false;
};

SystemSpec make_spec(SystemKind kind, const AtomConstants& atom, const std::vector<LaserSpec>& lasers,
                     const ComOptions& com, DetuningConvention conv) {
  switch (kind) {
    case SystemKind::raman:
      if (lasers.size() != 2) throw ConfigError("system.lasers", "Raman needs two lasers");
      return raman_system(atom, lasers[0], lasers[1], com);
    case SystemKind::bragg:
      if (lasers.size() != 2) throw ConfigError("system.lasers", "Bragg needs two lasers");
      return bragg_system(atom, lasers[0], lasers[1], com);
    case SystemKind::double_raman: return double_raman_system(atom, lasers, com, conv);
    case SystemKind::double_bragg: return double_bragg_system(atom, lasers, com);
    case SystemKind::five_level: break;
  }
  throw ConfigError("system.kind", "not a COM system");
}

double peak_effective_rabi(const SystemSpec& s, double gamma0) {
  const PulseShape& a = s.couplings[0].envelope;
  const PulseShape& b = s.couplings[1].envelope;
  double lo = std::max(a.start(), b.start()), hi = std::min(a.end(), b.end());
  if (!std::isfinite(hi)) hi = lo + 1.0;
  double m = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double t = lo + (hi - lo) * i / 2000.0;
    m = std::max(m, std::abs(2.0 * evaluate(a, t) * evaluate(b, t) / gamma0));
  }
  return m;
}

}  // namespace

BuiltSystem build_system(const json& cfg, const RunOptions& opt) {
  const json& sys = at(cfg, "system", "");
  const SystemKind kind = system_kind_from_string(str(sys, "kind", "system."));
  BuiltSystem b;
  if (kind == SystemKind::five_level) {
    FiveLevelParams prm;
    const json& lv = obj_or_empty(sys, "levels_rad_s", "system.");
    prm.omega_g = num_or(lv, "g", "system.levels_rad_s.", prm.omega_g);
    prm.omega_m = num_or(lv, "m", "system.levels_rad_s.", prm.omega_m);
    prm.omega_e = num_or(lv, "e", "system.levels_rad_s.", prm.omega_e);
    prm.omega_a1 = num_or(lv, "a1", "system.levels_rad_s.", prm.omega_a1);
    prm.omega_a2 = num_or(lv, "a2", "system.levels_rad_s.", prm.omega_a2);
    if (sys.contains("coupling_rad_s")) {
      const json& c = sys.at("coupling_rad_s");
      if (!c.is_array() || c.size() != 2 || !c[0].is_array() || !c[1].is_array() || c[0].size() != 3 ||
          c[1].size() != 3)
        throw ConfigError("system.coupling_rad_s", "expected a 2x3 array");
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 3; ++l) {
          if (!c[k][l].is_number()) throw ConfigError("system.coupling_rad_s", "entries must be numbers");
          prm.coupling(k, l) = c[k][l].get<double>();
        }
    }
    prm.coupling *= opt.omega_scale.value_or(num_or(sys, "coupling_scale", "system.", 1.0));
    const json& win = obj_or_empty(cfg, "window", "");
    prm.horizon = num_or(win, "t1_s", "window.", 3.0);
    b.spec = five_level_system(prm);
    b.spec.t0 = num_or(win, "t0_s", "window.", 0.0);
    b.meta["coupling_scale"] = opt.omega_scale.value_or(num_or(sys, "coupling_scale", "system.", 1.0));
    return b;
  }

  const AtomConstants atom = resolve_atom(at(sys, "atom", "system."), opt.base_dir);
  const json& lj = at(sys, "lasers", "system.");
  if (!lj.is_array() || lj.empty()) throw ConfigError("system.lasers", "expected a non-empty array");
  std::vector<LaserDraft> drafts;
  for (std::size_t i = 0; i < lj.size(); ++i) {
    const std::string path = "system.lasers[" + std::to_string(i) + "].";
    const json& L = lj[i];
    if (!L.is_object()) throw ConfigError("system.lasers[" + std::to_string(i) + "]", "expected an object");
    LaserDraft d;
    d.laser.name = str_or(L, "name", path, "laser" + std::to_string(i + 1));
    d.laser.lower = str(L, "lower", path);
    d.laser.upper = str(L, "upper", path);
    d.laser.omega = frequency(L, "omega", path) + frequency_opt(L, "omega_offset", path).value_or(0.0);
    const json& k = at(L, "k_rad_m", path);
    if (k.is_string()) {
      if (k.get<std::string>() != "resonant") throw ConfigError(path + "k_rad_m", "expected a number or \"resonant\"");
      d.resonant_k = true;
    } else if (k.is_number()) {
      d.laser.k = k.get<double>();
    } else {
      throw ConfigError(path + "k_rad_m", "expected a number or \"resonant\"");
    }
    d.laser.factor = {num_or(L, "factor_re", path, 1.0), num_or(L, "factor_im", path, 0.0)};
    if (L.contains("pulse")) {
      d.laser.envelope = parse_pulse(L.at("pulse"), path + "pulse", opt.base_dir);
      d.has_pulse = true;
    } else {
      d.laser.envelope = PulseShape::box(1.0, 0.0, 1.0);
    }
    drafts.push_back(d);
  }
  const bool any_res = std::any_of(drafts.begin(), drafts.end(), [](const auto& d) { return d.resonant_k; });
  const bool all_res = std::all_of(drafts.begin(), drafts.end(), [](const auto& d) { return d.resonant_k; });
  if (any_res && !all_res) throw ConfigError("system.lasers", "\"resonant\" wavevectors must be used for all lasers");

  ComOptions com;
  com.window_kicks = int_or(sys, "window_kicks", "system.", 8);
  if (com.window_kicks < 1) throw ConfigError("system.window_kicks", "must be >= 1");
  com.commensuration_tol = num_or(sys, "commensuration_tol", "system.", 1e-9);
  if (sys.contains("k_ref_rad_m")) com.k_ref = num(sys, "k_ref_rad_m", "system.");
  if (auto e = frequency_opt(sys, "energy_reference", "system.")) com.energy_reference = *e;
  const std::string conv_s = str_or(sys, "detuning_convention", "system.", "derived");
  DetuningConvention conv = DetuningConvention::derived;
  if (conv_s == "as_published")
    conv = DetuningConvention::as_published;
  else if (conv_s != "derived")
    throw ConfigError("system.detuning_convention", "expected \"derived\" or \"as_published\"");

  auto lasers_now = [&]() {
    std::vector<LaserSpec> v;
    for (const auto& d : drafts) v.push_back(d.laser);
    return v;
  };

  const double w1 = drafts[0].laser.omega, w2 = drafts.size() > 1 ? drafts[1].laser.omega : w1;
  if (all_res) {
    // provisional split with k_eff = 1 to read off the two-photon detuning
    const double f1 = w1 / (w1 + w2), f2 = w2 / (w1 + w2);
    for (std::size_t i = 0; i < drafts.size(); ++i) drafts[i].laser.k = (i % 2 == 0 ? -f1 : f2) * (i < 2 ? 1.0 : -1.0);
    ComOptions c0 = com;
    c0.k_ref = 1.0;
    const SystemSpec probe = make_spec(kind, atom, lasers_now(), c0, conv);
    const TwoPhotonInfo tp = two_photon(probe, 0.0);
    const double wr = -tp.delta0;
    if (!(wr > 0.0))
      throw ConfigError("system.lasers[0].k_rad_m", "no recoil makes momentum 0 resonant for these laser frequencies");
    const double k_eff = std::sqrt(2.0 * atom.mass_kg * wr / phys::hbar);
    for (auto& d : drafts) d.laser.k *= k_eff;
    if (!sys.contains("k_ref_rad_m")) com.k_ref = k_eff;
    b.meta["resonant_recoil_rad_s"] = wr;
    b.meta["k_eff_rad_m"] = k_eff;
  }

  // pulse calibration on the detuning of the chosen resonant momentum
  const double p_cal = num_or(sys, "resonant_p_kref", "system.", 0.0);
  SystemSpec spec = make_spec(kind, atom, lasers_now(), com, conv);
  const TwoPhotonInfo tp0 = two_photon(spec, p_cal);
  b.gamma0 = std::abs(tp0.gamma0);
  if (cfg.contains("pulse")) {
    const json& pj = cfg.at("pulse");
    if (!pj.is_object()) throw ConfigError("pulse", "expected an object");
    const std::string pk = str(pj, "kind", "pulse.");
    const double t0 = num_or(pj, "t0_s", "pulse.", 0.0);
    const double T = num(pj, "T_s", "pulse.");
    PulseShape shape;
    double area = 0.0;
    const bool calibrate = opt.area.has_value() || pj.contains("area");
    if (calibrate) {
      area = opt.area ? *opt.area : parse_area(pj.at("area"), "pulse.area");
      try {
        if (pk == "box" || pk == "sine_squared") {
          const double a0 = calibrate_amplitude(pulse_kind_from_string(pk), T, b.gamma0, area);
          shape = pk == "box" ? PulseShape::box(a0, t0, T) : PulseShape::sine_squared(a0, t0, T);
        } else if (pk == "blackman") {
          const json& r = at(pj, "ratios", "pulse.");
          if (!r.is_array() || r.size() != 3) throw ConfigError("pulse.ratios", "expected [a0, a1, a2]");
          PulseShape tmpl = PulseShape::blackman(r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), t0, T);
          shape = tmpl.scaled(calibrate_scale(tmpl, b.gamma0, area));
        } else {
          throw ConfigError("pulse.kind", "calibrated pulses must be box, sine_squared or blackman");
        }
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::precondition) throw ConfigError("pulse", e.what());
        throw;
      }
      b.meta["target_area"] = area;
    } else {
      shape = parse_pulse(pj, "pulse", opt.base_dir);
    }
    for (auto& d : drafts)
      if (!d.has_pulse) {
        d.laser.envelope = shape;
        d.has_pulse = true;
      }
    b.meta["pulse"] = {{"kind", to_string(shape.kind)}, {"a0_rad_s", shape.a0}, {"t0_s", t0}, {"T_s", T}};
  }
  for (std::size_t i = 0; i < drafts.size(); ++i)
    if (!drafts[i].has_pulse)
      throw ConfigError("system.lasers[" + std::to_string(i) + "].pulse", "missing (and no global pulse given)");
  com.horizon = num_or(obj_or_empty(cfg, "window", ""), "t1_s", "window.", 0.0);

  const json& init = obj_or_empty(cfg, "initial_state", "");
  b.spec = make_spec(kind, atom, lasers_now(), com, conv);
  b.two_photon = two_photon(b.spec, p_cal);
  b.resonant_p = b.two_photon->p_resonant;
  b.omega_eff = peak_effective_rabi(b.spec, b.gamma0);

  const json& mom = obj_or_empty(init, "momentum", "initial_state.");
  const std::string mk = str_or(mom, "kind", "initial_state.momentum.", "resonant");
  std::vector<double> base;
  const double dpp = b.two_photon->doppler_per_p;
  if (mk == "resonant") {
    base = {b.resonant_p};
  } else if (mk == "box") {
    const double xmin = num_or(mom, "doppler_over_rabi_min", "initial_state.momentum.", -8.0);
    const double xmax = num_or(mom, "doppler_over_rabi_max", "initial_state.momentum.", 8.0);
    const int n = opt.families.value_or(int_or(mom, "samples", "initial_state.momentum.", 64));
    if (n < 1) throw ConfigError("initial_state.momentum.samples", "must be >= 1");
    if (!(xmax > xmin)) throw ConfigError("initial_state.momentum.doppler_over_rabi_max", "must exceed min");
    if (dpp == 0.0 || b.omega_eff == 0.0) throw ConfigError("initial_state.momentum", "Doppler axis undefined");
    // half-open grid: spacing (max - min) / n, so an even n keeps the resonant class x = 0
    for (int i = 0; i < n; ++i) base.push_back(b.resonant_p + (xmin + (xmax - xmin) * i / n) * b.omega_eff / dpp);
  } else if (mk == "values") {
    const json& v = at(mom, "p_kref", "initial_state.momentum.");
    if (!v.is_array() || v.empty()) throw ConfigError("initial_state.momentum.p_kref", "expected a non-empty array");
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError("initial_state.momentum.p_kref", "entries must be numbers");
      base.push_back(x.get<double>());
    }
  } else {
    throw ConfigError("initial_state.momentum.kind", "expected resonant, box or values");
  }
  std::vector<double> sorted = base;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("initial_state.momentum", "base momenta must be distinct");
  b.spec.ladder.base_momenta = base;

  const auto& L = b.spec.ladder;
  b.meta["commensuration"] = {{"k_ref_rad_m", L.k_ref}, {"M", L.M}, {"max_residual", b.spec.commensuration_residual},
                              {"window", {L.n_min, L.n_max}}};
  b.meta["omega_ref_rad_s"] = L.omega_ref;
  b.meta["two_photon"] = {{"kappa_eff", b.two_photon->kappa_eff},
                          {"delta0_rad_s", b.two_photon->delta0},
                          {"recoil_eff_rad_s", b.two_photon->recoil_eff},
                          {"p_resonant_kref", b.resonant_p},
                          {"gamma1_rad_s", b.two_photon->gamma1},
                          {"gamma2_rad_s", b.two_photon->gamma2},
                          {"gamma0_rad_s", b.two_photon->gamma0},
                          {"calibration_p_kref", p_cal}};
  b.meta["omega_eff_rad_s"] = b.omega_eff;
  b.meta["doppler_resonant_over_rabi"] = b.omega_eff > 0.0 ? dpp * b.resonant_p / b.omega_eff : 0.0;
  b.meta["detuning_convention"] = conv_s;
  if (atom.has_level("g") && atom.has_level("e")) {
    const double hfs = atom.level("e") - atom.level("g");
    json rec;
    rec["hyperfine_rad_s"] = hfs;
    if (kind == SystemKind::raman || kind == SystemKind::double_raman) {
      rec["laser_difference_minus_hyperfine_rad_s"] = std::abs(w2 - w1) - hfs;
      const double kb = std::abs(w1) / phys::c;
      rec["single_beam_hbar_k2_over_2m_rad_s"] = phys::hbar * kb * kb / (2.0 * atom.mass_kg);
      rec["single_beam_2pi_reading_rad_s"] = phys::hbar * std::pow(2.0 * pi * kb, 2) / (2.0 * atom.mass_kg);
    }
    b.meta["recoil"] = rec;
  }
  return b;
}

PulseRun run_pulse(const json& cfg, const RunOptions& opt) {
  PulseRun r;
  r.sys = build_system(cfg, opt);
  const SystemSpec& spec = r.sys.spec;
  if (!spec.com) throw ConfigError("system.kind", "pulse runs need a COM system");
  const EffectiveOptions eo = parse_elimination(cfg, opt);
  r.eff = effective_hamiltonian(spec, eo);

  r.integrator = parse_integrator(cfg, opt);
  double T = 0.0;
  for (const auto& c : spec.couplings)
    if (std::isfinite(c.envelope.T)) T = std::max(T, c.envelope.T);
  if (!cfg.contains("integrator") || !cfg.at("integrator").contains("max_step_s"))
    if (T > 0.0) r.integrator.max_step = T / 50.0;
  const MomentumLadder lad = spec.ladder;
  r.integrator.family_offset = [lad](double p0) { return lad.kinetic(p0); };
  const PulseShape e1 = spec.couplings[0].envelope, e2 = spec.couplings[1].envelope;
  const double g0 = r.sys.gamma0;
  r.integrator.area = [e1, e2, g0](double t) { return pulse_area(e1, e2, g0, t); };

  const json& win = obj_or_empty(cfg, "window", "");
  const double t0 = spec.t0;
  const double t1 = num_or(win, "t1_s", "window.", spec.t_end);
  if (!(t1 > t0)) throw ConfigError("window.t1_s", "must be after the pulse start");
  const int n = opt.samples.value_or(int_or(obj_or_empty(cfg, "outputs", ""), "samples", "outputs.", 101));
  if (n < 2) throw ConfigError("outputs.samples", "must be >= 2");
  r.times = linspace(t0, t1, n);

  const json& init = obj_or_empty(cfg, "initial_state", "");
  const std::string lvl = str_or(init, "level", "initial_state.", spec.space.level(spec.space.relevant().back()).label);
  const auto lid = spec.space.find(lvl);
  if (!lid || !spec.space.is_relevant(*lid)) throw ConfigError("initial_state.level", "not a relevant level: " + lvl);
  const std::vector<Site> seeds{{*lid, 0}};
  const double amp = 1.0 / std::sqrt(static_cast<double>(lad.base_momenta.size()));
  const double tp = r.sys.two_photon->doppler_per_p;
  for (double p0 : lad.base_momenta) r.doppler_over_rabi.push_back(r.sys.omega_eff > 0.0 ? tp * p0 / r.sys.omega_eff : 0.0);

  const std::string prop = str_or(cfg, "propagate", "", "effective");
  if (prop != "effective" && prop != "full" && prop != "both")
    throw ConfigError("propagate", "expected effective, full or both");
  if (prop != "full") {
    auto basis = std::make_shared<const LadderBasis>(reachable_basis(r.eff.block, seeds, lad.n_min, lad.n_max));
    StateVector psi(basis, lad.base_momenta);
    for (std::size_t f = 0; f < psi.families(); ++f) psi.set(f, seeds[0], amp);
    r.effective = evolve(r.eff.block, psi, lad, t0, r.times, r.integrator);
  }
  if (prop != "effective") {
    auto basis = full_basis(spec, seeds);
    StateVector psi(basis, lad.base_momenta);
    for (std::size_t f = 0; f < psi.families(); ++f) psi.set(f, seeds[0], amp);
    r.full = evolve(full_hamiltonian(spec), psi, lad, t0, r.times, r.integrator);
  }
  if (r.effective && r.full) {
    const auto rel = spec.space.relevant();
    r.delta = relative_error(*r.full, *r.effective, rel);
  }
  return r;
}

FiveLevelRun run_five_level(const json& cfg, const RunOptions& opt) {
  FiveLevelRun r;
  BuiltSystem b = build_system(cfg, opt);
  if (b.spec.kind != SystemKind::five_level) throw ConfigError("system.kind", "expected five_level");
  r.spec = b.spec;
  const json& win = obj_or_empty(cfg, "window", "");
  const double t0 = r.spec.t0, t1 = r.spec.t_end;
  if (!(t1 > t0)) throw ConfigError("window.t1_s", "must exceed t0_s");
  const int n = opt.samples.value_or(int_or(win, "samples", "window.", 301));
  if (n < 2) throw ConfigError("window.samples", "must be >= 2");
  r.times = linspace(t0, t1, n);
  r.validity = validity_report(r.spec, t0, t1);
  r.integrator = parse_integrator(cfg, opt);

  const json& init = obj_or_empty(cfg, "initial_state", "");
  const std::string lvl = str_or(init, "level", "initial_state.", "g");
  const auto lid = r.spec.space.find(lvl);
  if (!lid || !r.spec.space.is_relevant(*lid)) throw ConfigError("initial_state.level", "not a relevant level: " + lvl);

  auto full_b = full_basis(r.spec, {});
  StateVector psi(full_b, {0.0});
  psi.set(0, {*lid, 0}, 1.0);
  IntegratorConfig ex = r.integrator;
  ex.method = Method::expm;
  r.full = evolve(full_hamiltonian(r.spec), psi, r.spec.ladder, t0, r.times, ex);

  std::vector<std::string> methods = {"markov", "paulisch", "sanz", "ours"};
  if (cfg.contains("methods")) {
    methods.clear();
    const json& m = cfg.at("methods");
    if (!m.is_array()) throw ConfigError("methods", "expected an array");
    for (const auto& x : m) {
      if (!x.is_string()) throw ConfigError("methods", "entries must be strings");
      methods.push_back(x.get<std::string>());
    }
  }
  const Blocks bl = finite_blocks(r.spec, t0);
  const auto rel = r.spec.space.relevant();
  std::vector<Site> rel_sites;
  for (LevelId l : rel) rel_sites.push_back({l, 0});
  auto rel_basis = std::make_shared<const LadderBasis>(rel_sites, 0, 0);
  StateVector psi_rel(rel_basis, {0.0});
  psi_rel.set(0, {*lid, 0}, 1.0);
  for (const auto& m : methods) {
    TrajectoryResult tr;
    if (m == "ours") {
      const EffectiveOptions eo = parse_elimination(cfg, opt);
      const EffectiveHamiltonian eff = effective_hamiltonian(r.spec, eo);
      tr = evolve(eff.block, psi_rel, r.spec.ladder, t0, r.times, r.integrator);
    } else {
      Matrix Hm;
      if (m == "markov")
        Hm = markov_hamiltonian(bl.delta, bl.xi, bl.omega);
      else if (m == "paulisch")
        Hm = paulisch_hamiltonian(bl.delta, bl.xi, bl.omega);
      else if (m == "sanz")
        Hm = sanz_hamiltonian(bl.delta, bl.xi, bl.omega);
      else if (m == "commuting")
        Hm = commuting_limit_hamiltonian(bl.delta, bl.xi, bl.omega);
      else
        throw ConfigError("methods", "unknown method '" + m + "'");
      BlockOperator op;
      op.dense.push_back({rel, [Hm](double) { return Hm; }});
      op.time_dependent = false;
      tr = evolve(op, psi_rel, r.spec.ladder, t0, r.times, ex);
    }
    r.delta[m] = relative_error(r.full, tr, rel);
    r.methods[m] = std::move(tr);
    r.method_order.push_back(m);
  }
  return r;
}

ValidityReport run_validity(const json& cfg, const RunOptions& opt) {
  BuiltSystem b = build_system(cfg, opt);
  const json& win = obj_or_empty(cfg, "window", "");
  const double t0 = b.spec.t0;
  const double t1 = num_or(win, "t1_s", "window.", b.spec.t_end);
  return validity_report(b.spec, t0, t1);
}

json validity_json(const ValidityReport& r) {
  json j;
  auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  j["gamma_star"] = finite_or_null(r.gamma_star);
  j["epsilon_max"] = finite_or_null(r.epsilon_max);
  j["smoothness"] = finite_or_null(r.smoothness);
  j["coupling_ratio"] = finite_or_null(r.coupling_ratio);
  j["bound_value"] = finite_or_null(r.bound_value);
  j["verdict"] = to_string(r.verdict);
  j["coupling_norm_rad_s"] = finite_or_null(r.coupling_norm);
  j["derivative_norm_rad_s2"] = finite_or_null(r.derivative_norm);
  j["support"] = r.support;
  j["notes"] = r.notes;
  j["policy"] = {{"fail", "gamma_star <= 0, coupling_ratio >= 1 or smoothness >= 1"},
                 {"warn_threshold", validity_warn_threshold}};
  return j;
}

json default_config(const std::string& scenario) {
  const std::string s = scenario;
  auto raman = [](const std::string& area) {
    json c;
    c["scenario"] = "raman_pulse";
    c["system"] = {{"kind", "raman"},
                   {"atom", {{"preset", "rb87_d2"}}},
                   {"lasers",
                    json::array({{{"name", "laser1"},
                                  {"lower", "e"},
                                  {"upper", "a"},
                                  {"omega_rad_s", 247982622728567.9},
                                  {"k_rad_m", "resonant"}},
                                 {{"name", "laser2"},
                                  {"lower", "g"},
                                  {"upper", "a"},
                                  {"omega_rad_s", 247982622728567.9},
                                  {"omega_offset_rad_s", 42943587360.18467},
                                  {"k_rad_m", "resonant"}}})},
                   {"window_kicks", 8}};
    c["pulse"] = {{"kind", "sine_squared"}, {"t0_s", 0.0}, {"T_s", 1e-4}, {"area", area}};
    c["elimination"] = {{"order", 1}, {"s_mode", "closed"}, {"rwa", false}};
    c["integrator"] = {{"method", "rk45"}, {"rtol", 1e-9}, {"atol", 1e-12}};
    c["initial_state"] = {
        {"level", "g"},
        {"momentum", {{"kind", "box"}, {"doppler_over_rabi_min", -8.0}, {"doppler_over_rabi_max", 8.0}, {"samples", 64}}}};
    c["propagate"] = "effective";
    c["outputs"] = {{"samples", 101}};
    return c;
  };
  if (s == "raman_pulse" || s == "raman_pi") return raman("pi");
  if (s == "raman_pi2") return raman("pi/2");
  if (s == "five_level_compare" || s == "validity") {
    json c;
    c["scenario"] = s;
    c["system"] = {{"kind", "five_level"},
                   {"levels_rad_s", {{"g", -4.1}, {"m", -4.0}, {"e", 8.0}, {"a1", 22.0}, {"a2", 23.0}}},
                   {"coupling_rad_s", json::array({json::array({1.5, 1.5, 1.5}), json::array({1.0, 1.0, 1.0})})}};
    c["window"] = {{"t0_s", 0.0}, {"t1_s", 3.0}, {"samples", 301}};
    c["elimination"] = {{"order", 1}};
    c["integrator"] = {{"rtol", 1e-10}, {"atol", 1e-12}};
    c["initial_state"] = {{"level", "g"}};
    c["methods"] = json::array({"markov", "paulisch", "sanz", "ours"});
    return c;
  }
  // scaled toy atoms for Bragg and the double geometries; all frequencies in rad/s with hbar k^2/2m = 1
  json atom = {{"label", "toy"},
               {"mass_kg", phys::hbar / 2.0},
               {"levels", {{"g", 0.0}, {"e", 50.0}, {"a", 1000.0}, {"a1", 1000.0}, {"a2", 1010.0}}}};
  auto laser = [](const std::string& name, const std::string& lo, const std::string& up, double w, double k) {
    return json{{"name", name}, {"lower", lo}, {"upper", up}, {"omega_rad_s", w}, {"k_rad_m", k}};
  };
  json c;
  c["elimination"] = {{"order", 1}, {"s_mode", "closed"}, {"rwa", false}};
  c["integrator"] = {{"method", "rk45"}, {"rtol", 1e-9}, {"atol", 1e-12}};
  c["outputs"] = {{"samples", 101}};
  c["propagate"] = "both";
  if (s == "bragg_pulse") {
    c["scenario"] = s;
    c["system"] = {{"kind", "bragg"},
                   {"atom", atom},
                   {"k_ref_rad_m", 1.0},
                   {"lasers", json::array({laser("laser1", "g", "a", 600.0, 1.0), laser("laser2", "g", "a", 604.0, -1.0)})},
                   {"window_kicks", 4}};
  } else if (s == "double_raman_pulse") {
    c["scenario"] = s;
    c["system"] = {{"kind", "double_raman"},
                   {"atom", atom},
                   {"k_ref_rad_m", 1.0},
                   {"lasers", json::array({laser("laser1", "e", "a1", 550.0, 1.0), laser("laser2", "g", "a1", 604.0, -1.0),
                                           laser("laser3", "e", "a2", 550.0, -1.0), laser("laser4", "g", "a2", 604.0, 1.0)})},
                   {"window_kicks", 4}};
  } else if (s == "double_bragg_pulse") {
    c["scenario"] = s;
    c["system"] = {{"kind", "double_bragg"},
                   {"atom", atom},
                   {"k_ref_rad_m", 1.0},
                   {"lasers", json::array({laser("laser1", "g", "a1", 600.0, 1.0), laser("laser2", "g", "a1", 604.0, -1.0),
                                           laser("laser3", "g", "a2", 600.0, -1.0), laser("laser4", "g", "a2", 604.0, 1.0)})},
                   {"window_kicks", 4}};
  } else {
    throw ConfigError("scenario", "unknown scenario '" + s + "'");
  }
  c["pulse"] = {{"kind", "sine_squared"}, {"t0_s", 0.0}, {"T_s", 10.0}, {"area", "pi"}};
  c["initial_state"] = {{"level", "g"}, {"momentum", {{"kind", "values"}, {"p_kref", json::array({0.0})}}}};
  return c;
}

void run_to_directory(const json& cfg, const RunOptions& opt, const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory " + out.string());
  const std::string sc = str(cfg, "scenario", "");
  json meta;
  meta["tool"] = "tdae";
  meta["version"] = kVersion;
  meta["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION);
  meta["scenario"] = sc;
  meta["threads"] = opt.threads;
  meta["seed"] = opt.seed;

  if (sc == "validity") {
    const ValidityReport v = run_validity(cfg, opt);
    write_text(out / "validity.json", validity_json(v).dump(2) + "\n");
    meta["config"] = cfg;
    write_text(out / "run_meta.json", meta.dump(2) + "\n");
    return;
  }
  if (sc == "five_level_compare") {
    const FiveLevelRun r = run_five_level(cfg, opt);
    write_text(out / "validity.json", validity_json(r.validity).dump(2) + "\n");
    write_text(out / "populations.csv", populations_csv(r.spec, r.full));
    for (const auto& m : r.method_order) write_text(out / ("populations_" + m + ".csv"), populations_csv(r.spec, r.methods.at(m)));
    std::ostringstream d;
    d << "# columns: time_s,method,delta\n";
    d << "time_s,method,delta\n";
    for (const auto& m : r.method_order)
      for (std::size_t i = 0; i < r.times.size(); ++i) d << fmt(r.times[i]) << ',' << m << ',' << fmt(r.delta.at(m)[i]) << '\n';
    write_text(out / "delta.csv", d.str());
    meta["integrator"] = integrator_json(r.integrator);
    meta["reference"] = "matrix exponential of the full five-level Hamiltonian";
    meta["area_progress"] = "not defined for this system; column is 0";
    meta["delta_convention"] = "raw amplitudes, no phase alignment";
    json fin;
    for (const auto& m : r.method_order) fin[m] = r.delta.at(m).back();
    meta["final_delta"] = fin;
    meta["config"] = cfg;
    write_text(out / "run_meta.json", meta.dump(2) + "\n");
    return;
  }
  if (sc == "raman_pulse" || sc == "bragg_pulse" || sc == "double_raman_pulse" || sc == "double_bragg_pulse") {
    const PulseRun r = run_pulse(cfg, opt);
    const SystemSpec& spec = r.sys.spec;
    write_text(out / "validity.json", validity_json(r.eff.validity).dump(2) + "\n");
    const TrajectoryResult& main = r.effective ? *r.effective : *r.full;
    write_text(out / "populations.csv", populations_csv(spec, main));
    if (r.effective && r.full) {
      write_text(out / "populations_full.csv", populations_csv(spec, *r.full));
      std::ostringstream d;
      d << "# columns: time_s,method,delta\n";
      d << "time_s,method,delta\n";
      for (std::size_t i = 0; i < r.times.size(); ++i) d << fmt(r.times[i]) << ",ours," << fmt(r.delta[i]) << '\n';
      write_text(out / "delta.csv", d.str());
    }
    std::ostringstream o;
    o << "# columns: area_progress,doppler_over_rabi,level,density,momentum_kref\n";
    o << "area_progress,doppler_over_rabi,level,density,momentum_kref\n";
    for (const auto& row : momentum_density(main, spec.ladder))
      o << fmt(main.pulse_area_progress[row.sample]) << ',' << fmt(r.doppler_over_rabi[row.family]) << ','
        << level_label(spec, row.level) << ',' << fmt(row.density) << ',' << fmt(row.momentum) << '\n';
    write_text(out / "density.csv", o.str());

    meta["system"] = r.sys.meta;
    meta["integrator"] = integrator_json(r.integrator);
    meta["elimination"] = {{"order", r.eff.order}};
    for (const auto& [k, v] : r.eff.metadata) meta["elimination"][k] = v;
    meta["rwa_ratio_max"] = r.eff.rwa_ratio_max;
    meta["effective_terms"] = r.eff.terms.size();
    json tl;
    if (r.effective)
      tl["effective"] = {{"truncation_loss", r.effective->truncation_loss},
                         {"window_doublings", r.effective->window_doublings},
                         {"steps", r.effective->steps},
                         {"norm_final", r.effective->norms.back()}};
    if (r.full)
      tl["full"] = {{"truncation_loss", r.full->truncation_loss},
                    {"window_doublings", r.full->window_doublings},
                    {"steps", r.full->steps},
                    {"norm_final", r.full->norms.back()}};
    meta["propagation"] = tl;
    meta["families"] = spec.ladder.base_momenta.size();
    meta["doppler_axis"] = "nu = 2 omega_ref kappa_eff p0 of each family, divided by omega_eff_rad_s";
    meta["density"] = "population of each ladder site relative to the family's initial norm";
    if (!r.delta.empty()) meta["max_delta"] = *std::max_element(r.delta.begin(), r.delta.end());
    meta["config"] = cfg;
    write_text(out / "run_meta.json", meta.dump(2) + "\n");
    return;
  }
  throw ConfigError("scenario", "unknown scenario '" + sc + "'");
}

}  // namespace tdae::scenario
