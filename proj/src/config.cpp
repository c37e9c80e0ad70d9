#include "eitgate/config.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "eitgate/units.hpp"
#include "toml.hpp"

namespace eitgate {

namespace {

using Severity = Diagnostic::Severity;

std::string where(const toml::node& n) {
  const auto& b = n.source().begin;
  return " (line " + std::to_string(b.line) + ")";
}

// One config key: how to read it from a node and write it back.
struct Field {
  std::string section;  // "" for top level
  std::string key;
  std::function<std::optional<std::string>(const toml::node&, ExperimentConfig&)> read;
  std::function<void(const ExperimentConfig&, toml::table&)> write;

  std::string path() const { return section.empty() ? key : section + "." + key; }
};

std::optional<double> as_number(const toml::node& n) {
  if (auto v = n.value_exact<double>()) return *v;
  if (auto v = n.value_exact<int64_t>()) return static_cast<double>(*v);
  return std::nullopt;
}

Field number(std::string s, std::string k, double ExperimentConfig::*m) {
  return {s, k,
          [m](const toml::node& n, ExperimentConfig& c) -> std::optional<std::string> {
            auto v = as_number(n);
            if (!v) return "expected a number";
            c.*m = *v;
            return std::nullopt;
          },
          [k, m](const ExperimentConfig& c, toml::table& t) { t.insert_or_assign(k, c.*m); }};
}

Field opt_number(std::string s, std::string k, std::optional<double> ExperimentConfig::*m) {
  return {s, k,
          [m](const toml::node& n, ExperimentConfig& c) -> std::optional<std::string> {
            auto v = as_number(n);
            if (!v) return "expected a number";
            c.*m = *v;
            return std::nullopt;
          },
          [k, m](const ExperimentConfig& c, toml::table& t) {
            if (c.*m) t.insert_or_assign(k, *(c.*m));
          }};
}

Field integer(std::string s, std::string k, int ExperimentConfig::*m) {
  return {s, k,
          [m](const toml::node& n, ExperimentConfig& c) -> std::optional<std::string> {
            auto v = n.value_exact<int64_t>();
            if (!v) return "expected an integer";
            c.*m = static_cast<int>(*v);
            return std::nullopt;
          },
          [k, m](const ExperimentConfig& c, toml::table& t) {
            t.insert_or_assign(k, static_cast<int64_t>(c.*m));
          }};
}

Field boolean(std::string s, std::string k, bool ExperimentConfig::*m) {
  return {s, k,
          [m](const toml::node& n, ExperimentConfig& c) -> std::optional<std::string> {
            auto v = n.value_exact<bool>();
            if (!v) return "expected true or false";
            c.*m = *v;
            return std::nullopt;
          },
          [k, m](const ExperimentConfig& c, toml::table& t) { t.insert_or_assign(k, c.*m); }};
}

Field text(std::string s, std::string k, std::string ExperimentConfig::*m, bool skip_empty = false) {
  return {s, k,
          [m](const toml::node& n, ExperimentConfig& c) -> std::optional<std::string> {
            auto v = n.value_exact<std::string>();
            if (!v) return "expected a string";
            c.*m = *v;
            return std::nullopt;
          },
          [k, m, skip_empty](const ExperimentConfig& c, toml::table& t) {
            if (!skip_empty || !(c.*m).empty()) t.insert_or_assign(k, c.*m);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    using C = ExperimentConfig;
    std::vector<Field> v{
        text("", "protocol", &C::protocol),
        {"", "seed",
         [](const toml::node& n, C& c) -> std::optional<std::string> {
           auto s = n.value_exact<int64_t>();
           if (!s || *s < 0) return "expected a non-negative integer";
           c.seed = static_cast<std::uint64_t>(*s);
           return std::nullopt;
         },
         [](const C& c, toml::table& t) {
           t.insert_or_assign("seed", static_cast<int64_t>(c.seed));
         }},
        text("scheme", "preset", &C::preset),
        number("scheme", "raman_power_scale", &C::raman_power_scale),
        number("scheme", "coupling_power_scale", &C::coupling_power_scale),
        number("scheme", "probe_power_uw", &C::probe_power_uw),
        number("scheme", "coupling_power_mw", &C::coupling_power_mw),
        number("scheme", "waist_um", &C::waist_um),
        opt_number("scheme", "intermediate_detuning_ghz", &C::intermediate_detuning_ghz),
        opt_number("scheme", "raman_detuning_mhz", &C::raman_detuning_mhz),
        opt_number("scheme", "coupling_detuning_mhz", &C::coupling_detuning_mhz),
        opt_number("control", "rydberg_rabi_mhz", &C::rydberg_rabi_mhz),
        boolean("control", "full_ladder", &C::full_ladder),
        boolean("control", "scatter_to_leakage", &C::scatter_to_leakage),
        boolean("control", "coupling_on_control", &C::coupling_on_control),
        number("control", "rydberg_dephasing_khz", &C::rydberg_dephasing_khz),
        opt_number("geometry", "spacing_um", &C::spacing_um),
        text("geometry", "layout", &C::geometry),
        opt_number("interaction", "strength_mhz", &C::interaction_mhz),
        opt_number("interaction", "reference_distance_um", &C::interaction_distance_um),
        opt_number("pulse", "tau_us", &C::tau_us),
        {"ghz", "k",
         [](const toml::node& n, C& c) -> std::optional<std::string> {
           if (auto one = n.value_exact<int64_t>()) {
             c.ghz_k = {static_cast<int>(*one)};
             return std::nullopt;
           }
           const auto* arr = n.as_array();
           if (!arr || arr->empty()) return "expected an integer or a non-empty integer array";
           c.ghz_k.clear();
           for (const auto& e : *arr) {
             auto k = e.value_exact<int64_t>();
             if (!k) return "expected an integer or a non-empty integer array";
             c.ghz_k.push_back(static_cast<int>(*k));
           }
           return std::nullopt;
         },
         [](const C& c, toml::table& t) {
           toml::array a;
           for (int k : c.ghz_k) a.push_back(static_cast<int64_t>(k));
           t.insert_or_assign("k", std::move(a));
         }},
        boolean("ghz", "suppress_target_pairs", &C::suppress_target_pairs),
        integer("truth_table", "shots", &C::shots),
        number("darkstate", "probe_rabi_mhz", &C::probe_rabi_mhz),
        number("darkstate", "coupling_rabi_mhz", &C::coupling_rabi_mhz),
        number("darkstate", "detuning_ghz", &C::detuning_ghz),
        number("crosstalk", "beam_waist_um", &C::beam_waist_um),
        number("crosstalk", "site_separation_um", &C::site_separation_um),
        text("integrator", "method", &C::method),
        number("integrator", "tolerance", &C::tolerance),
        number("integrator", "max_step_ns", &C::max_step_ns),
        number("integrator", "fixed_step_ps", &C::fixed_step_ps),
        integer("integrator", "trajectories", &C::trajectories),
        integer("integrator", "threads", &C::threads),
        text("output", "dir", &C::out_dir),
        text("output", "name", &C::name, true),
    };
    // [scan] is optional as a whole.
    auto scan_field = [](std::string key) {
      return Field{"scan", key,
                   [key](const toml::node& n, C& c) -> std::optional<std::string> {
                     if (!c.scan) c.scan = ScanAxis{};
                     if (key == "axis") {
                       auto s = n.value_exact<std::string>();
                       if (!s) return "expected a string";
                       c.scan->name = *s;
                     } else if (key == "points") {
                       auto p = n.value_exact<int64_t>();
                       if (!p) return "expected an integer";
                       c.scan->points = static_cast<int>(*p);
                     } else {
                       auto x = as_number(n);
                       if (!x) return "expected a number";
                       (key == "start" ? c.scan->start : c.scan->stop) = *x;
                     }
                     return std::nullopt;
                   },
                   [key](const C& c, toml::table& t) {
                     if (!c.scan) return;
                     if (key == "axis") t.insert_or_assign(key, c.scan->name);
                     if (key == "start") t.insert_or_assign(key, c.scan->start);
                     if (key == "stop") t.insert_or_assign(key, c.scan->stop);
                     if (key == "points") {
                       t.insert_or_assign(key, static_cast<int64_t>(c.scan->points));
                     }
                   }};
    };
    for (const char* k : {"axis", "start", "stop", "points"}) v.push_back(scan_field(k));
    return v;
  }();
  return f;
}

bool known_protocol(const std::string& p) {
  return std::find(kProtocols.begin(), kProtocols.end(), p) != kProtocols.end();
}

std::string expected_axis(const std::string& protocol) {
  if (protocol == "raman_scan") return "raman_detuning_mhz";
  if (protocol == "eit_spectrum") return "coupling_detuning_mhz";
  if (protocol == "parity") return "phi_rad";
  return "";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> ScanAxis::values() const {
  if (points < 1) return {};
  if (points == 1) return {start};
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    out[static_cast<std::size_t>(i)] = start + (stop - start) * i / (points - 1);
  }
  return out;
}

std::string to_string(const Diagnostic& d) {
  return std::string(d.severity == Severity::Error ? "error" : "warning") + ": " + d.path + ": " +
         d.message;
}

ParseResult parse_config(const std::string& text, const std::string& source) {
  ParseResult out;
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    out.diagnostics.push_back({std::to_string(b.line) + ":" + std::to_string(b.column),
                               std::string(e.description()), Severity::Error});
    return out;
  }

  ExperimentConfig cfg;
  std::set<std::string> known_sections;
  for (const auto& f : fields()) {
    if (!f.section.empty()) known_sections.insert(f.section);
  }
  auto lookup = [](const std::string& section, const std::string& key) -> bool {
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) return true;
    }
    return false;
  };

  for (auto&& [k, node] : root) {
    const std::string key(k.str());
    if (node.is_table()) {
      if (!known_sections.count(key)) {
        out.diagnostics.push_back({key, "unknown section" + where(node), Severity::Error});
        continue;
      }
      for (auto&& [sk, sn] : *node.as_table()) {
        const std::string sub(sk.str());
        if (!lookup(key, sub)) {
          out.diagnostics.push_back({key + "." + sub, "unknown key" + where(sn), Severity::Error});
        }
      }
    } else if (!lookup("", key)) {
      out.diagnostics.push_back({key, "unknown key" + where(node), Severity::Error});
    }
  }

  for (const auto& f : fields()) {
    const toml::node* n = nullptr;
    if (f.section.empty()) {
      n = root.get(f.key);
    } else if (auto* t = root.get_as<toml::table>(f.section)) {
      n = t->get(f.key);
    }
    if (!n) continue;
    if (auto err = f.read(*n, cfg)) {
      out.diagnostics.push_back({f.path(), *err + where(*n), Severity::Error});
    }
  }
  if (cfg.scan) {
    const auto* t = root.get_as<toml::table>("scan");
    for (const char* k : {"axis", "start", "stop", "points"}) {
      if (!t->get(k)) {
        out.diagnostics.push_back({std::string("scan.") + k, "missing", Severity::Error});
      }
    }
  }
  if (!has_errors(out.diagnostics)) out.config = cfg;
  return out;
}

std::string serialize_config(const ExperimentConfig& config) {
  toml::table root;
  for (const auto& f : fields()) {
    if (f.section.empty()) {
      f.write(config, root);
      continue;
    }
    if (!root.contains(f.section)) root.insert(f.section, toml::table{});
    f.write(config, *root.get_as<toml::table>(f.section));
  }
  // Drop empty sections (an unset scan).
  std::vector<std::string> empty;
  for (auto&& [k, n] : root) {
    if (n.is_table() && n.as_table()->empty()) empty.emplace_back(k.str());
  }
  for (const auto& k : empty) root.erase(k);
  std::ostringstream os;
  os << root << "\n";
  return os.str();
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::Error) return true;
  }
  return false;
}

std::vector<Diagnostic> validate_config(const ExperimentConfig& c) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string path, std::string msg) {
    out.push_back({std::move(path), std::move(msg), Severity::Error});
  };
  auto warn = [&](std::string path, std::string msg) {
    out.push_back({std::move(path), std::move(msg), Severity::Warning});
  };
  auto positive = [&](const char* path, double v) {
    if (!(v > 0.0)) error(path, "must be > 0 (got " + fmt(v) + ")");
  };
  auto non_negative = [&](const char* path, double v) {
    if (!(v >= 0.0)) error(path, "must be >= 0 (got " + fmt(v) + ")");
  };

  if (c.protocol.empty()) {
    error("protocol", "missing; expected one of raman_scan, eit_spectrum, cnot_table, bell, "
                      "parity, ghz, darkstate, shifts");
  } else if (!known_protocol(c.protocol)) {
    error("protocol", "unknown protocol '" + c.protocol + "'");
  }
  if (c.preset != "6p32" && c.preset != "7p12") {
    error("scheme.preset", "gate protocols need preset 6p32 or 7p12 (got '" + c.preset + "')");
  }
  non_negative("scheme.raman_power_scale", c.raman_power_scale);
  non_negative("scheme.coupling_power_scale", c.coupling_power_scale);
  non_negative("scheme.probe_power_uw", c.probe_power_uw);
  non_negative("scheme.coupling_power_mw", c.coupling_power_mw);
  positive("scheme.waist_um", c.waist_um);
  if (c.intermediate_detuning_ghz) positive("scheme.intermediate_detuning_ghz", *c.intermediate_detuning_ghz);
  if (c.rydberg_rabi_mhz) positive("control.rydberg_rabi_mhz", *c.rydberg_rabi_mhz);
  non_negative("control.rydberg_dephasing_khz", c.rydberg_dephasing_khz);
  if (c.scatter_to_leakage && !c.full_ladder && !c.coupling_on_control) {
    warn("control.scatter_to_leakage", "has no effect without the full control ladder");
  }
  if (c.spacing_um) positive("geometry.spacing_um", *c.spacing_um);
  if (c.geometry != "line" && c.geometry != "right_angle") {
    error("geometry.layout", "expected line or right_angle");
  }
  if (c.interaction_mhz) non_negative("interaction.strength_mhz", *c.interaction_mhz);
  if (c.interaction_distance_um) positive("interaction.reference_distance_um", *c.interaction_distance_um);
  if (c.tau_us) positive("pulse.tau_us", *c.tau_us);
  positive("crosstalk.beam_waist_um", c.beam_waist_um);
  non_negative("crosstalk.site_separation_um", c.site_separation_um);

  if (c.protocol == "ghz") {
    for (int k : c.ghz_k) {
      if (k < 1 || k > 4) error("ghz.k", "k = " + std::to_string(k) + " outside the supported 1..4");
      if (c.geometry == "right_angle" && k != 2) {
        error("geometry.layout", "right_angle is defined for k = 2 only");
      }
    }
  }
  if (c.protocol == "cnot_table" && c.shots < 1) error("truth_table.shots", "must be >= 1");
  if (c.protocol == "darkstate") {
    positive("darkstate.coupling_rabi_mhz", c.coupling_rabi_mhz);
    non_negative("darkstate.probe_rabi_mhz", c.probe_rabi_mhz);
    if (c.detuning_ghz == 0.0) error("darkstate.detuning_ghz", "must be nonzero");
  }

  const std::string axis = expected_axis(c.protocol);
  if (!axis.empty()) {
    if (!c.scan) {
      error("scan", "protocol " + c.protocol + " needs a [scan] section over " + axis);
    } else {
      if (c.scan->name != axis) error("scan.axis", "expected '" + axis + "' for " + c.protocol);
      const int min_points = c.protocol == "parity" ? 3 : 1;
      if (c.scan->points < min_points) {
        error("scan.points", "need at least " + std::to_string(min_points) + " points");
      }
      if (c.scan->points > 1 && c.scan->start == c.scan->stop) {
        error("scan.stop", "equals scan.start; grid would not be monotone");
      }
      if (c.protocol == "parity" &&
          (std::min(c.scan->start, c.scan->stop) < 0.0 ||
           std::max(c.scan->start, c.scan->stop) > 2.0 * std::numbers::pi + 1e-12)) {
        error("scan", "phi must stay within [0, 2 pi]");
      }
    }
  } else if (c.scan && !c.protocol.empty()) {
    warn("scan", "ignored by protocol " + c.protocol);
  }

  try {
    integrator_method_from_string(c.method);
  } catch (const ModelError& e) {
    error("integrator.method", e.what());
  }
  positive("integrator.tolerance", c.tolerance);
  positive("integrator.max_step_ns", c.max_step_ns);
  positive("integrator.fixed_step_ps", c.fixed_step_ps);
  if (c.trajectories < 1) error("integrator.trajectories", "must be >= 1");
  if (c.threads < 0) error("integrator.threads", "must be >= 0");
  if (c.out_dir.empty()) error("output.dir", "must not be empty");

  // eit_spectrum rescales the probe to keep the area at pi for any tau.
  if (!has_errors(out) && c.protocol != "darkstate" && c.protocol != "eit_spectrum") {
    try {
      const GateModel m = model_from_config(c);
      const double omega_r = effective_rabi(m.target);
      if (omega_r > 0.0) {
        const double ideal = duration_for_pi_area(omega_r);
        if (std::abs(m.tau - ideal) > 0.01 * ideal) {
          warn("pulse.tau_us", "tau = " + fmt(to_us(m.tau)) + " us but the Raman pi-area needs " +
                                   fmt(to_us(ideal)) + " us at this probe power");
        }
      }
    } catch (const ModelError& e) {
      error("scheme", e.what());
    }
  }
  return out;
}

GateModel model_from_config(const ExperimentConfig& c) {
  const auto pd = protocol_defaults(c.preset);
  LevelScheme base = c.preset == "6p32"
                         ? preset_6p32(c.raman_power_scale, c.coupling_power_scale)
                         : preset_7p12(c.probe_power_uw * 1e-6, c.coupling_power_mw * 1e-3,
                                       c.waist_um,
                                       c.intermediate_detuning_ghz ? ghz(*c.intermediate_detuning_ghz)
                                                                   : 0.0);
  LevelScheme target =
      base.with_raman_detuning(c.raman_detuning_mhz ? mhz(*c.raman_detuning_mhz) : pd.raman_detuning)
          .with_coupling_detuning(c.coupling_detuning_mhz ? mhz(*c.coupling_detuning_mhz)
                                                          : pd.coupling_detuning);
  const double rydberg_rabi = c.rydberg_rabi_mhz ? mhz(*c.rydberg_rabi_mhz) : pd.rydberg_rabi;
  ControlOptions co;
  co.full_ladder = c.full_ladder || c.coupling_on_control;
  co.scatter_to_leakage = c.scatter_to_leakage;
  LevelScheme control = control_scheme(target, rydberg_rabi, co);

  InteractionSpec interaction = pd.interaction;
  if (c.interaction_mhz) interaction.reference_strength = mhz(*c.interaction_mhz);
  if (c.interaction_distance_um) interaction.reference_distance = *c.interaction_distance_um;

  CnotOptions cnot;
  cnot.coupling_on_control = c.coupling_on_control;
  IntegratorConfig integ;
  integ.method = integrator_method_from_string(c.method);
  integ.tolerance = c.tolerance;
  integ.max_step = c.max_step_ns * 1e-9;
  integ.fixed_step = c.fixed_step_ps * 1e-12;
  integ.trajectories = static_cast<std::size_t>(std::max(c.trajectories, 1));
  integ.seed = c.seed;
  integ.threads = c.threads > 0 ? static_cast<unsigned>(c.threads) : default_threads();
  return GateModel{c.preset,
                   std::move(target),
                   std::move(control),
                   interaction,
                   c.spacing_um ? *c.spacing_um : pd.spacing,
                   c.tau_us ? *c.tau_us * 1e-6 : pd.pulse_duration,
                   rydberg_rabi,
                   cnot,
                   PhaseOptions{},
                   integ,
                   khz(c.rydberg_dephasing_khz)};
}

std::string content_hash(const std::string& text) {
  const std::string blob = "blob " + std::to_string(text.size()) + '\0' + text;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

unsigned default_threads() {
  if (const char* env = std::getenv("EITGATE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

void write_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f << text;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

RunOutput run_experiment(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string config_text = serialize_config(c);
  // Output location and thread count do not change results, so they stay
  // out of the hash.
  ExperimentConfig hashed = c;
  hashed.out_dir = ".";
  hashed.name.clear();
  hashed.threads = 0;
  const std::string hash = content_hash(serialize_config(hashed));
  const std::vector<std::string> comments{"config_hash " + hash, "protocol " + c.protocol,
                                          std::string("tool eitgate ") + kToolVersion};
  std::filesystem::create_directories(c.out_dir);
  const std::string stem =
      (std::filesystem::path(c.out_dir) / (c.name.empty() ? c.protocol : c.name)).string();

  RunOutput out;
  Report& r = out.report;
  r.protocol = c.protocol;
  auto write_csv = [&](const std::string& csv) {
    write_atomic(stem + ".csv", csv);
    out.files.push_back(stem + ".csv");
  };

  if (c.protocol == "darkstate") {
    const double op = mhz(c.probe_rabi_mhz), oc = mhz(c.coupling_rabi_mhz), d = ghz(c.detuning_ghz);
    const auto ds = dark_states(op, oc);
    const auto h = eliminated_hamiltonian(op, oc, d);
    const auto he = eit_hamiltonian(op, oc, d);
    auto embed = [](const Eigen::Vector3cd& v) {
      Eigen::Vector4cd w(v[0], v[1], 0.0, v[2]);
      return w;
    };
    r.parameters = {{"probe_rabi_mhz", c.probe_rabi_mhz},
                    {"coupling_rabi_mhz", c.coupling_rabi_mhz},
                    {"detuning_ghz", c.detuning_ghz},
                    {"x", ds.x}};
    r.populations = {{"d2_rydberg_weight", std::norm(ds.d2[2])},
                     {"d2_ground_weight", std::norm(ds.d2[0]) + std::norm(ds.d2[1])}};
    r.coherence = {{"d1_residual_mhz", to_mhz((h * ds.d1).norm())},
                   {"d2_residual_mhz", to_mhz((h * ds.d2).norm())},
                   {"d1_e_coupling_mhz", to_mhz(std::abs((he * embed(ds.d1))[2]))},
                   {"d2_e_coupling_mhz", to_mhz(std::abs((he * embed(ds.d2))[2]))}};
  } else {
    const GateModel m = model_from_config(c);
    r.parameters = {{"tau_us", to_us(m.tau)},
                    {"raman_detuning_mhz", to_mhz(m.target.raman_detuning())},
                    {"coupling_detuning_mhz", to_mhz(m.target.coupling_detuning())},
                    {"rydberg_rabi_mhz", to_mhz(m.rydberg_rabi)},
                    {"spacing_um", m.spacing}};
    if (c.protocol == "shifts") {
      const double omega_r = effective_rabi(m.target);
      r.parameters["effective_rabi_mhz"] = to_mhz(omega_r);
      if (omega_r > 0.0) r.parameters["pi_area_duration_us"] = to_us(duration_for_pi_area(omega_r));
      r.parameters["raised_cosine_area_pi"] = raised_cosine_area(omega_r, m.tau) / std::numbers::pi;
      r.parameters["ac_stark_shift_mhz"] = to_mhz(ac_stark_shift(m.target));
      r.parameters["eit_break_margin"] =
          eit_break_margin(m.target, interaction_strength(m.interaction, m.spacing));
      r.parameters["interaction_mhz"] = to_mhz(interaction_strength(m.interaction, m.spacing));
      r.loss["crosstalk_intensity"] = crosstalk_bound(c.beam_waist_um, c.site_separation_um);
    } else if (c.protocol == "raman_scan") {
      std::vector<double> grid;
      for (double v : c.scan->values()) grid.push_back(mhz(v));
      const auto scan = raman_transfer_scan(m, grid);
      write_csv(scan_csv(scan, comments));
      const auto best = locate_maximum(scan);
      r.parameters["optimum_raman_detuning_mhz"] = best.position;
      r.fidelity["peak_transfer"] = best.value;
      r.loss["peak_transfer_error"] = 1.0 - best.value;
    } else if (c.protocol == "eit_spectrum") {
      std::vector<double> grid;
      for (double v : c.scan->values()) grid.push_back(mhz(v));
      // pulse.tau_us is the spectrum's pulse length; the probe is rescaled
      // from the preset's calibrated duration so the Raman area stays pi.
      GateModel calibrated = m;
      calibrated.tau = protocol_defaults(c.preset).pulse_duration;
      const auto scan = eit_spectrum(calibrated, grid, m.tau);
      write_csv(scan_csv(scan, comments));
      const auto dip = locate_minimum(scan);
      r.parameters["resonance_coupling_detuning_mhz"] = dip.position;
      r.populations["transfer_at_resonance"] = dip.value;
      double worst = 0.0;
      for (double v : scan.values) worst = std::max(worst, v);
      r.populations["max_transfer"] = worst;
    } else if (c.protocol == "cnot_table") {
      const auto t = cnot_truth_table(m, static_cast<std::size_t>(c.shots));
      write_csv(truth_table_csv(t, comments));
      r.fidelity = {{"cnot_raw", t.fidelity}, {"cnot_corrected", t.corrected_fidelity}};
      for (std::size_t i = 0; i < 4; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 4; ++j) row += t.raw[i][j];
        r.loss["missing_" + kBasisLabels[i]] = 1.0 - row;
      }
    } else if (c.protocol == "bell") {
      const auto b = simulate_bell(m);
      r = bell_json_sections(b.report, c.protocol);
      r.parameters = {{"tau_us", to_us(m.tau)},
                      {"raman_detuning_mhz", to_mhz(m.target.raman_detuning())},
                      {"coupling_detuning_mhz", to_mhz(m.target.coupling_detuning())},
                      {"rydberg_rabi_mhz", to_mhz(m.rydberg_rabi)},
                      {"spacing_um", m.spacing}};
    } else if (c.protocol == "parity") {
      const auto p = parity_curve(m, c.scan->values());
      std::vector<std::string> cm = comments;
      cm.push_back("fit " + std::string(p.fit.ok ? "ok" : "failed: " + p.fit.failure));
      write_csv(scan_csv(p.curve, cm));
      const auto params = r.parameters;
      r = bell_json_sections(p.bell, c.protocol);
      r.parameters = params;
      r.parameters["fit_amplitude"] = p.fit.amplitude;
      r.parameters["fit_offset"] = p.fit.offset;
      if (p.fit.ok) r.parameters["fit_phase_rad"] = p.fit.phase;
      r.info["fit"] = p.fit.ok ? "ok" : p.fit.failure;
    } else if (c.protocol == "ghz") {
      std::string csv;
      for (const auto& line : comments) csv += "# " + line + "\n";
      csv += "k,fidelity,standard_error,branch_phase_rad,signed_fidelity\n";
      for (int k : c.ghz_k) {
        const auto g = ghz_scaling(m, static_cast<std::size_t>(k), ghz_geometry_from_string(c.geometry),
                                   c.suppress_target_pairs);
        csv += std::to_string(k) + "," + fmt(g.fidelity) + "," + fmt(g.standard_error) + "," +
               fmt(g.branch_phase) + "," + fmt(g.signed_fidelity) + "\n";
        r.fidelity["k" + std::to_string(k)] = g.fidelity;
        r.fidelity["k" + std::to_string(k) + "_standard_error"] = g.standard_error;
      }
      write_csv(csv);
    }
  }
  r.protocol = c.protocol;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.info["config"] = config_text;
  r.info["config_hash"] = hash;
  r.info["tool_version"] = kToolVersion;
  r.info["wall_seconds"] = fmt(wall);
  write_atomic(stem + ".json", report_json(r));
  out.files.push_back(stem + ".json");
  return out;
}

}  // namespace eitgate
