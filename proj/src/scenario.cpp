#include "mzgrad/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mzgrad/csv.hpp"
#include "mzgrad/estimate.hpp"
#include "mzgrad/rng.hpp"
#include "mzgrad/svg.hpp"
#include "mzgrad/twomode.hpp"
#include "mzgrad/units.hpp"

namespace mzgrad::scenario {

namespace {

using nlohmann::ordered_json;

// ---------------------------------------------------------------- parsing --

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& v, int line) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    fail(line, "expected a number, got '" + v + "'");
  }
  if (used != v.size()) fail(line, "trailing characters after number in '" + v + "'");
  return out;
}

int to_int(const std::string& v, int line) {
  const double d = to_double(v, line);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) fail(line, "expected an integer, got '" + v + "'");
  return i;
}

std::uint64_t to_u64(const std::string& v, int line) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    fail(line, "expected an unsigned integer, got '" + v + "'");
  }
  if (used != v.size()) fail(line, "trailing characters after number in '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(line, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

Kind to_kind(const std::string& v, int line) {
  if (v == "gradiometer") return Kind::gradiometer;
  if (v == "rabi") return Kind::rabi;
  if (v == "histogram") return Kind::histogram;
  if (v == "echo_compare") return Kind::echo_compare;
  if (v == "slope") return Kind::slope;
  fail(line, "unknown kind '" + v +
                 "' (expected gradiometer | rabi | histogram | echo_compare | slope)");
}

void apply_parameter(Scenario& s, const std::string& path, double v) {
  if (path == "sequence.t_s")
    s.sequence.t_interrogation = v;
  else if (path == "sequence.epsilon_rad_per_s")
    s.sequence.epsilon = v;
  else if (path == "sequence.delta_rad_per_s")
    s.sequence.delta = v;
  else if (path == "sequence.chi_rad_per_s")
    s.sequence.chi = v;
  else if (path == "noise.sigma_tech")
    s.noise.sigma_tech = v;
  else if (path == "noise.sigma_bs2")
    s.noise.sigma_bs2 = v;
  else if (path == "feshbach.b_gauss")
    s.b_gauss = v;
  else
    throw std::invalid_argument(
        "unknown sweep parameter '" + path +
        "' (supported: sequence.t_s, sequence.epsilon_rad_per_s, sequence.delta_rad_per_s, "
        "sequence.chi_rad_per_s, noise.sigma_tech, noise.sigma_bs2, feshbach.b_gauss)");
}

void validate_scenario(const Scenario& s) {
  if (s.name.empty()) throw std::invalid_argument("scenario: name is required");
  for (char c : s.name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      throw std::invalid_argument("scenario: name must be an identifier, got '" + s.name + "'");
  if (s.n_shots < 1) throw std::invalid_argument("scenario: shots must be positive");
  if (s.n_bootstrap != 0 && s.n_bootstrap < 100)
    throw std::invalid_argument("scenario: bootstrap must be 0 (off) or at least 100");
  if (s.histogram_bins < 2) throw std::invalid_argument("scenario: bins must be at least 2");

  if (s.has_sweep) {
    if (s.sweep.values.empty()) throw std::invalid_argument("sweep: values must be nonempty");
    Scenario probe = s;
    for (double v : s.sweep.values) apply_parameter(probe, s.sweep.parameter, v);
  }
  const bool time_sweep = s.has_sweep && s.sweep.parameter == "sequence.t_s";
  switch (s.kind) {
    case Kind::gradiometer:
      if (s.n_shots < 5)
        throw std::invalid_argument("scenario: gradiometer estimation needs at least 5 shots");
      break;
    case Kind::rabi:
      if (!time_sweep)
        throw std::invalid_argument("scenario: rabi needs a sweep over sequence.t_s");
      if (!s.has_lattice && !(s.tunneling_hz > 0.0))
        throw std::invalid_argument(
            "scenario: rabi needs a lattice section or tunneling_hz > 0");
      break;
    case Kind::histogram:
      break;
    case Kind::echo_compare:
      if (!time_sweep)
        throw std::invalid_argument("scenario: echo_compare needs a sweep over sequence.t_s");
      if (s.n_shots < 5)
        throw std::invalid_argument("scenario: echo_compare estimation needs at least 5 shots");
      break;
    case Kind::slope: {
      if (!time_sweep)
        throw std::invalid_argument("scenario: slope needs a sweep over sequence.t_s");
      if (!std::is_sorted(s.sweep.values.begin(), s.sweep.values.end()) ||
          std::adjacent_find(s.sweep.values.begin(), s.sweep.values.end()) !=
              s.sweep.values.end())
        throw std::invalid_argument("scenario: slope sweep times must be strictly increasing");
      if (s.sweep.values.size() < 2)
        throw std::invalid_argument("scenario: slope needs at least two sweep times");
      if (!(s.well_separation_um > 0.0))
        throw std::invalid_argument("scenario: slope needs well_separation_um > 0");
      break;
    }
  }
  auto seq = s.sequence;
  if (s.kind == Kind::echo_compare) {
    // the runner derives both the plain and the echoed variant itself
    seq.echo = true;
    if (seq.n_echo_pulses < 1) seq.n_echo_pulses = 1;
  }
  interferometer::validate(seq);
  interferometer::validate(s.noise);
}

}  // namespace

Scenario parse_scenario(const std::string& config_text) {
  Scenario s;
  std::istringstream in(config_text);
  std::string raw;
  int line = 0;
  std::string section;
  std::set<std::string> seen;
  bool saw_echo_pulses = false;

  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;

    if (text.front() == '[') {
      if (text.back() != ']') fail(line, "unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      static const std::set<std::string> known{"scenario", "sequence", "noise",
                                               "feshbach", "lattice",  "sweep"};
      if (!known.count(section))
        fail(line, "unknown section [" + section +
                       "] (expected scenario, sequence, noise, feshbach, lattice, sweep)");
      if (!seen.insert(section).second) fail(line, "duplicate section [" + section + "]");
      if (section == "feshbach") s.has_feshbach = true;
      if (section == "lattice") s.has_lattice = true;
      if (section == "sweep") s.has_sweep = true;
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + text + "'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    if (value.empty()) fail(line, "empty value for key '" + key + "'");
    if (section.empty()) fail(line, "key '" + key + "' outside any section");

    if (section == "scenario") {
      if (key == "name")
        s.name = value;
      else if (key == "kind")
        s.kind = to_kind(value, line);
      else if (key == "seed")
        s.seed = to_u64(value, line);
      else if (key == "shots")
        s.n_shots = to_int(value, line);
      else if (key == "bootstrap")
        s.n_bootstrap = to_int(value, line);
      else if (key == "bins")
        s.histogram_bins = to_int(value, line);
      else if (key == "tunneling_hz")
        s.tunneling_hz = to_double(value, line);
      else if (key == "well_separation_um")
        s.well_separation_um = to_double(value, line);
      else if (key == "outputs") {
        s.out_csv = s.out_svg = s.out_json = false;
        for (const auto& tok : split_list(value)) {
          if (tok == "csv")
            s.out_csv = true;
          else if (tok == "svg")
            s.out_svg = true;
          else if (tok == "json-summary")
            s.out_json = true;
          else
            fail(line, "unknown output '" + tok + "' (expected csv, svg, json-summary)");
        }
      } else
        fail(line, "unknown key '" + key + "' in [scenario]");
    } else if (section == "sequence") {
      if (key == "n_atoms")
        s.sequence.n_atoms = to_int(value, line);
      else if (key == "t_s")
        s.sequence.t_interrogation = to_double(value, line);
      else if (key == "epsilon_rad_per_s")
        s.sequence.epsilon = to_double(value, line);
      else if (key == "delta_rad_per_s")
        s.sequence.delta = to_double(value, line);
      else if (key == "chi_rad_per_s")
        s.sequence.chi = to_double(value, line);
      else if (key == "echo")
        s.sequence.echo = to_bool(value, line);
      else if (key == "n_echo_pulses") {
        s.sequence.n_echo_pulses = to_int(value, line);
        saw_echo_pulses = true;
      } else
        fail(line, "unknown key '" + key + "' in [sequence]");
    } else if (section == "noise") {
      if (key == "sigma_bs2")
        s.noise.sigma_bs2 = to_double(value, line);
      else if (key == "sigma_tech")
        s.noise.sigma_tech = to_double(value, line);
      else if (key == "phase_offset_rad")
        s.noise.common_phase_law.offset_rad = to_double(value, line);
      else if (key == "phase_width_rad")
        s.noise.common_phase_law.width_rad = to_double(value, line);
      else
        fail(line, "unknown key '" + key + "' in [noise]");
    } else if (section == "feshbach") {
      if (key == "b_gauss")
        s.b_gauss = to_double(value, line);
      else if (key == "b_min_gauss")
        s.feshbach.b_min_gauss = to_double(value, line);
      else if (key == "slope_a")
        s.feshbach.slope_a = to_double(value, line);
      else if (key == "chi_dd")
        s.feshbach.chi_dd = to_double(value, line);
      else
        fail(line, "unknown key '" + key + "' in [feshbach]");
    } else if (section == "lattice") {
      if (key == "site_wavelength_nm")
        s.lattice.site.wavelength_nm = to_double(value, line);
      else if (key == "site_depth_nk")
        s.lattice.site.depth_nk = to_double(value, line);
      else if (key == "site_phase_rad")
        s.lattice.site.phase_rad = to_double(value, line);
      else if (key == "barrier_wavelength_nm")
        s.lattice.barrier.wavelength_nm = to_double(value, line);
      else if (key == "barrier_depth_nk")
        s.lattice.barrier.depth_nk = to_double(value, line);
      else if (key == "barrier_phase_rad")
        s.lattice.barrier.phase_rad = to_double(value, line);
      else if (key == "x_min_um")
        s.lattice.grid.x_min_um = to_double(value, line);
      else if (key == "x_max_um")
        s.lattice.grid.x_max_um = to_double(value, line);
      else if (key == "n_points")
        s.lattice.grid.n_points = to_int(value, line);
      else if (key == "harmonic_freq_hz")
        s.lattice.harmonic_freq_hz = to_double(value, line);
      else
        fail(line, "unknown key '" + key + "' in [lattice]");
    } else if (section == "sweep") {
      if (key == "parameter")
        s.sweep.parameter = value;
      else if (key == "values") {
        s.sweep.values.clear();
        for (const auto& tok : split_list(value)) s.sweep.values.push_back(to_double(tok, line));
      } else
        fail(line, "unknown key '" + key + "' in [sweep]");
    }
  }

  // spin-echo configs almost always mean one pi pulse; default it when unset
  if (s.sequence.echo && !saw_echo_pulses && s.sequence.n_echo_pulses == 0)
    s.sequence.n_echo_pulses = 1;

  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& config_path) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config: " + config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

// ---------------------------------------------------------------- presets --

namespace {

const std::map<std::string, const char*>& preset_table() {
  static const std::map<std::string, const char*> table{
      {"fig2_histogram", R"(# imbalance histogram after a single noisy splitter
[scenario]
name = fig2_histogram
kind = histogram
seed = 2
shots = 2000
bins = 61
outputs = csv, svg, json-summary

[sequence]
n_atoms = 3000

[noise]
sigma_bs2 = 0.004
)"},
      {"fig2_rabi", R"(# tunneling Rabi oscillation between the wells of the beat-note lattice
[scenario]
name = fig2_rabi
kind = rabi
seed = 3
shots = 300
outputs = csv, svg, json-summary

[sequence]
n_atoms = 100

[lattice]
site_wavelength_nm = 21133.96
site_depth_nk = 100
site_phase_rad = 0
barrier_wavelength_nm = 10603.36
barrier_depth_nk = 60
barrier_phase_rad = 1.5707963267948966
x_min_um = -5.2835
x_max_um = 5.2835
n_points = 4001

[sweep]
parameter = sequence.t_s
values = 0, 0.0125, 0.025, 0.0375, 0.05, 0.0625, 0.075, 0.0875, 0.1, 0.1125, 0.125, 0.1375, 0.15, 0.1625, 0.175, 0.1875, 0.2, 0.2125, 0.225, 0.2375, 0.25
)"},
      {"fig3_ellipse", R"(# joint imbalance scatter with the fitted fringe ellipse
[scenario]
name = fig3_ellipse
kind = gradiometer
seed = 5
shots = 400
bootstrap = 100
outputs = csv, svg, json-summary

[sequence]
n_atoms = 100
t_s = 0.02
delta_rad_per_s = 233.0718

[noise]
sigma_bs2 = 0.004
sigma_tech = 0.15

[feshbach]
b_gauss = 350.45
)"},
      {"fig3_slope", R"(# differential phase versus interrogation time in three windows
[scenario]
name = fig3_slope
kind = slope
seed = 7
shots = 1000
bootstrap = 100
well_separation_um = 5.3
outputs = csv, svg, json-summary

[sequence]
n_atoms = 100
delta_rad_per_s = 233.0718

[noise]
sigma_bs2 = 0.004
sigma_tech = 0.15

[feshbach]
b_gauss = 350.45

[sweep]
parameter = sequence.t_s
values = 0.016, 0.018, 0.02, 0.022, 0.024, 0.042, 0.044, 0.046, 0.048, 0.05, 0.083, 0.085, 0.087, 0.089, 0.091
)"},
      {"fig4_decoherence", R"(# phase spread versus magnetic field across the interaction zero crossing
[scenario]
name = fig4_decoherence
kind = gradiometer
seed = 11
shots = 3000
outputs = csv, svg, json-summary

[sequence]
n_atoms = 100
t_s = 0.07
delta_rad_per_s = 233.0718

[noise]
sigma_bs2 = 0.004
sigma_tech = 0.15

[feshbach]
b_gauss = 350.45

[sweep]
parameter = feshbach.b_gauss
values = 348.45, 348.95, 349.45, 349.95, 350.45, 350.95, 351.45, 351.95, 352.45
)"},
      {"fig5_echo", R"(# phase spread with and without a spin echo at the interaction zero
[scenario]
name = fig5_echo
kind = echo_compare
seed = 13
shots = 2000
outputs = csv, svg, json-summary

[sequence]
n_atoms = 100
delta_rad_per_s = 233.0718
n_echo_pulses = 1

[noise]
sigma_bs2 = 0.004
sigma_tech = 0.15

[feshbach]
b_gauss = 350.45

[sweep]
parameter = sequence.t_s
values = 0.01, 0.025, 0.04, 0.055, 0.07, 0.085, 0.1
)"},
  };
  return table;
}

}  // namespace

std::vector<std::string> presets() {
  std::vector<std::string> names;
  for (const auto& [name, text] : preset_table()) names.push_back(name);
  return names;  // std::map iteration is already sorted
}

std::string preset_config(const std::string& name) {
  const auto& table = preset_table();
  const auto it = table.find(name);
  if (it == table.end()) {
    std::string msg = "unknown preset '" + name + "' (available:";
    for (const auto& [n, t] : table) msg += " " + n;
    throw std::invalid_argument(msg + ")");
  }
  return it->second;
}

// -------------------------------------------------------------- execution --

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// collects artifact paths as they are emitted
struct Emitter {
  std::filesystem::path dir;
  std::string prefix;
  std::vector<std::string>* files;
  std::string operator()(const std::string& base) {
    const std::string name = prefix + base;
    files->push_back(name);
    return (dir / name).string();
  }
};

interferometer::SequenceConfig effective_sequence(const Scenario& s) {
  auto seq = s.sequence;
  if (s.has_feshbach) seq.chi = interferometer::chi_of_b(s.feshbach, s.b_gauss);
  return seq;
}

estimate::EstimateResult fit_shots(const Scenario& s,
                                   const std::vector<interferometer::ShotPair>& shots,
                                   estimate::Calibration* calib_out = nullptr) {
  const estimate::JointSamples joint = estimate::joint_from_shots(shots);
  const estimate::Calibration cal = estimate::calibrate(joint);
  estimate::EstimateResult fit = estimate::mle_fit(joint, cal);
  if (s.n_bootstrap > 0)
    fit = estimate::bootstrap(fit, cal, static_cast<int>(joint.size()), s.n_bootstrap, s.seed,
                              ExecPolicy::parallel);
  if (calib_out) *calib_out = cal;
  return fit;
}

ordered_json result_json(const estimate::EstimateResult& fit) {
  ordered_json j;
  j["delta_phi_rad"] = fit.delta_phi;
  j["sigma_rad"] = fit.sigma;
  j["se_delta_phi"] = fit.se_delta_phi;
  j["se_sigma"] = fit.se_sigma;
  j["log_likelihood_at_max"] = fit.log_likelihood_at_max;
  j["m"] = fit.m;
  j["n_bootstrap"] = fit.n_bootstrap;
  j["n_bootstrap_failed"] = fit.n_bootstrap_failed;
  j["ambiguity_flag"] = fit.ambiguity_flag;
  j["converged"] = fit.converged;
  j["calibration"] = {{"c1", fit.calibration.c1},
                      {"c2", fit.calibration.c2},
                      {"v1", fit.calibration.v1},
                      {"v2", fit.calibration.v2}};
  return j;
}

void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

void run_gradiometer_kind(const Scenario& s, Emitter& emit) {
  const auto seq = effective_sequence(s);
  auto noise = s.noise;
  noise.seed = s.seed;

  if (!s.has_sweep) {
    const auto shots = interferometer::run_gradiometer(seq, noise, s.n_shots,
                                                       ExecPolicy::parallel);
    if (s.out_csv) interferometer::write_shots_csv(emit("samples.csv"), shots);
    estimate::Calibration cal;
    const auto fit = fit_shots(s, shots, &cal);
    if (s.out_csv) {
      estimate::write_result(emit("estimate.txt"), fit);
      estimate::write_confidence_band_csv(emit("band.csv"), fit);
    }
    if (s.out_json) {
      ordered_json j;
      j["name"] = s.name;
      j["kind"] = "gradiometer";
      j["estimate"] = result_json(fit);
      write_json(emit("summary.json"), j);
    }
    if (s.out_svg) {
      svg::Figure fig;
      fig.title = s.name;
      fig.xlabel = "z1";
      fig.ylabel = "z2";
      svg::Series pts;
      pts.kind = svg::Series::Kind::scatter;
      pts.label = "shots";
      for (const auto& p : shots) {
        pts.x.push_back(p.z1);
        pts.y.push_back(p.z2);
      }
      fig.series.push_back(std::move(pts));
      fig.series.push_back(svg::ellipse_series(cal.c1, cal.c2, cal.v1, cal.v2, fit.delta_phi,
                                               181, "fit"));
      if (fit.se_delta_phi > 0.0) {
        const double k = 1.6448536269514722;  // 90% two-sided normal quantile
        fig.series.push_back(svg::ellipse_series(cal.c1, cal.c2, cal.v1, cal.v2,
                                                 fit.delta_phi - k * fit.se_delta_phi, 181,
                                                 "90% band"));
        fig.series.push_back(svg::ellipse_series(cal.c1, cal.c2, cal.v1, cal.v2,
                                                 fit.delta_phi + k * fit.se_delta_phi, 181,
                                                 ""));
      }
      svg::write_svg(emit("figure.svg"), fig);
    }
    return;
  }

  // sweep: one estimate per parameter value
  const bool b_sweep = s.sweep.parameter == "feshbach.b_gauss";
  std::vector<std::string> header{s.sweep.parameter, "delta_phi_rad", "sigma_rad",
                                  "se_delta_phi",    "se_sigma",      "predicted_sigma"};
  if (b_sweep)
    header.insert(header.end(), {"pred_bs0_tech0", "pred_bs004_tech0", "pred_bs0_tech015",
                                 "pred_bs004_tech015"});
  std::vector<std::vector<double>> rows;
  ordered_json points = ordered_json::array();
  for (double v : s.sweep.values) {
    Scenario pt = s;
    apply_parameter(pt, s.sweep.parameter, v);
    const auto pseq = effective_sequence(pt);
    auto pnoise = pt.noise;
    pnoise.seed = s.seed;
    const auto shots = interferometer::run_gradiometer(pseq, pnoise, s.n_shots,
                                                       ExecPolicy::parallel);
    const auto fit = fit_shots(s, shots);
    std::vector<double> row{v, fit.delta_phi, fit.sigma, fit.se_delta_phi, fit.se_sigma,
                            interferometer::predicted_sigma(pseq.n_atoms, pnoise.sigma_bs2,
                                                            pseq.chi, pseq.t_interrogation,
                                                            pnoise.sigma_tech)};
    if (b_sweep)
      for (double bs2 : {0.0, 0.004})
        for (double tech : {0.0, 0.15})
          row.push_back(interferometer::predicted_sigma(pseq.n_atoms, bs2, pseq.chi,
                                                        pseq.t_interrogation, tech));
    rows.push_back(std::move(row));
    ordered_json p;
    p[s.sweep.parameter] = v;
    p["estimate"] = result_json(fit);
    points.push_back(std::move(p));
  }
  if (s.out_csv) csv::write(emit("sweep.csv"), header, rows);
  if (s.out_json) {
    ordered_json j;
    j["name"] = s.name;
    j["kind"] = "gradiometer";
    j["points"] = std::move(points);
    write_json(emit("summary.json"), j);
  }
  if (s.out_svg) {
    svg::Figure fig;
    fig.title = s.name;
    fig.xlabel = s.sweep.parameter;
    if (b_sweep) {
      fig.ylabel = "sigma_dphi (rad)";
      svg::Series pts;
      pts.kind = svg::Series::Kind::errorbar;
      pts.label = "fit";
      for (const auto& r : rows) {
        pts.x.push_back(r[0]);
        pts.y.push_back(r[2]);
        pts.yerr.push_back(r[4]);
      }
      fig.series.push_back(std::move(pts));
      const char* labels[] = {"bs2 0, tech 0", "bs2 4e-3, tech 0", "bs2 0, tech 0.15",
                              "bs2 4e-3, tech 0.15"};
      for (int c = 0; c < 4; ++c) {
        svg::Series line;
        line.kind = svg::Series::Kind::line;
        line.label = labels[c];
        for (const auto& r : rows) {
          line.x.push_back(r[0]);
          line.y.push_back(r[6 + c]);
        }
        fig.series.push_back(std::move(line));
      }
    } else {
      fig.ylabel = "delta_phi (rad)";
      svg::Series pts;
      pts.kind = svg::Series::Kind::errorbar;
      pts.label = "estimate";
      for (const auto& r : rows) {
        pts.x.push_back(r[0]);
        pts.y.push_back(r[1]);
        pts.yerr.push_back(r[3]);
      }
      fig.series.push_back(std::move(pts));
    }
    svg::write_svg(emit("figure.svg"), fig);
  }
}

void run_slope_kind(const Scenario& s, Emitter& emit) {
  // per-point estimates first, exactly like a gradiometer time sweep
  const auto seq0 = effective_sequence(s);
  std::vector<std::vector<double>> rows;
  for (double t : s.sweep.values) {
    auto seq = seq0;
    seq.t_interrogation = t;
    auto noise = s.noise;
    noise.seed = s.seed;
    const auto shots = interferometer::run_gradiometer(seq, noise, s.n_shots,
                                                       ExecPolicy::parallel);
    const auto fit = fit_shots(s, shots);
    rows.push_back({t, fit.delta_phi, fit.sigma, fit.se_delta_phi, fit.se_sigma,
                    interferometer::predicted_sigma(seq.n_atoms, noise.sigma_bs2, seq.chi, t,
                                                    noise.sigma_tech)});
  }
  if (s.out_csv)
    csv::write(emit("sweep.csv"),
               {"sequence.t_s", "delta_phi_rad", "sigma_rad", "se_delta_phi", "se_sigma",
                "predicted_sigma"},
               rows);

  // group the sweep into contiguous windows separated by large gaps
  const auto& ts = s.sweep.values;
  double min_gap = ts.back() - ts.front();
  for (std::size_t i = 1; i < ts.size(); ++i) min_gap = std::min(min_gap, ts[i] - ts[i - 1]);
  std::vector<std::pair<std::size_t, std::size_t>> windows;  // [first, last]
  std::size_t first = 0;
  for (std::size_t i = 1; i <= ts.size(); ++i) {
    if (i == ts.size() || ts[i] - ts[i - 1] > 3.0 * min_gap) {
      windows.emplace_back(first, i - 1);
      first = i;
    }
  }

  const double d_m = s.well_separation_um * 1e-6;
  ordered_json jwin = ordered_json::array();
  std::vector<std::array<double, 4>> fits;  // t_lo, t_hi, intercept, slope
  for (const auto& [a, b] : windows) {
    if (b == a) continue;  // a lone point fixes no slope
    double st = 0.0, sp = 0.0, stt = 0.0, stp = 0.0;
    const double n = static_cast<double>(b - a + 1);
    for (std::size_t i = a; i <= b; ++i) {
      st += rows[i][0];
      sp += rows[i][1];
      stt += rows[i][0] * rows[i][0];
      stp += rows[i][0] * rows[i][1];
    }
    const double slope = (n * stp - st * sp) / (n * stt - st * st);
    const double intercept = (sp - slope * st) / n;
    const double delta_hat = std::abs(slope);
    const double omega = std::sqrt(delta_hat * units::hbar / (units::mass_k39 * d_m * d_m));
    ordered_json w;
    w["t_lo_s"] = ts[a];
    w["t_hi_s"] = ts[b];
    w["slope_rad_per_s"] = slope;
    w["delta_rad_per_s"] = delta_hat;
    w["omega_rad_per_s"] = omega;
    w["omega_hz"] = omega / units::two_pi;
    jwin.push_back(std::move(w));
    fits.push_back({ts[a], ts[b], intercept, slope});
  }
  if (s.out_json) {
    ordered_json j;
    j["name"] = s.name;
    j["kind"] = "slope";
    j["well_separation_um"] = s.well_separation_um;
    j["windows"] = std::move(jwin);
    write_json(emit("summary.json"), j);
  }
  if (s.out_svg) {
    svg::Figure fig;
    fig.title = s.name;
    fig.xlabel = "t (s)";
    fig.ylabel = "delta_phi (rad)";
    svg::Series pts;
    pts.kind = svg::Series::Kind::errorbar;
    pts.label = "estimate";
    for (const auto& r : rows) {
      pts.x.push_back(r[0]);
      pts.y.push_back(r[1]);
      pts.yerr.push_back(r[3]);
    }
    fig.series.push_back(std::move(pts));
    bool labeled = false;
    for (const auto& f : fits) {
      svg::Series line;
      line.kind = svg::Series::Kind::line;
      if (!labeled) {
        line.label = "window fit";
        labeled = true;
      }
      line.x = {f[0], f[1]};
      line.y = {f[2] + f[3] * f[0], f[2] + f[3] * f[1]};
      fig.series.push_back(std::move(line));
    }
    svg::write_svg(emit("figure.svg"), fig);
  }
}

void run_rabi_kind(const Scenario& s, Emitter& emit) {
  double tunneling = s.tunneling_hz;
  if (s.has_lattice) {
    const auto pot = lattice::build_potential({s.lattice.site, s.lattice.barrier},
                                              s.lattice.grid, s.lattice.harmonic_freq_hz);
    const auto modes = lattice::solve_modes(pot);
    tunneling = modes.tunneling_hz;
    if (s.out_csv) {
      lattice::write_potential_csv(emit("potential.csv"), pot);
      lattice::write_modes_csv(emit("modes.csv"), modes);
    }
  }
  const auto points = interferometer::rabi_scan(s.sequence.n_atoms, tunneling, s.sweep.values,
                                                s.n_shots, s.seed);
  if (s.out_csv) {
    std::vector<std::vector<double>> rows;
    for (const auto& p : points) rows.push_back({p.t_s, p.z1, p.z2});
    csv::write(emit("rabi.csv"), {"t_s", "z1", "z2"}, rows);
  }
  if (s.out_json) {
    ordered_json j;
    j["name"] = s.name;
    j["kind"] = "rabi";
    j["tunneling_hz"] = tunneling;
    j["rabi_freq_hz"] = 2.0 * tunneling;
    j["n_points"] = points.size();
    write_json(emit("summary.json"), j);
  }
  if (s.out_svg) {
    svg::Figure fig;
    fig.title = s.name;
    fig.xlabel = "t (s)";
    fig.ylabel = "mean z";
    svg::Series a, b;
    a.kind = b.kind = svg::Series::Kind::line;
    a.label = "interferometer 1";
    b.label = "interferometer 2";
    for (const auto& p : points) {
      a.x.push_back(p.t_s);
      a.y.push_back(p.z1);
      b.x.push_back(p.t_s);
      b.y.push_back(p.z2);
    }
    fig.series.push_back(std::move(a));
    fig.series.push_back(std::move(b));
    svg::write_svg(emit("figure.svg"), fig);
  }
}

void run_histogram_kind(const Scenario& s, Emitter& emit) {
  const int n = s.sequence.n_atoms;
  const double angle_std = interferometer::splitter_angle_std(s.noise.sigma_bs2);
  std::vector<double> z(s.n_shots);
  for (int i = 0; i < s.n_shots; ++i) {
    rng::Sequence gen(s.seed, rng::Stream::shots, static_cast<std::uint64_t>(i));
    const double eta = angle_std * gen.gaussian();
    const auto state = twomode::coherent_state(n, 0.5 * units::pi - eta, 0.5 * units::pi);
    z[i] = twomode::ZSampler(state).draw(gen.uniform());
  }
  double lo = *std::min_element(z.begin(), z.end());
  double hi = *std::max_element(z.begin(), z.end());
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const int bins = s.histogram_bins;
  std::vector<double> counts(bins, 0.0);
  for (double v : z) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    counts[b] += 1.0;
  }
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= z.size();
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= (z.size() - 1);

  if (s.out_csv) {
    std::vector<std::vector<double>> rows;
    for (int b = 0; b < bins; ++b)
      rows.push_back({lo + (hi - lo) * b / bins, lo + (hi - lo) * (b + 1) / bins, counts[b]});
    csv::write(emit("histogram.csv"), {"z_lo", "z_hi", "count"}, rows);
  }
  if (s.out_json) {
    ordered_json j;
    j["name"] = s.name;
    j["kind"] = "histogram";
    j["n_shots"] = s.n_shots;
    j["bins"] = bins;
    j["mean_z"] = mean;
    j["var_z"] = var;
    j["projection_var"] = 1.0 / n;
    write_json(emit("summary.json"), j);
  }
  if (s.out_svg) {
    svg::Figure fig;
    fig.title = s.name;
    fig.xlabel = "z";
    fig.ylabel = "count";
    svg::Series line;
    line.kind = svg::Series::Kind::line;
    line.label = "shots";
    for (int b = 0; b < bins; ++b) {
      line.x.push_back(lo + (hi - lo) * (b + 0.5) / bins);
      line.y.push_back(counts[b]);
    }
    fig.series.push_back(std::move(line));
    svg::write_svg(emit("figure.svg"), fig);
  }
}

void run_echo_kind(const Scenario& s, Emitter& emit) {
  const auto seq0 = effective_sequence(s);
  std::vector<std::vector<double>> rows;
  ordered_json points = ordered_json::array();
  for (double t : s.sweep.values) {
    auto plain = seq0;
    plain.t_interrogation = t;
    plain.echo = false;
    plain.n_echo_pulses = 0;
    auto echoed = seq0;
    echoed.t_interrogation = t;
    echoed.echo = true;
    if (echoed.n_echo_pulses < 1) echoed.n_echo_pulses = 1;
    auto noise = s.noise;
    noise.seed = s.seed;
    const auto fit_p =
        fit_shots(s, interferometer::run_gradiometer(plain, noise, s.n_shots,
                                                     ExecPolicy::parallel));
    const auto fit_e =
        fit_shots(s, interferometer::run_gradiometer(echoed, noise, s.n_shots,
                                                     ExecPolicy::parallel));
    rows.push_back({t, fit_p.sigma, fit_p.se_sigma, fit_e.sigma, fit_e.se_sigma});
    ordered_json p;
    p["t_s"] = t;
    p["sigma_plain"] = fit_p.sigma;
    p["sigma_echo"] = fit_e.sigma;
    points.push_back(std::move(p));
  }
  if (s.out_csv)
    csv::write(emit("echo.csv"), {"t_s", "sigma_plain", "se_plain", "sigma_echo", "se_echo"},
               rows);
  if (s.out_json) {
    ordered_json j;
    j["name"] = s.name;
    j["kind"] = "echo_compare";
    j["points"] = std::move(points);
    write_json(emit("summary.json"), j);
  }
  if (s.out_svg) {
    svg::Figure fig;
    fig.title = s.name;
    fig.xlabel = "t (s)";
    fig.ylabel = "sigma_dphi (rad)";
    svg::Series plain, echo;
    plain.kind = echo.kind = svg::Series::Kind::errorbar;
    plain.label = "no echo";
    echo.label = "echo";
    for (const auto& r : rows) {
      plain.x.push_back(r[0]);
      plain.y.push_back(r[1]);
      plain.yerr.push_back(r[2]);
      echo.x.push_back(r[0]);
      echo.y.push_back(r[3]);
      echo.yerr.push_back(r[4]);
    }
    fig.series.push_back(std::move(plain));
    fig.series.push_back(std::move(echo));
    svg::write_svg(emit("figure.svg"), fig);
  }
}

}  // namespace

RunManifest run_scenario(const Scenario& s, const std::string& config_text,
                         const std::string& out_dir) {
  validate_scenario(s);
  std::filesystem::create_directories(out_dir);
  RunManifest man;
  man.scenario_name = s.name;
  man.seed = s.seed;
  man.version = tool_version;
  man.timestamp_utc = now_utc();
  man.config_digest = fnv1a64_hex(config_text);
  Emitter emit{out_dir, s.name + "_", &man.files};

  switch (s.kind) {
    case Kind::gradiometer: run_gradiometer_kind(s, emit); break;
    case Kind::rabi: run_rabi_kind(s, emit); break;
    case Kind::histogram: run_histogram_kind(s, emit); break;
    case Kind::echo_compare: run_echo_kind(s, emit); break;
    case Kind::slope: run_slope_kind(s, emit); break;
  }

  ordered_json j;
  j["scenario"] = man.scenario_name;
  j["seed"] = man.seed;
  j["tool_version"] = man.version;
  j["timestamp_utc"] = man.timestamp_utc;
  j["config_digest"] = man.config_digest;
  j["files"] = man.files;
  write_json((std::filesystem::path(out_dir) / (s.name + "_manifest.json")).string(), j);
  return man;
}

RunManifest run_scenario_file(const std::string& config_path, const std::string& out_dir) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config: " + config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  return run_scenario(parse_scenario(text), text, out_dir);
}

}  // namespace mzgrad::scenario
