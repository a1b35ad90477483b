#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mzgrad/csv.hpp"
#include "mzgrad/scenario.hpp"

using namespace mzgrad;
namespace fs = std::filesystem;

namespace {

const std::string kTinyGradiometer = R"([scenario]
name = tiny
kind = gradiometer
seed = 42
shots = 60
outputs = csv, svg, json-summary

[sequence]
n_atoms = 40
t_s = 0.02
delta_rad_per_s = 80.0

[noise]
sigma_tech = 0.1
)";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void check_parse_error(const std::string& text, const std::string& needle) {
  try {
    (void)scenario::parse_scenario(text);
    FAIL("expected parse failure for: " << text);
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    INFO("message: " << what);
    CHECK(what.find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("parsing a minimal config") {
  const auto s = scenario::parse_scenario(kTinyGradiometer);
  CHECK(s.name == "tiny");
  CHECK(s.kind == scenario::Kind::gradiometer);
  CHECK(s.seed == 42);
  CHECK(s.n_shots == 60);
  CHECK(s.n_bootstrap == 0);
  CHECK(s.sequence.n_atoms == 40);
  CHECK(s.sequence.t_interrogation == 0.02);
  CHECK(s.sequence.delta == 80.0);
  CHECK(s.noise.sigma_tech == 0.1);
  CHECK(s.out_csv);
  CHECK(s.out_svg);
  CHECK(s.out_json);
  CHECK_FALSE(s.has_sweep);
  CHECK_FALSE(s.has_lattice);
  CHECK_FALSE(s.has_feshbach);
}

TEST_CASE("rejection diagnostics carry line numbers") {
  check_parse_error("[scenario]\nname = x\n[thermal]\n", "line 3");
  check_parse_error("[scenario]\nname = x\n[thermal]\n", "unknown section");
  // out-of-scope physics knobs are named, not silently dropped
  check_parse_error("[scenario]\nname = x\ntemperature = 50\n", "unknown key 'temperature'");
  check_parse_error("[scenario]\nname = x\nkind gradiometer\n", "expected 'key = value'");
  check_parse_error("name = x\n", "outside any section");
  check_parse_error("[scenario]\nname = x\n[scenario]\n", "duplicate section");
  check_parse_error("[scenario]\nname = x\nshots = ten\n", "expected a number");
  check_parse_error("[scenario]\nname = x\nshots = 7.5\n", "expected an integer");
  check_parse_error("[scenario]\nname = x\nkind = banana\n", "unknown kind");
  check_parse_error("[scenario]\nname = x\noutputs = csv, pdf\n", "unknown output");
  check_parse_error("[scenario]\nname = x\nshots =\n", "empty value");
}

TEST_CASE("semantic validation") {
  check_parse_error("[scenario]\nkind = gradiometer\n", "name is required");
  check_parse_error("[scenario]\nname = has space\n", "identifier");
  check_parse_error("[scenario]\nname = x\nbootstrap = 50\n", "at least 100");
  check_parse_error("[scenario]\nname = x\nshots = 3\n", "at least 5 shots");
  check_parse_error("[scenario]\nname = x\nkind = rabi\n[sweep]\nparameter = sequence.t_s\nvalues = 0, 0.1\n",
                    "lattice section or tunneling_hz");
  check_parse_error("[scenario]\nname = x\nkind = rabi\ntunneling_hz = 5\n", "sweep over sequence.t_s");
  check_parse_error(
      "[scenario]\nname = x\nkind = slope\ntunneling_hz = 5\n[sweep]\nparameter = sequence.t_s\nvalues = 0.2, 0.1\n",
      "strictly increasing");
  check_parse_error("[scenario]\nname = x\n[sweep]\nparameter = loss.rate\nvalues = 1\n",
                    "unknown sweep parameter");
  check_parse_error("[scenario]\nname = x\n[sweep]\nparameter = sequence.t_s\n",
                    "values must be nonempty");
}

TEST_CASE("presets are sorted, complete, and parseable") {
  const auto names = scenario::presets();
  REQUIRE(names.size() >= 6);
  CHECK(std::is_sorted(names.begin(), names.end()));
  for (const char* required : {"fig2_histogram", "fig2_rabi", "fig3_ellipse", "fig3_slope",
                               "fig4_decoherence", "fig5_echo"})
    CHECK(std::find(names.begin(), names.end(), required) != names.end());
  for (const auto& name : names) {
    const auto s = scenario::parse_scenario(scenario::preset_config(name));
    CHECK(s.name == name);
  }
  CHECK_THROWS_AS((void)scenario::preset_config("fig9_wishful"), std::invalid_argument);
}

TEST_CASE("config digest is fnv1a64 of the raw bytes") {
  CHECK(scenario::fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(scenario::fnv1a64_hex("a") == "af63dc4c8601ec8c");
  CHECK(scenario::fnv1a64_hex("hello") == "a430d84680aabd0b");
}

TEST_CASE("gradiometer scenario emits the advertised artifacts") {
  TempDir dir("mzgrad_scn_grad");
  const auto s = scenario::parse_scenario(kTinyGradiometer);
  const auto man = scenario::run_scenario(s, kTinyGradiometer, dir.path.string());

  CHECK(man.scenario_name == "tiny");
  CHECK(man.seed == 42);
  CHECK(man.version == scenario::tool_version);
  CHECK(man.config_digest == scenario::fnv1a64_hex(kTinyGradiometer));
  for (const char* f :
       {"tiny_samples.csv", "tiny_estimate.txt", "tiny_band.csv", "tiny_summary.json",
        "tiny_figure.svg"}) {
    CHECK(std::find(man.files.begin(), man.files.end(), f) != man.files.end());
    CHECK(fs::exists(dir.path / f));
  }
  CHECK(fs::exists(dir.path / "tiny_manifest.json"));

  const auto j = nlohmann::json::parse(slurp(dir.path / "tiny_manifest.json"));
  CHECK(j["scenario"] == "tiny");
  CHECK(j["seed"] == 42);
  CHECK(j["config_digest"] == man.config_digest);
  const auto sum = nlohmann::json::parse(slurp(dir.path / "tiny_summary.json"));
  CHECK(sum["estimate"]["m"] == 60);
  CHECK(sum["estimate"]["delta_phi_rad"].get<double>() >= 0.0);
}

TEST_CASE("reruns are byte-identical; reseeding changes the data") {
  TempDir a("mzgrad_scn_rep_a"), b("mzgrad_scn_rep_b"), c("mzgrad_scn_rep_c");
  auto s = scenario::parse_scenario(kTinyGradiometer);
  const auto man = scenario::run_scenario(s, kTinyGradiometer, a.path.string());
  (void)scenario::run_scenario(s, kTinyGradiometer, b.path.string());
  for (const auto& f : man.files) {
    INFO("artifact " << f);
    CHECK(slurp(a.path / f) == slurp(b.path / f));
  }
  s.seed = 43;
  (void)scenario::run_scenario(s, kTinyGradiometer, c.path.string());
  CHECK(slurp(a.path / "tiny_samples.csv") != slurp(c.path / "tiny_samples.csv"));
}

TEST_CASE("histogram scenario conserves counts") {
  TempDir dir("mzgrad_scn_hist");
  const std::string cfg = R"([scenario]
name = h
kind = histogram
seed = 9
shots = 500
bins = 21
outputs = csv, json-summary

[sequence]
n_atoms = 200

[noise]
sigma_bs2 = 0.004
)";
  const auto man = scenario::run_scenario(scenario::parse_scenario(cfg), cfg, dir.path.string());
  const auto table = csv::read((dir.path / "h_histogram.csv").string());
  REQUIRE(table.rows.size() == 21);
  double total = 0.0;
  for (const auto& row : table.rows) total += row[2];
  CHECK(total == 500.0);
  const auto sum = nlohmann::json::parse(slurp(dir.path / "h_summary.json"));
  // a splitter with small angle noise keeps z near the projection limit
  CHECK(sum["var_z"].get<double>() < 5.0 / 200.0);
  CHECK(std::abs(sum["mean_z"].get<double>()) < 0.05);
}

TEST_CASE("rabi scenario works from a bare tunneling rate") {
  TempDir dir("mzgrad_scn_rabi");
  const std::string cfg = R"([scenario]
name = r
kind = rabi
seed = 4
shots = 200
tunneling_hz = 6.0
outputs = csv, json-summary

[sequence]
n_atoms = 150

[sweep]
parameter = sequence.t_s
values = 0, 0.02, 0.04, 0.06, 0.08
)";
  (void)scenario::run_scenario(scenario::parse_scenario(cfg), cfg, dir.path.string());
  const auto table = csv::read((dir.path / "r_rabi.csv").string());
  REQUIRE(table.rows.size() == 5);
  CHECK(table.rows[0][1] == 1.0);  // everything starts in the left well
  const auto sum = nlohmann::json::parse(slurp(dir.path / "r_summary.json"));
  CHECK(sum["rabi_freq_hz"].get<double>() == 12.0);
}

TEST_CASE("slope scenario finds one window per time cluster") {
  TempDir dir("mzgrad_scn_slope");
  const std::string cfg = R"([scenario]
name = s
kind = slope
seed = 6
shots = 400
well_separation_um = 5.3
outputs = csv, json-summary

[sequence]
n_atoms = 200
delta_rad_per_s = 233.0718

[sweep]
parameter = sequence.t_s
values = 0.016, 0.018, 0.020, 0.022, 0.024, 0.083, 0.085, 0.087, 0.089, 0.091
)";
  (void)scenario::run_scenario(scenario::parse_scenario(cfg), cfg, dir.path.string());
  const auto sum = nlohmann::json::parse(slurp(dir.path / "s_summary.json"));
  REQUIRE(sum["windows"].size() == 2);
  // the first cluster descends (phase wrapped), the last ascends
  CHECK(sum["windows"][0]["slope_rad_per_s"].get<double>() < 0.0);
  CHECK(sum["windows"][1]["slope_rad_per_s"].get<double>() > 0.0);
  for (const auto& w : sum["windows"]) {
    const double omega_hz = w["omega_hz"].get<double>();
    CHECK(omega_hz == doctest::Approx(18.5).epsilon(0.06));
  }
}

TEST_CASE("echo scenario reports both variants") {
  TempDir dir("mzgrad_scn_echo");
  const std::string cfg = R"([scenario]
name = e
kind = echo_compare
seed = 8
shots = 300
outputs = csv

[sequence]
n_atoms = 100
delta_rad_per_s = 100.0

[noise]
sigma_tech = 0.3

[sweep]
parameter = sequence.t_s
values = 0.01, 0.03
)";
  (void)scenario::run_scenario(scenario::parse_scenario(cfg), cfg, dir.path.string());
  const auto table = csv::read((dir.path / "e_echo.csv").string());
  REQUIRE(table.rows.size() == 2);
  const int cp = table.column("sigma_plain");
  const int ce = table.column("sigma_echo");
  REQUIRE(cp >= 0);
  REQUIRE(ce >= 0);
  for (const auto& row : table.rows) CHECK(row[ce] < row[cp]);
}

TEST_CASE("load_scenario reads from disk and rejects missing files") {
  TempDir dir("mzgrad_scn_load");
  fs::create_directories(dir.path);
  const auto cfg_path = dir.path / "cfg.ini";
  std::ofstream(cfg_path) << kTinyGradiometer;
  const auto s = scenario::load_scenario(cfg_path.string());
  CHECK(s.name == "tiny");
  CHECK_THROWS_AS((void)scenario::load_scenario((dir.path / "absent.ini").string()),
                  std::invalid_argument);
}
