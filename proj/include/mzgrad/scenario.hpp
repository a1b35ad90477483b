#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mzgrad/interferometer.hpp"
#include "mzgrad/lattice.hpp"

// Scenario plumbing: a line-oriented config format describing a simulation +
// estimation pipeline, built-in presets reproducing the toolkit's reference
// figures at desk scale, and a manifest recording how artifacts were made.
//
// Config grammar (full reference in README.md): `[section]` headers, one
// `key = value` pair per line, `#` comments. Unknown sections or keys are
// rejected with a line diagnostic rather than ignored.

namespace mzgrad::scenario {

inline constexpr const char* tool_version = "0.1.0";

enum class Kind { gradiometer, rabi, histogram, echo_compare, slope };

struct LatticeSection {
  lattice::LatticeSpec site{1064.0, 100.0, 0.0};
  lattice::LatticeSpec barrier{532.0, 0.0, 1.5707963267948966};
  lattice::GridSpec grid{-5.0, 5.0, 4001};
  double harmonic_freq_hz = 0.0;
};

struct SweepSection {
  std::string parameter;  // dotted path, e.g. "sequence.t_s"
  std::vector<double> values;
};

struct Scenario {
  std::string name;
  Kind kind = Kind::gradiometer;
  std::uint64_t seed = 1;
  int n_shots = 400;
  int n_bootstrap = 0;  // 0 skips the bootstrap stage
  int histogram_bins = 61;
  double tunneling_hz = 0.0;        // rabi kind without a lattice section
  double well_separation_um = 5.3;  // slope kind: baseline for omega recovery
  interferometer::SequenceConfig sequence;
  interferometer::NoiseConfig noise;
  bool has_feshbach = false;
  interferometer::FeshbachModel feshbach;
  double b_gauss = 350.45;
  bool has_lattice = false;
  LatticeSection lattice;
  bool has_sweep = false;
  SweepSection sweep;
  bool out_csv = true, out_svg = false, out_json = false;
};

// throws std::invalid_argument with a line/field diagnostic on bad input
Scenario parse_scenario(const std::string& config_text);
Scenario load_scenario(const std::string& config_path);

// built-in scenario names, sorted
std::vector<std::string> presets();
// config text of a built-in scenario; throws std::invalid_argument on unknown
std::string preset_config(const std::string& name);

struct RunManifest {
  std::string scenario_name;
  std::uint64_t seed = 0;
  std::string version;
  std::string timestamp_utc;   // not covered by byte-identity guarantees
  std::string config_digest;   // fnv1a64 of the config bytes, hex
  std::vector<std::string> files;  // artifact names relative to the out dir
};

std::string fnv1a64_hex(const std::string& bytes);

// executes the configured pipeline, writes artifacts plus manifest.json into
// out_dir (created if missing), returns the manifest. Identical config and
// seed produce byte-identical CSV and SVG artifacts.
RunManifest run_scenario(const Scenario& s, const std::string& config_text,
                         const std::string& out_dir);
RunManifest run_scenario_file(const std::string& config_path, const std::string& out_dir);

}  // namespace mzgrad::scenario
