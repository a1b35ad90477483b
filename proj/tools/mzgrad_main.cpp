#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mzgrad/csv.hpp"
#include "mzgrad/estimate.hpp"
#include "mzgrad/scenario.hpp"
#include "mzgrad/svg.hpp"

// mzgrad: run simulation scenarios, estimate differential phases from shot
// tables, and render CSV columns as standalone SVG figures.
//
// Exit codes: 0 success, 2 invalid input (config, CLI usage, bad columns),
// 3 numerical failure (fit did not produce a usable result).

namespace {

namespace scn = mzgrad::scenario;
namespace est = mzgrad::estimate;

std::string default_out_dir() {
  if (const char* env = std::getenv("MZGRAD_OUT"); env && *env) return env;
  return "out";
}

void print_manifest(const scn::RunManifest& man, const std::string& out_dir) {
  std::cout << "scenario " << man.scenario_name << " (seed " << man.seed << ", config "
            << man.config_digest << ")\n";
  for (const auto& f : man.files) std::cout << "  wrote " << out_dir << "/" << f << "\n";
  std::cout << "  wrote " << out_dir << "/" << man.scenario_name << "_manifest.json\n";
}

// ---------------------------------------------------------------- plotspec --

struct PlotSeriesSpec {
  std::string kind = "line";
  std::string x, y, yerr, label;
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  std::vector<PlotSeriesSpec> series;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

PlotSpec parse_plotspec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open plotspec: " + path);
  PlotSpec spec;
  std::string raw, section;
  int line = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw std::invalid_argument(path + " line " + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail("unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (section == "series")
        spec.series.emplace_back();
      else if (section != "plot")
        fail("unknown section [" + section + "] (expected plot or series)");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (section.empty()) fail("key '" + key + "' outside any section");
    if (section == "plot") {
      if (key == "title")
        spec.title = value;
      else if (key == "xlabel")
        spec.xlabel = value;
      else if (key == "ylabel")
        spec.ylabel = value;
      else
        fail("unknown key '" + key + "' in [plot]");
    } else {
      auto& s = spec.series.back();
      if (key == "kind")
        s.kind = value;
      else if (key == "x")
        s.x = value;
      else if (key == "y")
        s.y = value;
      else if (key == "yerr")
        s.yerr = value;
      else if (key == "label")
        s.label = value;
      else
        fail("unknown key '" + key + "' in [series]");
    }
  }
  if (spec.series.empty()) throw std::invalid_argument(path + ": no [series] section");
  return spec;
}

std::vector<double> pick_column(const mzgrad::csv::Table& table, const std::string& name,
                                const std::string& csv_path) {
  if (table.column(name) < 0) {
    std::string msg = "column '" + name + "' not found in " + csv_path + " (available:";
    for (const auto& h : table.header) msg += " " + h;
    throw std::invalid_argument(msg + ")");
  }
  return table.values(name);
}

int cmd_render(const std::string& csv_path, const std::string& spec_path,
               const std::string& out_file) {
  if (!std::filesystem::exists(csv_path))
    throw std::invalid_argument("no such file: " + csv_path);
  const auto table = mzgrad::csv::read(csv_path);
  const auto spec = parse_plotspec(spec_path);
  mzgrad::svg::Figure fig;
  fig.title = spec.title;
  fig.xlabel = spec.xlabel;
  fig.ylabel = spec.ylabel;
  for (const auto& ss : spec.series) {
    mzgrad::svg::Series out;
    if (ss.kind == "line")
      out.kind = mzgrad::svg::Series::Kind::line;
    else if (ss.kind == "scatter")
      out.kind = mzgrad::svg::Series::Kind::scatter;
    else if (ss.kind == "errorbar")
      out.kind = mzgrad::svg::Series::Kind::errorbar;
    else
      throw std::invalid_argument("unknown series kind '" + ss.kind +
                                  "' (expected line, scatter, errorbar)");
    if (ss.x.empty() || ss.y.empty())
      throw std::invalid_argument("every [series] needs x and y columns");
    out.x = pick_column(table, ss.x, csv_path);
    out.y = pick_column(table, ss.y, csv_path);
    if (!ss.yerr.empty()) out.yerr = pick_column(table, ss.yerr, csv_path);
    out.label = ss.label;
    fig.series.push_back(std::move(out));
  }
  mzgrad::svg::write_svg(out_file, fig);
  std::cout << "wrote " << out_file << "\n";
  return 0;
}

int cmd_estimate(const std::string& samples_path, int n_bootstrap, std::uint64_t seed,
                 const std::string& out_file) {
  if (!std::filesystem::exists(samples_path))
    throw std::invalid_argument("no such file: " + samples_path);
  const auto shots = mzgrad::interferometer::read_shots_csv(samples_path);
  const auto joint = est::joint_from_shots(shots);
  const auto cal = est::calibrate(joint);
  est::EstimateResult fit = est::mle_fit(joint, cal);
  if (n_bootstrap > 0)
    fit = est::bootstrap(fit, cal, static_cast<int>(joint.size()), n_bootstrap, seed,
                         mzgrad::ExecPolicy::parallel);
  std::cout << est::format_result(fit);
  if (!fit.converged) {
    std::cerr << "estimate: fit did not converge\n";
    return 3;
  }
  if (!out_file.empty()) {
    est::write_result(out_file, fit);
    std::cout << "wrote " << out_file << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapped-interferometer gradiometry: simulate, estimate, render"};
  app.set_version_flag("--version", std::string(scn::tool_version));
  app.require_subcommand(1);

  // run
  std::string run_config;
  std::string run_out = default_out_dir();
  std::optional<std::uint64_t> run_seed;
  auto* run = app.add_subcommand("run", "execute a scenario config file");
  run->add_option("config", run_config, "scenario config path")->required();
  run->add_option("--out", run_out, "output directory (default $MZGRAD_OUT or ./out)");
  run->add_option("--seed", run_seed, "override the config seed");

  // preset
  std::string preset_name;
  std::string preset_out = default_out_dir();
  std::optional<std::uint64_t> preset_seed;
  bool preset_list = false;
  bool preset_show = false;
  auto* preset = app.add_subcommand("preset", "run or inspect a built-in scenario");
  preset->add_option("name", preset_name, "preset name");
  preset->add_flag("--list", preset_list, "list available presets");
  preset->add_flag("--show", preset_show, "print the preset config instead of running");
  preset->add_option("--out", preset_out, "output directory (default $MZGRAD_OUT or ./out)");
  preset->add_option("--seed", preset_seed, "override the preset seed");

  // estimate
  std::string est_samples, est_out;
  int est_bootstrap = 0;
  std::uint64_t est_seed = 1;
  auto* estc = app.add_subcommand("estimate", "fit a differential phase to a shot table");
  estc->add_option("samples", est_samples, "CSV with shot_id, z1, z2 columns")->required();
  estc->add_option("--bootstrap", est_bootstrap, "bootstrap resamples (0 = off, else >= 100)");
  estc->add_option("--seed", est_seed, "bootstrap seed");
  estc->add_option("--out", est_out, "also write the report to this file");

  // render
  std::string render_csv, render_spec, render_out = "figure.svg";
  auto* render = app.add_subcommand("render", "plot CSV columns as an SVG figure");
  render->add_option("csv", render_csv, "data table")->required();
  render->add_option("plotspec", render_spec, "figure description (INI)")->required();
  render->add_option("--out", render_out, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // fold CLI11's usage-error codes into the documented validation code
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      std::ifstream in(run_config, std::ios::binary);
      if (!in) throw std::invalid_argument("cannot open config: " + run_config);
      std::stringstream buf;
      buf << in.rdbuf();
      const std::string text = buf.str();
      scn::Scenario s = scn::parse_scenario(text);
      if (run_seed) s.seed = *run_seed;
      print_manifest(scn::run_scenario(s, text, run_out), run_out);
      return 0;
    }
    if (*preset) {
      if (preset_list) {
        for (const auto& name : scn::presets()) std::cout << name << "\n";
        return 0;
      }
      if (preset_name.empty())
        throw std::invalid_argument("preset: give a name or --list");
      const std::string text = scn::preset_config(preset_name);
      if (preset_show) {
        std::cout << text;
        return 0;
      }
      scn::Scenario s = scn::parse_scenario(text);
      if (preset_seed) s.seed = *preset_seed;
      print_manifest(scn::run_scenario(s, text, preset_out), preset_out);
      return 0;
    }
    if (*estc) return cmd_estimate(est_samples, est_bootstrap, est_seed, est_out);
    if (*render) return cmd_render(render_csv, render_spec, render_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
