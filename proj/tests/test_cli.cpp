// End-to-end checks of the mzgrad binary: exit codes, artifact emission,
// determinism. Invoked by ctest with the binary path as the only argument.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  std::printf("%s  %s\n", ok ? "ok  " : "FAIL", what.c_str());
  if (!ok) ++g_failures;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cmd(const std::string& cmd) {
  const fs::path out_file = fs::temp_directory_path() / "mzgrad_cli_stdout";
  const fs::path err_file = fs::temp_directory_path() / "mzgrad_cli_stderr";
  const std::string full = cmd + " >" + out_file.string() + " 2>" + err_file.string();
  const int raw = std::system(full.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: test_cli <path-to-mzgrad-binary>\n";
    return 2;
  }
  const std::string bin = argv[1];
  const fs::path work = fs::temp_directory_path() / "mzgrad_cli_work";
  fs::remove_all(work);
  fs::create_directories(work);

  {
    const auto r = run_cmd(bin + " --version");
    check(r.exit_code == 0, "--version exits 0");
    check(contains(r.out, "0.1.0"), "--version prints the tool version");
  }
  {
    const auto r = run_cmd(bin);
    check(r.exit_code == 2, "missing subcommand exits 2");
  }
  {
    const auto r = run_cmd(bin + " preset --list");
    check(r.exit_code == 0, "preset --list exits 0");
    for (const char* name : {"fig2_histogram", "fig2_rabi", "fig3_ellipse", "fig3_slope",
                             "fig4_decoherence", "fig5_echo"})
      check(contains(r.out, name), std::string("preset list contains ") + name);
  }
  {
    const auto r = run_cmd(bin + " preset fig9_wishful --out " + (work / "x").string());
    check(r.exit_code == 2, "unknown preset exits 2");
    check(contains(r.err, "fig9_wishful"), "unknown preset named in the error");
  }
  {
    const auto r = run_cmd(bin + " run " + (work / "absent.ini").string());
    check(r.exit_code == 2, "missing config exits 2");
  }
  {
    const fs::path bad = work / "bad.ini";
    std::ofstream(bad) << "[scenario]\nname = bad\ntemperature = 50\n";
    const auto r = run_cmd(bin + " run " + bad.string());
    check(r.exit_code == 2, "out-of-scope knob exits 2");
    check(contains(r.err, "temperature"), "offending key named in the error");
    check(contains(r.err, "line 3"), "error carries the line number");
  }

  const fs::path cfg = work / "tiny.ini";
  std::ofstream(cfg) << "[scenario]\n"
                        "name = tiny\n"
                        "kind = gradiometer\n"
                        "seed = 12\n"
                        "shots = 80\n"
                        "outputs = csv, svg, json-summary\n"
                        "\n"
                        "[sequence]\n"
                        "n_atoms = 50\n"
                        "t_s = 0.02\n"
                        "delta_rad_per_s = 80\n";
  const fs::path out_a = work / "out_a";
  const fs::path out_b = work / "out_b";
  {
    const auto r = run_cmd(bin + " run " + cfg.string() + " --out " + out_a.string());
    check(r.exit_code == 0, "tiny scenario exits 0");
    for (const char* f : {"tiny_samples.csv", "tiny_estimate.txt", "tiny_band.csv",
                          "tiny_summary.json", "tiny_figure.svg", "tiny_manifest.json"})
      check(fs::exists(out_a / f), std::string("run emits ") + f);
  }
  {
    (void)run_cmd(bin + " run " + cfg.string() + " --out " + out_b.string());
    check(file_bytes(out_a / "tiny_samples.csv") == file_bytes(out_b / "tiny_samples.csv"),
          "samples are byte-identical across reruns");
    check(file_bytes(out_a / "tiny_figure.svg") == file_bytes(out_b / "tiny_figure.svg"),
          "figures are byte-identical across reruns");
    const auto r = run_cmd(bin + " run " + cfg.string() + " --out " + out_b.string() +
                           " --seed 99");
    check(r.exit_code == 0, "seed override exits 0");
    check(file_bytes(out_a / "tiny_samples.csv") != file_bytes(out_b / "tiny_samples.csv"),
          "seed override changes the samples");
  }
  {
    const auto r = run_cmd(bin + " estimate " + (out_a / "tiny_samples.csv").string());
    check(r.exit_code == 0, "estimate exits 0");
    check(contains(r.out, "delta_phi_rad:"), "estimate prints the phase");
    check(contains(r.out, "sigma_rad:"), "estimate prints the spread");
  }
  {
    const auto r = run_cmd(bin + " estimate " + (work / "absent.csv").string());
    check(r.exit_code == 2, "estimate on a missing file exits 2");
  }
  {
    const auto r = run_cmd(bin + " estimate " + (out_a / "tiny_samples.csv").string() +
                           " --bootstrap 50");
    check(r.exit_code == 2, "undersized bootstrap exits 2");
  }
  {
    const fs::path spec = work / "plot.ini";
    std::ofstream(spec) << "[plot]\ntitle = samples\nxlabel = z1\nylabel = z2\n"
                           "[series]\nkind = scatter\nx = z1\ny = z2\nlabel = shots\n";
    const fs::path fig = work / "fig.svg";
    const auto r = run_cmd(bin + " render " + (out_a / "tiny_samples.csv").string() + " " +
                           spec.string() + " --out " + fig.string());
    check(r.exit_code == 0, "render exits 0");
    check(fs::exists(fig), "render writes the figure");
    check(contains(file_bytes(fig), "<svg"), "render emits svg markup");

    std::ofstream(spec) << "[series]\nkind = scatter\nx = z1\ny = z9\n";
    const auto bad = run_cmd(bin + " render " + (out_a / "tiny_samples.csv").string() + " " +
                             spec.string() + " --out " + fig.string());
    check(bad.exit_code == 2, "unknown column exits 2");
    check(contains(bad.err, "z9"), "unknown column named in the error");
    check(contains(bad.err, "available:") && contains(bad.err, "z2"),
          "error lists the available columns");
  }

  fs::remove_all(work);
  if (g_failures == 0) {
    std::printf("all cli checks passed\n");
    return 0;
  }
  std::printf("%d cli check(s) failed\n", g_failures);
  return 1;
}
