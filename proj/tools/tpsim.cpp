// Command-line front end: run, analyze, sweep, render, pad-calibrate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tpsim/tpsim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPad = 3;
constexpr int kExitIo = 4;

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::optional<std::string> out;
};

tpsim::ExperimentConfig load(const std::string& path, const Globals& g) {
  tpsim::ExperimentConfig c = tpsim::load_config(tpsim::read_text_file(path));
  if (g.seed) c.seed = *g.seed;
  if (g.out) c.output_dir = *g.out;
  return c;
}

int cmd_run(const std::string& config, const Globals& g) {
  const tpsim::ExperimentConfig c = load(config, g);
  const tpsim::ExperimentResult r = tpsim::run_experiment(c, g.jobs);
  tpsim::write_artifacts(r, c.output_dir);
  std::cout << tpsim::json_text(tpsim::report_json(r));
  return kExitOk;
}

int cmd_analyze(const std::string& samples, std::size_t trials, std::optional<std::uint64_t> bin_width,
                const Globals& g) {
  const tpsim::SampleSet s = tpsim::read_samples_csv(samples);
  const std::uint64_t seed = g.seed.value_or(1);
  const auto [matrix, report] = tpsim::analyze_samples(s, bin_width, trials, seed, g.jobs);
  const std::string text = tpsim::json_text(tpsim::report_json(report, seed, std::nullopt));
  if (g.out) {
    const std::filesystem::path dir = *g.out;
    tpsim::write_matrix_csv(matrix, dir / "matrix.csv");
    tpsim::write_file_atomic(dir / "report.json", text);
    tpsim::render_heatmap(matrix, dir / "heatmap.ppm");
  }
  std::cout << text;
  return kExitOk;
}

int cmd_sweep(const std::string& config, const Globals& g) {
  const tpsim::ExperimentConfig c = load(config, g);
  const auto cells = tpsim::run_sweep(c, g.jobs, [](const tpsim::SweepCell& cell) {
    std::cerr << "sweep: " << tpsim::to_string(cell.kind) << ' ' << tpsim::to_string(cell.policy) << ' '
              << tpsim::to_string(cell.mitigation) << ' '
              << (cell.report ? tpsim::to_string(cell.report->verdict) : std::string_view("n/a")) << '\n';
  });
  const std::string table = tpsim::sweep_table(cells);
  const std::filesystem::path dir = c.output_dir;
  tpsim::write_file_atomic(dir / "sweep.txt", table);
  tpsim::write_file_atomic(dir / "sweep.json", tpsim::json_text(tpsim::sweep_json(cells, c.seed)));
  std::cout << table;
  return kExitOk;
}

int cmd_render(const std::string& matrix, const std::string& image) {
  tpsim::render_heatmap(tpsim::read_matrix_csv(matrix), image);
  return kExitOk;
}

int cmd_pad_calibrate(const std::string& config, const Globals& g) {
  const tpsim::ExperimentConfig c = load(config, g);
  const tpsim::FenceVariant v = tpsim::effective_variant(c.attack);
  if (!tpsim::is_fence_t(v.kind))
    throw tpsim::SchemaError("attack.mitigation", "pad calibration needs a fence.t mitigation");
  const tpsim::WorstCase w = tpsim::measure_worst_case(c.arch, v);
  std::cout << "worst_case_cycles=" << w.worst_case_cycles << "\npad=" << w.pad << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timing-channel simulator for temporal-partitioning mitigations"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Override the experiment seed");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::Range(1U, 256U));
  app.add_option("--out", g.out, "Output directory");

  std::string config, samples, matrix, image;
  std::size_t trials = 1000;
  std::optional<std::uint64_t> bin_width;

  auto* run = app.add_subcommand("run", "Run one experiment and write its artifacts");
  run->add_option("config", config, "Config file")->required();
  auto* analyze = app.add_subcommand("analyze", "Leakage report of a samples CSV");
  analyze->add_option("samples", samples, "samples.csv")->required();
  analyze->add_option("--trials", trials, "Shuffle trials for the zero-leakage bound")->check(CLI::PositiveNumber);
  analyze->add_option("--bin-width", bin_width, "Time bin width in cycles")->check(CLI::PositiveNumber);
  auto* sweep = app.add_subcommand("sweep", "Attack x mitigation x policy table");
  sweep->add_option("config", config, "Base config file")->required();
  auto* render = app.add_subcommand("render", "Render a matrix CSV as a PPM heatmap");
  render->add_option("matrix", matrix, "matrix.csv")->required();
  render->add_option("image", image, "Output .ppm")->required();
  auto* calibrate = app.add_subcommand("pad-calibrate", "Measure the worst-case fence.t latency and pad");
  calibrate->add_option("config", config, "Config file")->required();
  for (auto* sub : {run, analyze, sweep, render, calibrate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, g);
    if (*analyze) return cmd_analyze(samples, trials, bin_width, g);
    if (*sweep) return cmd_sweep(config, g);
    if (*render) return cmd_render(matrix, image);
    if (*calibrate) return cmd_pad_calibrate(config, g);
  } catch (const tpsim::PadExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPad;
  } catch (const tpsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const tpsim::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
