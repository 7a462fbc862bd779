// Command-line front end: run experiment configs, validate them, and
// render sample tensors to PGM contact sheets.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "config.hpp"
#include "pipelines.hpp"
#include "render.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int cmd_run(const std::string& config_path) {
  const dg::tool::ExperimentConfig cfg = dg::tool::load_config(config_path);
  const dg::tool::RunResult res = dg::tool::run_pipeline(cfg);
  std::printf("run %s: %zu metric rows, %zu artifacts -> %s\n", cfg.run_id.c_str(),
              res.metrics.size(), res.artifacts.size(), cfg.out_dir.c_str());
  for (const auto& row : res.metrics)
    std::printf("  %s = %.6g  (n=%ld, seed=%llu)\n", row.metric.c_str(), row.value, row.n,
                static_cast<unsigned long long>(row.seed));
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const dg::tool::ExperimentConfig cfg = dg::tool::load_config(config_path);
  dg::tool::preflight(cfg);
  std::printf("ok: %s (%s pipeline, hash %s)\n", cfg.run_id.c_str(), cfg.pipeline_kind(),
              cfg.config_hash.c_str());
  return 0;
}

int cmd_render(const std::string& samples_path, const std::string& out_path) {
  dg::tool::render_grid(dg::load_tensor(samples_path), out_path);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditioning laboratory for unconditional denoisers"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "JSON config path")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "parse and preflight a config");
  validate->add_option("config", validate_path, "JSON config path")->required();

  std::string samples_path, out_path;
  auto* render = app.add_subcommand("render", "tile a sample tensor into a PGM image");
  render->add_option("samples", samples_path, "DTNS tensor of samples")->required();
  render->add_option("out", out_path, "output .pgm path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path);
    if (*validate) return cmd_validate(validate_path);
    return cmd_render(samples_path, out_path);
  } catch (const dg::tool::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
