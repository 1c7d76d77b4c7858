#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "latentdiff/config.hpp"
#include "latentdiff/errors.hpp"
#include "latentdiff/pipeline.hpp"

namespace fs = std::filesystem;
using namespace latentdiff;

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2, kMissingPrerequisite = 3 };

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool permissive = false;
  std::string log_level = "info";
};

// --out-dir, then $LATENTDIFF_OUT_DIR, then the config's out_dir.
fs::path resolve_out_dir(const Common& c, const PipelineConfig& config) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* env = std::getenv("LATENTDIFF_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return config.out_dir;
}

// Without --config, a later stage reuses the config stored by gen-data.
PipelineConfig load_config(const Common& c) {
  ParseOptions po;
  po.strict = !c.permissive;
  PipelineConfig config;
  if (!c.config_path.empty()) {
    config = parse_config(c.config_path, po);
  } else {
    const fs::path stored = resolve_out_dir(c, config) / artifact::kConfig;
    if (fs::exists(stored)) config = parse_config(stored, po);
  }
  if (c.seed) config.seed = *c.seed;
  config.out_dir = resolve_out_dir(c, config).string();
  validate_config(config);
  return config;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "JSON config document")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("-o,--out-dir", c.out_dir, "artifact directory (overrides $LATENTDIFF_OUT_DIR and the config)");
  app->add_flag("--permissive", c.permissive, "ignore unknown config keys");
  app->add_option("--log-level", c.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentdiff: feature-space diffusion augmentation for imbalanced regression"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common common;
  bool report_only = false;
  std::string dump_target;
  struct Entry {
    CLI::App* app;
    std::optional<Stage> stage;
  };
  std::vector<Entry> entries;
  auto add = [&](const char* name, const char* help, std::optional<Stage> stage) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, common);
    entries.push_back({sub, stage});
    return sub;
  };
  add("gen-data", "write the train/test split and bin layout", Stage::gen_data);
  add("train-vanilla", "train the baseline encoder and head", Stage::train_vanilla);
  add("extract", "encode train and test rows into features", Stage::extract);
  add("train-diffusion", "train the conditional feature diffusion model", Stage::train_diffusion);
  add("generate", "allocate, sample and gate synthetic features", Stage::generate);
  add("augment", "retrain the head on real plus synthetic features", Stage::augment);
  add("evaluate", "write metric reports (and feature analytics)", Stage::evaluate)
      ->add_flag("--report-only", report_only, "metric reports only; skip analytics");
  add("run-all", "run every stage in order", std::nullopt);
  add("dump-config", "print the effective config with all defaults", std::nullopt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  spdlog::set_level(spdlog::level::from_str(common.log_level));

  try {
    const PipelineConfig config = load_config(common);
    const fs::path out_dir = config.out_dir;
    for (const Entry& e : entries) {
      if (!e.app->parsed()) continue;
      if (e.app->get_name() == "dump-config") {
        std::cout << config_to_json(config).dump(2) << '\n';
      } else if (e.stage) {
        StageOptions so;
        so.report_only = report_only;
        run_stage(*e.stage, config, out_dir, so);
      } else {
        run_pipeline(config, out_dir);
      }
    }
    return kOk;
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return e.missing_prerequisite() ? kMissingPrerequisite : kFailed;
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kUsage;
  } catch (const RangeError& e) {
    spdlog::error("config: {}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailed;
  }
}
