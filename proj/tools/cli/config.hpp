#pragma once

// Run configuration file: INI-style sections of `key = value` lines. Every key
// can be overridden from the environment as WVI_<SECTION>_<KEY> (upper case),
// e.g. WVI_TRAIN_EPOCHS=0. Unknown sections or keys are errors. See
// configs/README.md for the full grammar.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wvi/data.hpp"
#include "wvi/metrics.hpp"
#include "wvi/models.hpp"
#include "wvi/trainer.hpp"

namespace wvi::cli {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx
  std::string synthetic = "ring8";
  std::size_t n_train = 2000;
  std::size_t n_validation = 500;
  std::uint64_t seed = 1;
  std::filesystem::path train_images;
  std::filesystem::path validation_images;
  std::size_t downsample = 1;
  std::size_t limit_train = 0;  // 0: all rows
  std::size_t limit_validation = 0;
};

struct PerturbSettings {
  std::size_t runs = 3;
  bool vary_seed = true;
  bool draw_weights = true;
};

struct OutputConfig {
  std::filesystem::path dir = "wvi-out";
  bool wall_clock = false;
  std::size_t checkpoint_every = 0;
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalOptions eval;
  PerturbSettings perturb;
  OutputConfig output;
  std::vector<std::string> defaulted;  // "section.key" entries that took their default
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Relative dataset paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const EnvLookup& env = process_env);
RunConfig load_run_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

Dataset load_dataset(const DataConfig& config);

}  // namespace wvi::cli
