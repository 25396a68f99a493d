#pragma once

#include <cstdint>
#include <string>

#include "dataset.hpp"
#include "extractor.hpp"
#include "optim.hpp"

namespace tbf {

// Flat key=value configuration with [section] headers. Every field has a
// default; unknown sections or keys are rejected.
struct RunConfig {
  ModelConfig model;      // [model] — seed is injected from the run seed
  ScheduleConfig train;   // [train]
  double class_weight = 1.0;
  DataGenConfig data;     // [data] — seed injected likewise
  std::string data_dir = "data";
  double eval_threshold = 0.5;  // [eval]
  bool eval_pooled = false;
  bool eval_parallel = true;
  std::string eval_split = "test";
  std::uint64_t seed = 0;  // [run]
  std::string out_dir = "out";

  ModelConfig model_config() const;
  DataGenConfig data_config() const;
};

// "model.dim" = "16" etc.; throws std::invalid_argument for unknown keys or
// unparsable values.
void config_set(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

std::string config_get(const RunConfig& cfg, const std::string& dotted_key);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Serialized form that parses back to the same configuration.
std::string run_config_text(const RunConfig& cfg);

}  // namespace tbf
