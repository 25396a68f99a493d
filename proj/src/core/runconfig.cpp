#include "runconfig.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tbf {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value \"" + value + "\" for " + key);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value);
  }
  if (used != value.size() || value.front() == '-') bad_value(key, value);
  return v;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value);
  }
  if (used != value.size()) bad_value(key, value);
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m = model;
  m.seed = seed;
  return m;
}

DataGenConfig RunConfig::data_config() const {
  DataGenConfig d = data;
  d.seed = seed;
  return d;
}

void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model.image_h")
    cfg.model.image_h = to_size(key, value);
  else if (key == "model.image_w")
    cfg.model.image_w = to_size(key, value);
  else if (key == "model.patch")
    cfg.model.patch = to_size(key, value);
  else if (key == "model.dim")
    cfg.model.dim = to_size(key, value);
  else if (key == "model.depth")
    cfg.model.depth = to_size(key, value);
  else if (key == "model.heads")
    cfg.model.heads = to_size(key, value);
  else if (key == "model.variant")
    cfg.model.variant = variant_from_name(value);
  else if (key == "train.lr0")
    cfg.train.lr0 = to_double(key, value);
  else if (key == "train.iter_total")
    cfg.train.iter_total = to_size(key, value);
  else if (key == "train.power")
    cfg.train.power = to_double(key, value);
  else if (key == "train.momentum")
    cfg.train.momentum = to_double(key, value);
  else if (key == "train.batch_size")
    cfg.train.batch_size = to_size(key, value);
  else if (key == "train.clip_norm")
    cfg.train.clip_norm = to_double(key, value);
  else if (key == "train.class_weight")
    cfg.class_weight = to_double(key, value);
  else if (key == "data.dir")
    cfg.data_dir = value;
  else if (key == "data.count")
    cfg.data.count = to_size(key, value);
  else if (key == "data.image_size")
    cfg.data.image_size = to_size(key, value);
  else if (key == "data.val_ratio")
    cfg.data.val_ratio = to_double(key, value);
  else if (key == "data.test_ratio")
    cfg.data.test_ratio = to_double(key, value);
  else if (key == "data.stride")
    cfg.data.stride = to_size(key, value);
  else if (key == "data.donor_count")
    cfg.data.donor_count = to_size(key, value);
  else if (key == "eval.threshold")
    cfg.eval_threshold = to_double(key, value);
  else if (key == "eval.pooled")
    cfg.eval_pooled = to_bool(key, value);
  else if (key == "eval.parallel")
    cfg.eval_parallel = to_bool(key, value);
  else if (key == "eval.split") {
    if (value != "train" && value != "val" && value != "test") bad_value(key, value);
    cfg.eval_split = value;
  } else if (key == "run.seed")
    cfg.seed = to_u64(key, value);
  else if (key == "run.out")
    cfg.out_dir = value;
  else
    throw std::invalid_argument("config: unknown key \"" + key + "\"");
}

std::string config_get(const RunConfig& cfg, const std::string& key) {
  if (key == "model.image_h") return std::to_string(cfg.model.image_h);
  if (key == "model.image_w") return std::to_string(cfg.model.image_w);
  if (key == "model.patch") return std::to_string(cfg.model.patch);
  if (key == "model.dim") return std::to_string(cfg.model.dim);
  if (key == "model.depth") return std::to_string(cfg.model.depth);
  if (key == "model.heads") return std::to_string(cfg.model.heads);
  if (key == "model.variant") return variant_name(cfg.model.variant);
  if (key == "train.lr0") return format_double(cfg.train.lr0);
  if (key == "train.iter_total") return std::to_string(cfg.train.iter_total);
  if (key == "train.power") return format_double(cfg.train.power);
  if (key == "train.momentum") return format_double(cfg.train.momentum);
  if (key == "train.batch_size") return std::to_string(cfg.train.batch_size);
  if (key == "train.clip_norm") return format_double(cfg.train.clip_norm);
  if (key == "train.class_weight") return format_double(cfg.class_weight);
  if (key == "data.dir") return cfg.data_dir;
  if (key == "data.count") return std::to_string(cfg.data.count);
  if (key == "data.image_size") return std::to_string(cfg.data.image_size);
  if (key == "data.val_ratio") return format_double(cfg.data.val_ratio);
  if (key == "data.test_ratio") return format_double(cfg.data.test_ratio);
  if (key == "data.stride") return std::to_string(cfg.data.stride);
  if (key == "data.donor_count") return std::to_string(cfg.data.donor_count);
  if (key == "eval.threshold") return format_double(cfg.eval_threshold);
  if (key == "eval.pooled") return cfg.eval_pooled ? "true" : "false";
  if (key == "eval.parallel") return cfg.eval_parallel ? "true" : "false";
  if (key == "eval.split") return cfg.eval_split;
  if (key == "run.seed") return std::to_string(cfg.seed);
  if (key == "run.out") return cfg.out_dir;
  throw std::invalid_argument("config: unknown key \"" + key + "\"");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.resize(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "train" && section != "data" &&
          section != "eval" && section != "run")
        throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                    ": unknown section \"" + section + "\"");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": expected key=value");
    if (section.empty())
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": key before any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  ": empty key");
    try {
      config_set(cfg, section + "." + key, value);
    } catch (const std::invalid_argument& e) {
      std::string inner = e.what();
      if (inner.rfind("config: ", 0) == 0) inner = inner.substr(8);
      throw std::invalid_argument("config: line " + std::to_string(line_no) + ": " +
                                  inner);
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string run_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  auto section = [&](const char* name, std::initializer_list<const char*> keys) {
    out << '[' << name << "]\n";
    for (const char* key : keys)
      out << key << " = " << config_get(cfg, std::string(name) + "." + key) << '\n';
    out << '\n';
  };
  section("model", {"image_h", "image_w", "patch", "dim", "depth", "heads", "variant"});
  section("train", {"lr0", "iter_total", "power", "momentum", "batch_size", "clip_norm",
                    "class_weight"});
  section("data", {"dir", "count", "image_size", "val_ratio", "test_ratio", "stride",
                   "donor_count"});
  section("eval", {"threshold", "pooled", "parallel", "split"});
  section("run", {"seed", "out"});
  return out.str();
}

}  // namespace tbf
