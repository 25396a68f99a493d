#include "dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "image_io.hpp"

namespace tbf {

std::string manifest_resolve(const Manifest& manifest, const std::string& relative) {
  if (manifest.dir.empty() || relative.empty() || relative.front() == '/') return relative;
  return manifest.dir + "/" + relative;
}

std::array<std::size_t, 3> split_counts(std::size_t count, double val_ratio,
                                        double test_ratio) {
  if (val_ratio < 0.0 || test_ratio < 0.0 || val_ratio + test_ratio >= 1.0)
    throw std::invalid_argument("split_counts: ratios must be >= 0 and sum below 1");
  const std::size_t n_val = static_cast<std::size_t>(std::llround(count * val_ratio));
  const std::size_t n_test = static_cast<std::size_t>(std::llround(count * test_ratio));
  if (n_val + n_test > count)
    throw std::invalid_argument("split_counts: ratios leave no training samples");
  return {count - n_val - n_test, n_val, n_test};
}

Manifest generate_dataset(const DataGenConfig& cfg, const std::string& out_dir) {
  if (cfg.count < 3)
    throw std::invalid_argument("generate_dataset: count must be at least 3");
  if (cfg.image_size < 16)
    throw std::invalid_argument("generate_dataset: image_size must be at least 16");
  if (cfg.donor_count == 0)
    throw std::invalid_argument("generate_dataset: donor_count must be positive");
  const auto counts = split_counts(cfg.count, cfg.val_ratio, cfg.test_ratio);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("generate_dataset: cannot create " + out_dir + ": " +
                             ec.message());

  // Donor backgrounds live on indices past the sample range so they never
  // collide with per-sample streams.
  std::vector<Tensor> donors;
  donors.reserve(cfg.donor_count);
  for (std::size_t k = 0; k < cfg.donor_count; ++k)
    donors.push_back(
        synth_background(cfg.seed, cfg.count + k, cfg.image_size, cfg.image_size));

  Manifest manifest;
  manifest.dir = out_dir;
  manifest.entries.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    Rng rng = Rng(cfg.seed).stream(i, 0x5A11);
    const ForgeryKind kind = static_cast<ForgeryKind>(rng.below(3));
    Tensor background = synth_background(cfg.seed, i, cfg.image_size, cfg.image_size);
    SynthSample sample = synthesize(kind, background, donors, rng, cfg.stride);

    char image_name[32], mask_name[32];
    std::snprintf(image_name, sizeof(image_name), "img_%05zu.ppm", i);
    std::snprintf(mask_name, sizeof(mask_name), "mask_%05zu.pgm", i);
    save_ppm(out_dir + "/" + image_name, sample.image);
    save_pgm(out_dir + "/" + mask_name, sample.mask);

    ManifestEntry entry;
    entry.image_path = image_name;
    entry.mask_path = mask_name;
    entry.kind = kind;
    entry.split = i < counts[0] ? "train" : (i < counts[0] + counts[1] ? "val" : "test");
    manifest.entries.push_back(std::move(entry));
  }
  save_manifest(manifest, out_dir + "/manifest.tsv");
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
  for (const auto& e : manifest.entries) {
    out << e.image_path << '\t' << e.mask_path << '\t' << forgery_kind_name(e.kind)
        << '\t' << e.split << '\n';
  }
  if (!out) throw std::runtime_error("manifest: short write to " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  Manifest manifest;
  manifest.dir = std::filesystem::path(path).parent_path().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestEntry entry;
    std::string kind;
    if (!std::getline(fields, entry.image_path, '\t') ||
        !std::getline(fields, entry.mask_path, '\t') || !std::getline(fields, kind, '\t') ||
        !std::getline(fields, entry.split)) {
      throw std::runtime_error("manifest: " + path + ": malformed line " +
                               std::to_string(line_no));
    }
    entry.kind = forgery_kind_from_name(kind);
    if (entry.split != "train" && entry.split != "val" && entry.split != "test")
      throw std::runtime_error("manifest: " + path + ": unknown split \"" + entry.split +
                               "\" on line " + std::to_string(line_no));
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

}  // namespace tbf
