#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "synth.hpp"

namespace tbf {

struct DataGenConfig {
  std::size_t count = 30;
  std::size_t image_size = 64;  // square samples
  double val_ratio = 0.1;
  double test_ratio = 0.1;
  std::size_t stride = 4;        // placement grid stride
  std::size_t donor_count = 4;   // extra backgrounds used as splice donors
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  std::string image_path;  // relative to the manifest's directory
  std::string mask_path;
  ForgeryKind kind = ForgeryKind::splice;
  std::string split;  // "train" | "val" | "test"
};

struct Manifest {
  std::string dir;  // directory the relative paths resolve against
  std::vector<ManifestEntry> entries;
};

std::string manifest_resolve(const Manifest& manifest, const std::string& relative);

// {train, val, test}: val and test are round(count*ratio), the remainder trains.
std::array<std::size_t, 3> split_counts(std::size_t count, double val_ratio,
                                        double test_ratio);

// Writes images, masks, and manifest.tsv under out_dir; deterministic per seed.
// Returns the manifest (with dir = out_dir).
Manifest generate_dataset(const DataGenConfig& cfg, const std::string& out_dir);

void save_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path);

}  // namespace tbf
