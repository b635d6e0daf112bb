#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "lsdnn/field.hpp"
#include "lsdnn/lspr.hpp"

namespace lsdnn {

inline constexpr double kDefaultPhaseMax = std::numbers::pi;

struct PhaseItem {
  std::string id;
  RealField phase;        // radians, within [0, f_max]
  std::string role;       // "train", "validation", "test" or empty
};

struct PhaseDataset {
  Grid2D grid;
  double f_max = kDefaultPhaseMax;
  std::string provenance;
  std::vector<PhaseItem> items;

  std::size_t size() const { return items.size(); }
  // Items whose role matches, in dataset order.
  std::vector<const PhaseItem*> with_role(const std::string& role) const;
};

struct SplitSpec {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + validation + test; }
  // 95 / 4.5 / 0.5 percent, rounding down; the remainder goes to train.
  static SplitSpec paper_ratios(std::size_t n);
};

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

// Objects with PSD slope -exponent: complex Gaussian spectrum shaped by
// |nu|^(-exponent/2), DC removed, real part, rescaled to [0, f_max].
PhaseDataset gen_powerlaw_phase(const Grid2D& grid, double exponent, std::size_t count,
                                std::uint64_t seed, double f_max = kDefaultPhaseMax);

RealField powerlaw_phase(const Grid2D& grid, double exponent, std::uint64_t seed,
                         std::uint64_t index, double f_max);

struct IngestResult {
  PhaseDataset dataset;
  std::vector<std::string> problems;  // one entry per rejected file
};

// 8/16-bit PGM files, bilinear (corner-aligned) resampling, gray/maxval -> [0, f_max].
IngestResult ingest_images(const std::filesystem::path& directory, const Grid2D& grid,
                           double f_max = kDefaultPhaseMax);

// Deterministic shuffle then partition.
SplitIndices split(std::size_t dataset_size, const SplitSpec& spec, std::uint64_t seed);
void assign_roles(PhaseDataset& dataset, const SplitIndices& parts);

inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kProvenanceName = "provenance.txt";

struct ManifestEntry {
  std::string id;
  std::string filename;
  std::string role;
};

void write_manifest(const std::filesystem::path& directory, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& directory);

// Directory of float32 LSPR files plus manifest and provenance.
void save_dataset(const std::filesystem::path& directory, const PhaseDataset& dataset);
PhaseDataset load_dataset(const std::filesystem::path& directory);

}  // namespace lsdnn
