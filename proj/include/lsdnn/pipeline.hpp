#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lsdnn/config.hpp"
#include "lsdnn/dataset.hpp"
#include "lsdnn/metrics.hpp"
#include "lsdnn/neural.hpp"
#include "lsdnn/noise.hpp"
#include "lsdnn/optics.hpp"

namespace lsdnn {

inline constexpr const char* kSoftwareVersion = "1.0.0";

enum class Scheme { Approximant, EndToEnd };
const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& s);

// Typed view of a Config.
struct ExperimentConfig {
  OpticalConfig optics;
  NoiseModel noise;
  double exponent = 2.0;
  double f_max = kDefaultPhaseMax;
  SplitSpec split_counts;
  std::uint64_t data_seed = 7;
  std::uint64_t split_seed = 5;
  std::string ingest_dir;
  Scheme scheme = Scheme::Approximant;
  int gs_iterations = 1;
  double q = 0.5;
  std::vector<double> q_sweep;
  std::vector<std::size_t> widths{4, 8, 16};
  std::size_t kernel = 3;
  double slope = 0.1;
  bool s_residual = true;
  bool l3 = false;
  TrainConfig train;
  AffineMethod affine = AffineMethod::LeastSquares;
  std::size_t export_pgm = 0;

  static ExperimentConfig from(const Config& config);
  NetworkSpec spec(NetworkRole role) const;
};

// Synthetic power-law set or ingested images, with roles assigned.
PhaseDataset build_dataset(const ExperimentConfig& ec);

struct PreparedInputs {
  Scheme scheme = Scheme::Approximant;
  std::vector<std::string> ids;
  std::vector<RealField> g0;
  std::vector<RealField> g;
  std::vector<RealField> xi;  // what the networks see before standardization
  std::size_t approximant_calls = 0;
};

// Measurement of item i draws from RngStream(noise seed, i).
PreparedInputs prepare_inputs(const PhaseDataset& data, const ExperimentConfig& ec);

// Zero mean, unit variance per image; constant images map to zeros.
Tensor4 network_batch(const std::vector<RealField>& images, bool standardize);
std::vector<RealField> unbatch(const Tensor4& t, const Grid2D& grid);

struct TrainedNet {
  NetworkSpec spec;
  NetworkState state;
  std::vector<EpochLog> history;
  std::size_t skipped = 0;
};

struct LsModels {
  double q = 0.0;
  TrainedNet low, high, synth;
};

// Indexed subsets of the dataset by role.
struct RoleSplit {
  std::vector<std::size_t> train, validation, test;
};
RoleSplit role_split(const PhaseDataset& data);

TrainedNet train_low(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                     const ExperimentConfig& ec);
TrainedNet train_high(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                      const ExperimentConfig& ec, double q);
// S is fitted on the L/H outputs for the training set, validated on theirs for
// the validation set.
TrainedNet train_synth(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                       const ExperimentConfig& ec, const TrainedNet& low, const TrainedNet& high);
TrainedNet train_l3(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                    const ExperimentConfig& ec, const TrainedNet& low, const TrainedNet& high,
                    const TrainedNet& synth);

LsModels train_ls(const PhaseDataset& data, const PreparedInputs& in, const RoleSplit& roles,
                  const ExperimentConfig& ec, double q, const TrainedNet* reuse_low = nullptr);

struct LsOutputs {
  std::vector<RealField> low, high, synth;
};
LsOutputs infer_ls(const LsModels& models, const std::vector<RealField>& xi);
std::vector<RealField> infer(const TrainedNet& net, const std::vector<RealField>& xi);

// Mean PSD diagonal of each named set, after affine resolution against the
// references (except names listed in raw).
struct PsdTable {
  double dx = 0.0;
  std::size_t n = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};
void write_psd_csv(const std::filesystem::path& path, const PsdTable& table);

struct QResult {
  double q = 0.0;
  MetricReport synth;
  std::vector<double> psd_low, psd_synth, psd_truth;
  std::string low_hash, high_hash, synth_hash;
};

struct RunSummary {
  MetricReport approximant;  // empty rows in end-to-end mode
  MetricReport low;
  std::optional<MetricReport> l3;
  std::vector<QResult> sweep;
  std::size_t approximant_calls = 0;
  std::filesystem::path manifest;
};

// Full pipeline into a fresh experiment directory (created; must be empty
// unless force). Guards the directory with a lock file while running.
RunSummary run_ls(const Config& config, const std::filesystem::path& experiment_dir,
                  bool force = false);

// Stepwise commands backing the CLI.
void cmd_gen_data(const Config& config, std::size_t count, const std::filesystem::path& out,
                  bool force);
void cmd_simulate(const Config& config, const std::filesystem::path& data_dir,
                  const std::filesystem::path& out, bool force);
// iterations == 1 with the uniform start is the approximant.
void cmd_retrieve(const Config& config, const std::filesystem::path& measurement_dir,
                  int iterations, const std::filesystem::path& out, bool force);
void cmd_train(const Config& config, NetworkRole role, const std::filesystem::path& data_dir,
               const std::filesystem::path& inputs_dir, const std::filesystem::path& states_dir);
void cmd_evaluate(const Config& config, const std::filesystem::path& states_dir,
                  const std::filesystem::path& data_dir, const std::filesystem::path& inputs_dir,
                  const std::filesystem::path& out, bool force);
// Writes <out>.lspr (2-D PSD), <out>_slope.txt and, if diagonal, <out>_diagonal.csv.
double cmd_analyze_psd(const std::filesystem::path& in_dir, bool diagonal,
                       const std::filesystem::path& out);

std::string fnv1a_file(const std::filesystem::path& path);
std::string format_q(double q);

}  // namespace lsdnn
