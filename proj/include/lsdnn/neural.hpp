#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lsdnn/error.hpp"

namespace lsdnn {

// Dense NCHW batch.
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), v(n_ * c_ * h_ * w_, fill) {}

  std::size_t plane() const { return h * w; }
  std::size_t item_size() const { return c * h * w; }
  double* item(std::size_t i) { return v.data() + i * item_size(); }
  const double* item(std::size_t i) const { return v.data() + i * item_size(); }
  double& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) {
    return v[((i * c + ch) * h + y) * w + x];
  }
  double at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) const {
    return v[((i * c + ch) * h + y) * w + x];
  }
  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

enum class NetworkRole { L, H, S, L3 };

const char* role_name(NetworkRole role);
NetworkRole parse_role(const std::string& name);

// Residual U-net family. widths[l] is the channel count at resolution level l;
// there are widths.size() - 1 average-pool downsamplings.
struct NetworkSpec {
  NetworkRole role = NetworkRole::L;
  std::size_t in_channels = 1;  // includes the bypass channel for role S
  std::vector<std::size_t> widths{4, 8, 16};
  std::size_t kernel = 3;
  double slope = 0.1;      // leaky-ReLU negative slope
  bool residual = true;    // add body input channel 0 to the output
  bool bypass = false;     // concatenate aux before the final 1x1 convolution

  std::size_t depth() const { return widths.size() - 1; }
  std::size_t body_channels() const { return in_channels - (bypass ? 1 : 0); }
  void validate() const;

  static NetworkSpec for_role(NetworkRole role, std::vector<std::size_t> widths);

  std::string to_text() const;                      // key=value lines
  static NetworkSpec from_text(const std::string&);
};

// Weights of one convolution, laid out [cout][cin][k][k].
struct ConvParams {
  std::size_t cout = 0, cin = 0, k = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  std::size_t count() const { return weight.size() + bias.size(); }
};

using Gradients = std::vector<ConvParams>;

struct NetworkState {
  std::vector<ConvParams> layers;
  std::vector<ConvParams> first_moment;
  std::vector<ConvParams> second_moment;
  std::uint64_t step = 0;

  std::size_t parameter_count() const;
};

// Conv layer order: encoder (a, b) per level 0..D, decoder (up, merge) per
// level D-1..0, then the final 1x1 projection.
std::vector<ConvParams> conv_layout(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

// Fan-in scaled uniform init; the final layer is zeroed for residual specs.
NetworkState init_state(const NetworkSpec& spec, std::uint64_t seed);

struct ForwardCache {
  std::uint64_t step = 0;
  std::size_t n = 0, h = 0, w = 0;
  std::vector<Tensor4> conv_in;   // input to each conv layer
  std::vector<Tensor4> conv_out;  // activated output of each conv layer
};

struct ForwardResult {
  Tensor4 output;
  ForwardCache cache;
};

ForwardResult forward(const NetworkSpec& spec, const NetworkState& state, const Tensor4& input,
                      const Tensor4* aux = nullptr);
Tensor4 predict(const NetworkSpec& spec, const NetworkState& state, const Tensor4& input,
                const Tensor4* aux = nullptr, std::size_t batch = 16);

// Weight gradients of sum-over-batch loss; throws UsageError on a stale cache.
Gradients backward(const NetworkSpec& spec, const NetworkState& state, const ForwardCache& cache,
                   const Tensor4& output_grad);

enum class LossKind { NPCC, MSE, MAE };
const char* loss_name(LossKind kind);
LossKind parse_loss(const std::string& name);

struct LossResult {
  double loss = 0.0;  // mean over batch items
  Tensor4 grad;       // d loss / d prediction
};

// Mean negative Pearson correlation over the batch items (one channel).
LossResult npcc_loss(const Tensor4& prediction, const Tensor4& target);
LossResult mse_loss(const Tensor4& prediction, const Tensor4& target);
LossResult mae_loss(const Tensor4& prediction, const Tensor4& target);
LossResult compute_loss(LossKind kind, const Tensor4& prediction, const Tensor4& target);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch = 8;
  std::size_t epochs = 30;
  std::uint64_t seed = 3;
  LossKind loss = LossKind::NPCC;

  void validate() const;
};

// Bias-corrected adaptive-moment update; increments step.
void optimizer_step(NetworkState& state, const Gradients& grads, const TrainConfig& config);

// Samples share the spatial size; aux is present only for bypass specs.
struct TrainingSet {
  Tensor4 inputs;
  std::optional<Tensor4> aux;
  Tensor4 targets;

  std::size_t size() const { return inputs.n; }
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN without a validation set
};

struct TrainResult {
  NetworkState state;      // best-validation snapshot (final state without validation)
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
  std::size_t skipped = 0;  // degenerate targets dropped
};

TrainResult train(const NetworkSpec& spec, const TrainingSet& data, const TrainConfig& config,
                  const TrainingSet* validation = nullptr);

double evaluate_loss(const NetworkSpec& spec, const NetworkState& state, const TrainingSet& data,
                     LossKind loss, std::size_t batch);

// LSNN container: "LSNN" | u32 version | u32 spec length | spec text |
// u64 step | u32 layer count | per layer u32 cout, cin, k, f32 weights, f32 bias.
void save_network(const std::filesystem::path& path, const NetworkSpec& spec,
                  const NetworkState& state);
std::pair<NetworkSpec, NetworkState> load_network(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLog>& history);

// Widths scaled so the parameter count is closest to the sum of the three
// specs; throws UsageError if the best match is off by more than 10%.
NetworkSpec l3_spec_matching(const NetworkSpec& l, const NetworkSpec& h, const NetworkSpec& s);

}  // namespace lsdnn
