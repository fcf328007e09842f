#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdoa/array_model.hpp"
#include "sdoa/spectrum.hpp"

namespace sdoa::net {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NetConfig {
  int n_antennas = 16;
  int n_filters = 2;
  int inner_dim = 32;
  int n_conv_layers = 6;
  int kernel_size = 3;
  int batch_size = 64;
  double learning_rate = 5e-4;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;
  /// Multiplies the Glorot draw of the output layer. Values near 0.05 start
  /// training with a spectrum far below the unit-peak reference.
  double output_init_scale = 1.0;

  int io_dim() const { return 2 * n_antennas; }
  int hidden_dim() const { return n_filters * inner_dim; }
  void validate() const;
  bool same_shape(const NetConfig& o) const {
    return n_antennas == o.n_antennas && n_filters == o.n_filters && inner_dim == o.inner_dim &&
           n_conv_layers == o.n_conv_layers && kernel_size == o.kernel_size;
  }
};

/// Convolution -> batch norm -> ReLU.
struct ConvBlock {
  std::vector<double> kernel;  // [out][in][tap]
  std::vector<double> bias;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

struct NetworkParams {
  NetConfig cfg;
  std::vector<double> fc_in_w;  // [2N][M_F * M_I]
  std::vector<double> fc_in_b;
  std::vector<ConvBlock> blocks;
  std::vector<double> fc_out_w;  // [M_F * M_I][2N]
  std::vector<double> fc_out_b;

  /// Zero-filled parameters with the shapes implied by `cfg`.
  static NetworkParams zeros(const NetConfig& cfg);

  /// Visits every trainable tensor as (name, values).
  template <class F>
  void for_each_trainable(F&& f) {
    f(std::string("fc_in.w"), fc_in_w);
    f(std::string("fc_in.b"), fc_in_b);
    for (size_t l = 0; l < blocks.size(); ++l) {
      const std::string p = "conv" + std::to_string(l) + ".";
      f(p + "kernel", blocks[l].kernel);
      f(p + "bias", blocks[l].bias);
      f(p + "gamma", blocks[l].gamma);
      f(p + "beta", blocks[l].beta);
    }
    f(std::string("fc_out.w"), fc_out_w);
    f(std::string("fc_out.b"), fc_out_b);
  }
  template <class F>
  void for_each_trainable(F&& f) const {
    const_cast<NetworkParams*>(this)->for_each_trainable(
        [&](const std::string& name, std::vector<double>& v) {
          f(name, static_cast<const std::vector<double>&>(v));
        });
  }

  size_t trainable_count() const;
  /// Throws std::invalid_argument if a tensor has the wrong size or a
  /// running variance is not positive.
  void validate() const;
  bool operator==(const NetworkParams& o) const;
};

/// Glorot-uniform weights, zero biases, unit BN scale, fresh running stats.
NetworkParams init_params(const NetConfig& cfg, std::uint64_t rng_seed);

enum class Mode { Train, Eval };

struct BlockCache {
  RowMatrix input;   // B x (M_F * M_I), block input
  RowMatrix xhat;    // normalized conv output
  RowMatrix pre;     // gamma * xhat + beta (before ReLU)
  std::vector<double> mean, var, inv_std;
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  RowMatrix input;   // B x 2N
  std::vector<BlockCache> blocks;
  RowMatrix flat;    // B x (M_F * M_I), input to f5
};

struct ForwardResult {
  RowMatrix output;  // B x 2N
  ForwardCache cache;
};

/// Runs the network on a batch of stacked inputs [Re r, Im r]. Train mode
/// normalizes with batch statistics (caller folds them into the running
/// stats with update_running_stats); eval mode uses the running stats.
ForwardResult forward(const NetworkParams& params, const RowMatrix& batch, Mode mode);

void update_running_stats(NetworkParams& params, const ForwardCache& cache);

/// [Re r; Im r].
Eigen::VectorXd stack_real_imag(const CVector& r);
/// g[0:N] + j g[N:2N]; throws std::invalid_argument for odd lengths.
CVector to_complex(const Eigen::VectorXd& g);

struct LossTarget {
  const SteeringTable* table = nullptr;
  double sigma_bar = 100.0;
  double amplitude = 1.0;
};

struct LossResult {
  double loss = 0.0;
  NetworkParams grads;
  ForwardCache cache;
};

/// Mean spectrum loss over the batch and its gradient with respect to every
/// trainable parameter. Throws std::runtime_error on a non-finite loss.
LossResult loss_and_grad(const NetworkParams& params, const std::vector<Snapshot>& batch,
                         const LossTarget& target);

/// Loss only (train-mode statistics), for gradient checks.
double batch_loss(const NetworkParams& params, const std::vector<Snapshot>& batch,
                  const LossTarget& target);

struct AdamState {
  NetworkParams m;
  NetworkParams v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const NetConfig& cfg);
};

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, double lr);

struct TrainConfig {
  NetConfig net;
  DatasetSpec data;  // stage_schedule and n_samples are set per epoch
  int epochs = 14;
  /// Index of the first epoch; lets a run be resumed with train_from.
  int start_epoch = 0;
  std::int64_t samples_per_epoch = 5000;
  double sigma_bar = 100.0;
  int train_grid_points = 361;
  /// Reuse the same sources/noise draws every epoch (stage still cycles).
  bool fixed_dataset = false;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  CurriculumStage stage = CurriculumStage::Perfect;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochRecord> history;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::vector<EpochRecord> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<EpochRecord>& history() const { return history_; }

 private:
  std::vector<EpochRecord> history_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Curriculum training: epoch e draws fresh samples from stage e mod 7.
TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Same, continuing from given parameters and optimizer state.
TrainResult train_from(const TrainConfig& cfg, NetworkParams params, AdamState& adam,
                       const EpochCallback& on_epoch = {});

/// Eval-mode forward of one snapshot, then spectrum and peaks.
struct NetEstimate {
  CVector z;
  Spectrum spectrum;
  DoaEstimate estimate;
};
NetEstimate estimate(const NetworkParams& params, const CVector& r, const SteeringTable& table,
                     int k);

}  // namespace sdoa::net
