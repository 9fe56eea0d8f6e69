#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mpvit/autodiff.hpp"
#include "mpvit/checkpoint.hpp"
#include "mpvit/config.hpp"
#include "mpvit/model.hpp"
#include "mpvit/optimizer.hpp"
#include "mpvit/parameters.hpp"
#include "mpvit/sample.hpp"

namespace mpvit {

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean of −log(max(p, 1e-12)) over the given label probabilities.
double cross_entropy(std::span<const double> p_label);

/// Per-sample training loss: −log p_label of every head, averaged over heads.
template <typename T>
Var sample_loss(Graph<T>& g, const ForwardResult& forward, int label);

template <typename T>
using Batch = std::vector<const VolumeSample<T>*>;

/// Mean sample loss over the batch, without gradients.
template <typename T>
double batch_loss(const ModelConfig& config, const ParameterSet<T>& params, const Batch<T>& batch);

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  GradientMap<T> grads;
};

/// Mean sample loss and its gradient. Samples may run on several threads; the
/// per-sample gradients are summed in batch order, so the result depends only
/// on the inputs.
template <typename T>
LossAndGrad<T> batch_loss_and_grad(const ModelConfig& config, const ParameterSet<T>& params, const Batch<T>& batch,
                                   std::size_t threads = 1);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 8;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  /// 1 is the deterministic mode; more threads split each batch.
  std::size_t threads = 1;
  /// Raise NonFiniteError on the first NaN/Inf instead of training through it.
  bool checked = false;

  void validate() const;
};

/// Parameters plus optimizer state; one `step` per batch.
template <typename T>
class Trainer {
 public:
  Trainer(ModelConfig config, TrainConfig train, ParameterSet<T> params);

  /// Gradient step on `batch`; returns the batch loss before the update.
  double step(const Batch<T>& batch);

  const ParameterSet<T>& params() const { return params_; }
  const OptimizerState<T>& state() const { return state_; }

 private:
  ModelConfig config_;
  TrainConfig train_;
  ParameterSet<T> params_;
  OptimizerState<T> state_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
};

/// "epoch\ttrain_loss\tval_auc"
std::string metrics_header();
std::string metrics_line(const EpochMetrics& m);

struct TrainOutputs {
  /// Best-so-far checkpoint; empty to skip.
  std::filesystem::path checkpoint;
  /// Metrics log; empty to skip.
  std::filesystem::path metrics_log;
};

template <typename T>
struct TrainResult {
  /// Parameters with the highest validation AUC (the initial ones if no
  /// epoch ran).
  ParameterSet<T> best_params;
  ParameterSet<T> final_params;
  CheckpointInfo best;
  std::vector<EpochMetrics> epochs;
};

/// Initializes parameters from `train.seed`, then per epoch draws
/// ⌈n_train / batch⌉ weighted-sampler batches, steps the optimizer and
/// scores the validation split. The checkpoint is written at start (epoch 0,
/// unevaluated) and again whenever validation AUC strictly improves.
/// Throws DataError before the first epoch if either split is empty or lacks
/// a class.
template <typename T>
TrainResult<T> train(const ModelConfig& config, const TrainConfig& train, const Dataset<T>& train_set,
                     const Dataset<T>& val_set, const TrainOutputs& outputs = {},
                     const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace mpvit
