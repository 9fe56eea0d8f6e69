#include "mpvit/train.hpp"

#include <cmath>
#include <fstream>

#include "mpvit/errors.hpp"
#include "mpvit/metrics.hpp"
#include "mpvit/report.hpp"
#include "mpvit/sampler.hpp"
#include "parallel.hpp"

namespace mpvit {

double cross_entropy(std::span<const double> p_label) {
  if (p_label.empty()) throw ValueError("cross_entropy of an empty batch");
  double total = 0.0;
  for (double p : p_label) total -= std::log(std::max(p, kProbabilityFloor));
  return total / static_cast<double>(p_label.size());
}

template <typename T>
Var sample_loss(Graph<T>& g, const ForwardResult& forward, int label) {
  if (label != 0 && label != 1) throw ValueError("label must be 0 or 1");
  Var total;
  for (std::size_t h = 0; h < forward.head_probs.size(); ++h) {
    const Var p = ad::element(g, forward.head_probs[h], static_cast<std::size_t>(label));
    const Var term = ad::log(g, p, static_cast<T>(kProbabilityFloor));
    total = h == 0 ? term : ad::add(g, total, term);
  }
  return ad::scale(g, total, static_cast<T>(-1.0 / static_cast<double>(forward.head_probs.size())));
}

template <typename T>
double batch_loss(const ModelConfig& config, const ParameterSet<T>& params, const Batch<T>& batch) {
  if (batch.empty()) throw ValueError("empty batch");
  double total = 0.0;
  for (const auto* s : batch) {
    Graph<T> g(false);
    BoundParameters<T> bound(g, params);
    const Var loss = sample_loss(g, forward(g, bound, config, *s), s->label);
    total += static_cast<double>(g.value(loss)[0]);
  }
  return total / static_cast<double>(batch.size());
}

template <typename T>
LossAndGrad<T> batch_loss_and_grad(const ModelConfig& config, const ParameterSet<T>& params, const Batch<T>& batch,
                                   std::size_t threads) {
  if (batch.empty()) throw ValueError("empty batch");
  std::vector<double> losses(batch.size());
  std::vector<GradientMap<T>> grads(batch.size());
  detail::parallel_for(batch.size(), threads, [&](std::size_t i) {
    Graph<T> g;
    BoundParameters<T> bound(g, params);
    const Var loss = sample_loss(g, forward(g, bound, config, *batch[i]), batch[i]->label);
    losses[i] = static_cast<double>(g.value(loss)[0]);
    grads[i] = g.backward(loss);
  });

  LossAndGrad<T> out;
  const T w = static_cast<T>(1.0 / static_cast<double>(batch.size()));
  out.grads = std::move(grads[0]);
  for (auto& [_, t] : out.grads) {
    for (auto& v : t.data()) v *= w;
  }
  for (std::size_t i = 1; i < batch.size(); ++i) {
    for (auto& [path, t] : out.grads) {
      auto dst = t.data();
      const auto src = grads[i].at(path).data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w * src[k];
    }
    grads[i].clear();
  }
  for (double l : losses) out.loss += l;
  out.loss /= static_cast<double>(batch.size());
  return out;
}

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (threads < 1) throw ConfigError("thread count must be at least 1");
}

template <typename T>
Trainer<T>::Trainer(ModelConfig config, TrainConfig train, ParameterSet<T> params)
    : config_(std::move(config)), train_(std::move(train)), params_(std::move(params)) {
  config_.validate();
  train_.validate();
}

template <typename T>
double Trainer<T>::step(const Batch<T>& batch) {
  CheckedModeScope scope(train_.checked || checked_mode());
  auto lg = batch_loss_and_grad(config_, params_, batch, train_.threads);
  if (train_.checked && !std::isfinite(lg.loss)) throw NonFiniteError("training loss is not finite");
  adamw_step(params_, lg.grads, state_, train_.adam);
  return lg.loss;
}

std::string metrics_header() { return "epoch\ttrain_loss\tval_auc"; }

std::string metrics_line(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "\t" + format_number(m.train_loss) + "\t" + format_number(m.val_auc);
}

namespace {

template <typename T>
void require_both_classes(const Dataset<T>& data, const char* split) {
  bool pos = false, neg = false;
  for (const auto& s : data) (s.label == 1 ? pos : neg) = true;
  if (!pos || !neg) throw DataError(std::string(split) + " split needs both classes");
}

}  // namespace

template <typename T>
TrainResult<T> train(const ModelConfig& config, const TrainConfig& train_config, const Dataset<T>& train_set,
                     const Dataset<T>& val_set, const TrainOutputs& outputs,
                     const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  train_config.validate();
  require_both_classes(train_set, "train");
  require_both_classes(val_set, "val");
  const auto labels = labels_of(train_set);
  WeightedSampler sampler(labels, train_config.seed);

  Trainer<T> trainer(config, train_config, init_parameters<T>(config, train_config.seed));
  TrainResult<T> result;
  result.best_params = trainer.params();
  if (!outputs.checkpoint.empty()) save_checkpoint(outputs.checkpoint, config, trainer.params(), result.best);

  std::ofstream log;
  if (!outputs.metrics_log.empty()) {
    if (outputs.metrics_log.has_parent_path()) std::filesystem::create_directories(outputs.metrics_log.parent_path());
    log.open(outputs.metrics_log, std::ios::binary | std::ios::trunc);
    if (!log) throw Error("cannot open " + outputs.metrics_log.string() + " for writing");
    log << metrics_header() << '\n' << std::flush;
  }

  const std::size_t steps = (train_set.size() + train_config.batch_size - 1) / train_config.batch_size;
  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      Batch<T> batch;
      for (std::size_t i : sampler.draw(train_config.batch_size)) batch.push_back(&train_set[i]);
      loss_sum += trainer.step(batch);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(steps);
    const auto scores = predict_all(config, trainer.params(), val_set, train_config.threads);
    m.val_auc = auc(scores, labels_of(val_set));
    result.epochs.push_back(m);

    if (m.val_auc > result.best.val_auc) {
      result.best = {m.val_auc, static_cast<std::int64_t>(epoch)};
      result.best_params = trainer.params();
      if (!outputs.checkpoint.empty()) save_checkpoint(outputs.checkpoint, config, trainer.params(), result.best);
    }
    if (log.is_open()) log << metrics_line(m) << '\n' << std::flush;
    if (on_epoch) on_epoch(m);
  }
  result.final_params = trainer.params();
  return result;
}

#define MPVIT_INSTANTIATE_TRAIN(T)                                                                               \
  template Var sample_loss(Graph<T>&, const ForwardResult&, int);                                                \
  template double batch_loss(const ModelConfig&, const ParameterSet<T>&, const Batch<T>&);                       \
  template LossAndGrad<T> batch_loss_and_grad(const ModelConfig&, const ParameterSet<T>&, const Batch<T>&,       \
                                              std::size_t);                                                      \
  template class Trainer<T>;                                                                                     \
  template TrainResult<T> train(const ModelConfig&, const TrainConfig&, const Dataset<T>&, const Dataset<T>&,    \
                                const TrainOutputs&, const std::function<void(const EpochMetrics&)>&);

MPVIT_INSTANTIATE_TRAIN(float)
MPVIT_INSTANTIATE_TRAIN(double)
#undef MPVIT_INSTANTIATE_TRAIN

}  // namespace mpvit
