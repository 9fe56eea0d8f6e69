#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpvit/autodiff.hpp"
#include "mpvit/config.hpp"
#include "mpvit/parameters.hpp"
#include "mpvit/sample.hpp"
#include "mpvit/tensor.hpp"

namespace mpvit {

/// Splits a channel-last volume [H, W, D, C] into non-overlapping P³ cubes.
/// Rows follow the lexicographic patch index (i, j, k); within a row voxels are
/// lexicographic in (a, b, c) with channels fastest. Result is [N, P³·C] with
/// N = H·W·D / P³. Throws DimensionError naming the first non-divisible axis.
template <typename T>
Tensor<T> patchify(const Tensor<T>& volume, std::size_t patch);

/// A ParameterSet registered as parameter leaves of one graph.
template <typename T>
class BoundParameters {
 public:
  BoundParameters(Graph<T>& graph, const ParameterSet<T>& params);

  Var operator()(std::string_view path) const;
  bool contains(std::string_view path) const { return vars_.find(std::string(path)) != vars_.end(); }

 private:
  std::map<std::string, Var> vars_;
};

/// Individual stages of the network, exposed for testing and reuse. `prefix`
/// arguments are plane names ("axial" / "sagittal").
namespace layers {

/// Scaled dot-product attention split over `heads` column groups of width d/heads.
/// q: [nq×d], k, v: [nk×d] -> [nq×d].
template <typename T>
Var multi_head_attention(Graph<T>& g, Var q, Var k, Var v, std::size_t heads);

/// Patch projection, CLS prepended at row 0, positional embeddings added.
/// [N×P³C] -> [(N+1)×d].
template <typename T>
Var embed_tokens(Graph<T>& g, Var patches, const BoundParameters<T>& p, std::string_view prefix);

/// `depth` pre-norm blocks of self-attention and GELU MLP with residuals.
template <typename T>
Var encoder_forward(Graph<T>& g, Var tokens, const BoundParameters<T>& p, std::string_view prefix,
                    const ModelConfig& config);

/// CLS of branch a ([1×d]) attends to the patch tokens of branch b (b's own CLS
/// excluded). The projected result is added to cls_a. Returns [1×d].
template <typename T>
Var cross_attention_fuse(Graph<T>& g, Var cls_a, Var tokens_b, const BoundParameters<T>& p,
                         std::string_view prefix_a, std::size_t heads);

/// Queries come from an MLP of the presence mask (one per modality slot);
/// keys/values from the full token sequence; outputs are mean-pooled. [1×d].
template <typename T>
Var modality_cross_attention(Graph<T>& g, std::span<const int> mask, Var tokens, const BoundParameters<T>& p,
                             std::string_view prefix);

/// Linear d -> 2 followed by softmax. Returns class probabilities [1×2].
template <typename T>
Var classification_head(Graph<T>& g, Var features, const BoundParameters<T>& p, std::string_view prefix);

}  // namespace layers

struct ForwardResult {
  /// Positive-class probability averaged over the heads, [1].
  Var prob;
  /// Per-head class probabilities [1×2], axial first.
  std::vector<Var> head_probs;
};

/// Full network on pre-patchified inputs (one matrix per enabled plane).
template <typename T>
ForwardResult forward_patches(Graph<T>& g, const BoundParameters<T>& p, const ModelConfig& config,
                              const std::vector<Tensor<T>>& patches, const ModalityIndicator& indicator);

/// Full network on a sample whose volumes match the config grids.
template <typename T>
ForwardResult forward(Graph<T>& g, const BoundParameters<T>& p, const ModelConfig& config,
                      const VolumeSample<T>& sample);

struct Prediction {
  double prob = 0.0;
  std::vector<double> head_probs;
};

/// Inference without gradient recording.
template <typename T>
Prediction predict(const ModelConfig& config, const ParameterSet<T>& params, const VolumeSample<T>& sample);

/// Positive-class probability per sample, in dataset order. Samples are
/// independent, so the result does not depend on `threads`.
template <typename T>
std::vector<double> predict_all(const ModelConfig& config, const ParameterSet<T>& params, const Dataset<T>& data,
                                std::size_t threads = 1);

}  // namespace mpvit
