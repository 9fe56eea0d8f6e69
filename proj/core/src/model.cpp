#include "mpvit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mpvit/errors.hpp"
#include "parallel.hpp"

namespace mpvit {

ModalityIndicator ModalityIndicator::all_present(const ModelConfig& config) {
  ModalityIndicator m;
  m.axial.assign(config.axial_channels, 1);
  if (config.multi_plane) m.sagittal.assign(config.sagittal_channels, 1);
  return m;
}

void validate_mask(std::span<const int> mask, std::size_t expected) {
  if (mask.size() != expected) {
    throw ValueError("modality mask has " + std::to_string(mask.size()) + " entries, expected " +
                     std::to_string(expected));
  }
  for (int bit : mask) {
    if (bit != 0 && bit != 1) throw ValueError("modality mask entries must be 0 or 1, got " + std::to_string(bit));
  }
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& volume, std::size_t patch) {
  if (volume.rank() != 4) {
    throw DimensionError("patchify expects a [H, W, D, C] volume, got " + shape_string(volume.shape()));
  }
  if (patch == 0) throw DimensionError("patchify: patch size must be positive");
  const auto& s = volume.shape();
  const char* names[3] = {"H", "W", "D"};
  for (int a = 0; a < 3; ++a) {
    if (s[a] % patch != 0) {
      throw DimensionError(std::string("patchify: axis ") + names[a] + " (" + std::to_string(s[a]) +
                           ") is not divisible by patch size " + std::to_string(patch));
    }
  }
  const std::size_t H = s[0], W = s[1], D = s[2], C = s[3];
  const std::size_t ni = H / patch, nj = W / patch, nk = D / patch;
  const std::size_t width = patch * patch * patch * C;
  Tensor<T> out(Shape{ni * nj * nk, width});
  T* dst = out.raw();
  const T* src = volume.raw();
  for (std::size_t i = 0; i < ni; ++i) {
    for (std::size_t j = 0; j < nj; ++j) {
      for (std::size_t k = 0; k < nk; ++k) {
        for (std::size_t a = 0; a < patch; ++a) {
          for (std::size_t b = 0; b < patch; ++b) {
            // The (c, channel) run is contiguous in the source.
            const std::size_t x = i * patch + a, y = j * patch + b, z = k * patch;
            const T* run = src + ((x * W + y) * D + z) * C;
            std::copy_n(run, patch * C, dst);
            dst += patch * C;
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
BoundParameters<T>::BoundParameters(Graph<T>& graph, const ParameterSet<T>& params) {
  for (const auto& [path, t] : params) vars_.emplace(path, graph.parameter(path, t));
}

template <typename T>
Var BoundParameters<T>::operator()(std::string_view path) const {
  auto it = vars_.find(std::string(path));
  if (it == vars_.end()) throw ValueError("parameter '" + std::string(path) + "' is not bound");
  return it->second;
}

namespace layers {

namespace {

std::string join(std::string_view a, std::string_view b) {
  std::string s(a);
  s += '/';
  s += b;
  return s;
}

template <typename T>
Var linear(Graph<T>& g, Var x, const BoundParameters<T>& p, const std::string& weight, const std::string& bias) {
  return ad::add_bias(g, ad::matmul(g, x, p(weight)), p(bias));
}

}  // namespace

template <typename T>
Var multi_head_attention(Graph<T>& g, Var q, Var k, Var v, std::size_t heads) {
  const std::size_t d = g.value(q).cols();
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("attention width " + std::to_string(d) + " is not divisible by " + std::to_string(heads) +
                         " heads");
  }
  if (g.value(k).cols() != d || g.value(v).cols() != d || g.value(k).rows() != g.value(v).rows()) {
    throw DimensionError("attention: q " + shape_string(g.value(q).shape()) + ", k " +
                         shape_string(g.value(k).shape()) + ", v " + shape_string(g.value(v).shape()));
  }
  const std::size_t dk = d / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(dk));
  if (heads == 1) {
    Var weights = ad::softmax(g, ad::scale(g, ad::matmul_nt(g, q, k), scale), 1);
    return ad::matmul(g, weights, v);
  }
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(g, q, h * dk, dk);
    Var kh = ad::slice_cols(g, k, h * dk, dk);
    Var vh = ad::slice_cols(g, v, h * dk, dk);
    Var weights = ad::softmax(g, ad::scale(g, ad::matmul_nt(g, qh, kh), scale), 1);
    outs.push_back(ad::matmul(g, weights, vh));
  }
  return ad::concat_cols(g, outs);
}

template <typename T>
Var embed_tokens(Graph<T>& g, Var patches, const BoundParameters<T>& p, std::string_view prefix) {
  const std::string pre(prefix);
  Var tokens = linear(g, patches, p, pre + "/patch_embed/weight", pre + "/patch_embed/bias");
  Var seq = ad::concat_rows(g, {p(pre + "/cls"), tokens});
  return ad::add(g, seq, p(pre + "/pos"));
}

template <typename T>
Var encoder_forward(Graph<T>& g, Var tokens, const BoundParameters<T>& p, std::string_view prefix,
                    const ModelConfig& config) {
  const T eps = static_cast<T>(config.layer_norm_eps);
  Var x = tokens;
  for (std::size_t b = 0; b < config.depth; ++b) {
    char idx[8];
    std::snprintf(idx, sizeof idx, "%02zu", b);
    const std::string blk = join(prefix, "blocks/") + idx;

    Var h = ad::layer_norm(g, x, p(blk + "/norm1/gamma"), p(blk + "/norm1/beta"), eps);
    Var q = linear(g, h, p, blk + "/attn/wq", blk + "/attn/bq");
    Var k = linear(g, h, p, blk + "/attn/wk", blk + "/attn/bk");
    Var v = linear(g, h, p, blk + "/attn/wv", blk + "/attn/bv");
    Var att = multi_head_attention(g, q, k, v, config.num_heads);
    x = ad::add(g, x, linear(g, att, p, blk + "/attn/wo", blk + "/attn/bo"));

    Var h2 = ad::layer_norm(g, x, p(blk + "/norm2/gamma"), p(blk + "/norm2/beta"), eps);
    Var m = ad::gelu(g, linear(g, h2, p, blk + "/mlp/fc1/weight", blk + "/mlp/fc1/bias"));
    x = ad::add(g, x, linear(g, m, p, blk + "/mlp/fc2/weight", blk + "/mlp/fc2/bias"));
  }
  return x;
}

template <typename T>
Var cross_attention_fuse(Graph<T>& g, Var cls_a, Var tokens_b, const BoundParameters<T>& p,
                         std::string_view prefix_a, std::size_t heads) {
  const std::size_t nb = g.value(tokens_b).rows();
  if (nb < 2) throw DimensionError("cross_attention_fuse: other branch has no patch tokens");
  if (g.value(cls_a).rows() != 1 || g.value(cls_a).cols() != g.value(tokens_b).cols()) {
    throw DimensionError("cross_attention_fuse: cls " + shape_string(g.value(cls_a).shape()) + " vs tokens " +
                         shape_string(g.value(tokens_b).shape()));
  }
  const std::string pre = join(prefix_a, "fusion/");
  Var patches_b = ad::slice_rows(g, tokens_b, 1, nb - 1);
  Var q = ad::matmul(g, cls_a, p(pre + "wq"));
  Var k = ad::matmul(g, patches_b, p(pre + "wk"));
  Var v = ad::matmul(g, patches_b, p(pre + "wv"));
  Var att = multi_head_attention(g, q, k, v, heads);
  Var out = ad::add_bias(g, ad::matmul(g, att, p(pre + "wo")), p(pre + "bo"));
  return ad::add(g, cls_a, out);
}

template <typename T>
Var modality_cross_attention(Graph<T>& g, std::span<const int> mask, Var tokens, const BoundParameters<T>& p,
                             std::string_view prefix) {
  const std::string pre = join(prefix, "modality/");
  const std::size_t m = g.value(p(pre + "mlp/fc1/weight")).rows();
  validate_mask(mask, m);
  const std::size_t d = g.value(tokens).cols();

  Tensor<T> y(Shape{1, m});
  for (std::size_t i = 0; i < m; ++i) y[i] = static_cast<T>(mask[i]);
  Var hidden = ad::gelu(g, linear(g, g.constant(std::move(y)), p, pre + "mlp/fc1/weight", pre + "mlp/fc1/bias"));
  Var query_tokens =
      ad::reshape(g, linear(g, hidden, p, pre + "mlp/fc2/weight", pre + "mlp/fc2/bias"), Shape{m, d});

  Var q = ad::matmul(g, query_tokens, p(pre + "wq"));
  Var k = ad::matmul(g, tokens, p(pre + "wk"));
  Var v = ad::matmul(g, tokens, p(pre + "wv"));
  Var att = multi_head_attention(g, q, k, v, 1);
  return ad::mean_rows(g, att);
}

template <typename T>
Var classification_head(Graph<T>& g, Var features, const BoundParameters<T>& p, std::string_view prefix) {
  const std::string pre = join(prefix, "head/");
  Var logits = linear(g, features, p, pre + "weight", pre + "bias");
  return ad::softmax(g, logits, 1);
}

#define MPVIT_INSTANTIATE_LAYERS(T)                                                                          \
  template Var multi_head_attention(Graph<T>&, Var, Var, Var, std::size_t);                                  \
  template Var embed_tokens(Graph<T>&, Var, const BoundParameters<T>&, std::string_view);                    \
  template Var encoder_forward(Graph<T>&, Var, const BoundParameters<T>&, std::string_view,                  \
                               const ModelConfig&);                                                          \
  template Var cross_attention_fuse(Graph<T>&, Var, Var, const BoundParameters<T>&, std::string_view,        \
                                    std::size_t);                                                            \
  template Var modality_cross_attention(Graph<T>&, std::span<const int>, Var, const BoundParameters<T>&,      \
                                        std::string_view);                                                   \
  template Var classification_head(Graph<T>&, Var, const BoundParameters<T>&, std::string_view);

MPVIT_INSTANTIATE_LAYERS(float)
MPVIT_INSTANTIATE_LAYERS(double)
#undef MPVIT_INSTANTIATE_LAYERS

}  // namespace layers

template <typename T>
ForwardResult forward_patches(Graph<T>& g, const BoundParameters<T>& p, const ModelConfig& config,
                              const std::vector<Tensor<T>>& patches, const ModalityIndicator& indicator) {
  const auto planes = config.planes();
  if (patches.size() != planes.size()) {
    throw DimensionError("forward: expected " + std::to_string(planes.size()) + " patch matrices, got " +
                         std::to_string(patches.size()));
  }

  std::vector<Var> encoded;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const Plane plane = planes[i];
    const Shape expected{config.patch_count(plane), config.patch_dim(plane)};
    if (patches[i].shape() != expected) {
      throw DimensionError(std::string(plane_name(plane)) + " patches " + shape_string(patches[i].shape()) +
                           " do not match config " + shape_string(expected));
    }
    Var tokens = layers::embed_tokens(g, g.constant(patches[i]), p, plane_name(plane));
    encoded.push_back(layers::encoder_forward(g, tokens, p, plane_name(plane), config));
  }

  // Both fusion directions read the encoder outputs, not each other's result.
  std::vector<Var> sequences = encoded;
  if (config.multi_plane) {
    for (std::size_t i = 0; i < 2; ++i) {
      const Var self = encoded[i];
      const Var other = encoded[1 - i];
      const std::size_t n = g.value(self).rows();
      Var cls = ad::slice_rows(g, self, 0, 1);
      Var fused = layers::cross_attention_fuse(g, cls, other, p, plane_name(planes[i]),
                                               config.effective_fusion_heads());
      sequences[i] = ad::concat_rows(g, {fused, ad::slice_rows(g, self, 1, n - 1)});
    }
  }

  ForwardResult result;
  std::vector<Var> positives;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const Plane plane = planes[i];
    Var features;
    if (config.modality_vector) {
      const auto& mask = indicator.mask(plane);
      features = layers::modality_cross_attention(g, std::span<const int>(mask), sequences[i], p, plane_name(plane));
    } else {
      validate_mask(indicator.mask(plane), config.channels(plane));
      features = ad::slice_rows(g, sequences[i], 0, 1);
    }
    Var probs = layers::classification_head(g, features, p, plane_name(plane));
    result.head_probs.push_back(probs);
    positives.push_back(ad::element(g, probs, 1));
  }
  if (positives.size() == 1) {
    result.prob = positives.front();
  } else {
    result.prob = ad::scale(g, ad::add(g, positives[0], positives[1]), T{0.5});
  }
  return result;
}

template <typename T>
ForwardResult forward(Graph<T>& g, const BoundParameters<T>& p, const ModelConfig& config,
                      const VolumeSample<T>& sample) {
  std::vector<Tensor<T>> patches;
  for (Plane plane : config.planes()) {
    const auto& vol = sample.volume(plane);
    const Grid& grid = config.grid(plane);
    const Shape expected{grid.h, grid.w, grid.d, config.channels(plane)};
    if (vol.shape() != expected) {
      throw DimensionError(std::string(plane_name(plane)) + " volume " + shape_string(vol.shape()) +
                           " does not match the model grid " + shape_string(expected));
    }
    patches.push_back(patchify(vol, config.patch));
  }
  return forward_patches(g, p, config, patches, sample.indicator);
}

template <typename T>
Prediction predict(const ModelConfig& config, const ParameterSet<T>& params, const VolumeSample<T>& sample) {
  Graph<T> g(false);
  BoundParameters<T> bound(g, params);
  const auto r = forward(g, bound, config, sample);
  Prediction out;
  out.prob = static_cast<double>(g.value(r.prob)[0]);
  for (Var h : r.head_probs) out.head_probs.push_back(static_cast<double>(g.value(h)[1]));
  return out;
}

template <typename T>
std::vector<double> predict_all(const ModelConfig& config, const ParameterSet<T>& params, const Dataset<T>& data,
                                std::size_t threads) {
  std::vector<double> scores(data.size());
  detail::parallel_for(data.size(), threads, [&](std::size_t i) { scores[i] = predict(config, params, data[i]).prob; });
  return scores;
}

#define MPVIT_INSTANTIATE_MODEL(T)                                                                            \
  template Tensor<T> patchify(const Tensor<T>&, std::size_t);                                                 \
  template class BoundParameters<T>;                                                                          \
  template ForwardResult forward_patches(Graph<T>&, const BoundParameters<T>&, const ModelConfig&,            \
                                         const std::vector<Tensor<T>>&, const ModalityIndicator&);            \
  template ForwardResult forward(Graph<T>&, const BoundParameters<T>&, const ModelConfig&,                    \
                                 const VolumeSample<T>&);                                                     \
  template Prediction predict(const ModelConfig&, const ParameterSet<T>&, const VolumeSample<T>&);            \
  template std::vector<double> predict_all(const ModelConfig&, const ParameterSet<T>&, const Dataset<T>&,      \
                                           std::size_t);

MPVIT_INSTANTIATE_MODEL(float)
MPVIT_INSTANTIATE_MODEL(double)
#undef MPVIT_INSTANTIATE_MODEL

}  // namespace mpvit
