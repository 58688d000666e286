#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vmk/common.hpp"
#include "vmk/tensor.hpp"

namespace vmk {

// Deterministic forward/backward kernels for the small heads in this
// library. Reductions accumulate in double regardless of the storage type.

template <typename T>
TensorT<T> dense(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
    throw std::invalid_argument("dense: expected x[N,D], w[D,E], b[E]");
  const std::int64_t n = x.dim(0), d = x.dim(1), e = w.dim(1);
  if (w.dim(0) != d || b.dim(0) != e) throw std::invalid_argument("dense: shape chain mismatch");
  TensorT<T> y({n, e});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < e; ++j) {
      double acc = static_cast<double>(b.data[static_cast<std::size_t>(j)]);
      for (std::int64_t k = 0; k < d; ++k) {
        acc += static_cast<double>(x.at2(i, k)) * static_cast<double>(w.at2(k, j));
      }
      y.at2(i, j) = static_cast<T>(acc);
    }
  }
  return y;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

/// Softmax over the last axis with max subtraction.
template <typename T>
TensorT<T> softmax(const TensorT<T>& x) {
  if (x.rank() == 0 || x.shape.empty()) throw std::invalid_argument("softmax: empty tensor");
  const std::int64_t k = x.shape.back();
  const std::int64_t rows = x.numel() / k;
  TensorT<T> y = x;
  for (std::int64_t r = 0; r < rows; ++r) {
    T* row = y.data.data() + r * k;
    T m = row[0];
    for (std::int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    // Accumulate in value order so reordering the row cannot change the sum.
    std::vector<double> terms(static_cast<std::size_t>(k));
    for (std::int64_t j = 0; j < k; ++j) {
      row[j] = std::exp(row[j] - m);
      terms[static_cast<std::size_t>(j)] = static_cast<double>(row[j]);
    }
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += t;
    for (std::int64_t j = 0; j < k; ++j) row[j] = static_cast<T>(row[j] / sum);
  }
  return y;
}

namespace detail {

/// out = a v with each reduction accumulated in sorted value order, so the
/// result depends only on the multiset of terms and not on row ordering.
template <typename T>
void weighted_rows(const TensorT<T>& a, const TensorT<T>& v, TensorT<T>& out) {
  const std::int64_t nq = a.dim(0), nk = a.dim(1), e = v.dim(1);
  std::vector<double> terms(static_cast<std::size_t>(nk));
  for (std::int64_t i = 0; i < nq; ++i) {
    for (std::int64_t j = 0; j < e; ++j) {
      for (std::int64_t c = 0; c < nk; ++c)
        terms[static_cast<std::size_t>(c)] =
            static_cast<double>(a.at2(i, c)) * static_cast<double>(v.at2(c, j));
      std::sort(terms.begin(), terms.end());
      double acc = 0.0;
      for (double t : terms) acc += t;
      out.at2(i, j) = static_cast<T>(acc);
    }
  }
}

}  // namespace detail

/// Single-head scaled dot-product attention: softmax(q k^T / sqrt(D)) v.
template <typename T>
TensorT<T> attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw std::invalid_argument("attention: expected 2-D q, k, v");
  const std::int64_t nq = q.dim(0), d = q.dim(1), nk = k.dim(0), e = v.dim(1);
  if (k.dim(1) != d || v.dim(0) != nk) throw std::invalid_argument("attention: shape mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  TensorT<T> scores({nq, nk});
  for (std::int64_t i = 0; i < nq; ++i) {
    for (std::int64_t j = 0; j < nk; ++j) {
      double acc = 0.0;
      for (std::int64_t c = 0; c < d; ++c)
        acc += static_cast<double>(q.at2(i, c)) * static_cast<double>(k.at2(j, c));
      scores.at2(i, j) = static_cast<T>(acc * scale);
    }
  }
  const TensorT<T> a = softmax(scores);
  TensorT<T> out({nq, e});
  detail::weighted_rows(a, v, out);
  return out;
}

/// attention() that also returns the softmax weights for backprop.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> attention_with_weights(const TensorT<T>& q, const TensorT<T>& k,
                                                         const TensorT<T>& v) {
  const std::int64_t nq = q.dim(0), d = q.dim(1), nk = k.dim(0), e = v.dim(1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  TensorT<T> scores({nq, nk});
  for (std::int64_t i = 0; i < nq; ++i) {
    for (std::int64_t j = 0; j < nk; ++j) {
      double acc = 0.0;
      for (std::int64_t c = 0; c < d; ++c)
        acc += static_cast<double>(q.at2(i, c)) * static_cast<double>(k.at2(j, c));
      scores.at2(i, j) = static_cast<T>(acc * scale);
    }
  }
  TensorT<T> a = softmax(scores);
  TensorT<T> out({nq, e});
  detail::weighted_rows(a, v, out);
  return {out, a};
}

/// Gradients of attention given the cached softmax weights.
/// dS_ij = A_ij (dA_ij - sum_k A_ik dA_ik); dQ = dS K / sqrt(D), etc.
template <typename T>
struct AttentionGrads {
  TensorT<T> dq, dk, dv;
};

template <typename T>
AttentionGrads<T> attention_backward(const TensorT<T>& dout, const TensorT<T>& q,
                                     const TensorT<T>& k, const TensorT<T>& v,
                                     const TensorT<T>& weights) {
  const std::int64_t nq = q.dim(0), d = q.dim(1), nk = k.dim(0), e = v.dim(1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionGrads<T> g{TensorT<T>({nq, d}), TensorT<T>({nk, d}), TensorT<T>({nk, e})};
  // dV = A^T dOut
  for (std::int64_t j = 0; j < nk; ++j) {
    for (std::int64_t c = 0; c < e; ++c) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < nq; ++i)
        acc += static_cast<double>(weights.at2(i, j)) * static_cast<double>(dout.at2(i, c));
      g.dv.at2(j, c) = static_cast<T>(acc);
    }
  }
  // dA = dOut V^T, then softmax backward row-wise into dS.
  TensorT<T> ds({nq, nk});
  for (std::int64_t i = 0; i < nq; ++i) {
    std::vector<double> da(static_cast<std::size_t>(nk), 0.0);
    for (std::int64_t j = 0; j < nk; ++j) {
      double acc = 0.0;
      for (std::int64_t c = 0; c < e; ++c)
        acc += static_cast<double>(dout.at2(i, c)) * static_cast<double>(v.at2(j, c));
      da[static_cast<std::size_t>(j)] = acc;
    }
    double mix = 0.0;
    for (std::int64_t j = 0; j < nk; ++j)
      mix += static_cast<double>(weights.at2(i, j)) * da[static_cast<std::size_t>(j)];
    for (std::int64_t j = 0; j < nk; ++j) {
      ds.at2(i, j) = static_cast<T>(static_cast<double>(weights.at2(i, j)) *
                                    (da[static_cast<std::size_t>(j)] - mix));
    }
  }
  // dQ = dS K * scale; dK = dS^T Q * scale
  for (std::int64_t i = 0; i < nq; ++i) {
    for (std::int64_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < nk; ++j)
        acc += static_cast<double>(ds.at2(i, j)) * static_cast<double>(k.at2(j, c));
      g.dq.at2(i, c) = static_cast<T>(acc * scale);
    }
  }
  for (std::int64_t j = 0; j < nk; ++j) {
    for (std::int64_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < nq; ++i)
        acc += static_cast<double>(ds.at2(i, j)) * static_cast<double>(q.at2(i, c));
      g.dk.at2(j, c) = static_cast<T>(acc * scale);
    }
  }
  return g;
}

/// Feed-forward stack of dense layers, ReLU between them, raw logits out.
template <typename T>
struct MlpParamsT {
  struct Layer {
    TensorT<T> w;  // [in, out]
    TensorT<T> b;  // [out]
  };
  std::vector<Layer> layers;

  std::int64_t input_dim() const { return layers.front().w.dim(0); }
  std::int64_t output_dim() const { return layers.back().w.dim(1); }
};

using MlpParams = MlpParamsT<float>;

/// Xavier-uniform initialization, deterministic under the given rng.
template <typename T>
MlpParamsT<T> make_mlp(const std::vector<std::int64_t>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dim");
  MlpParamsT<T> p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    typename MlpParamsT<T>::Layer layer{TensorT<T>({dims[l], dims[l + 1]}),
                                        TensorT<T>({dims[l + 1]})};
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (auto& v : layer.w.data) v = static_cast<T>(rng.uniform(-bound, bound));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
struct MlpCacheT {
  std::vector<TensorT<T>> inputs;   // input to each layer (post-activation of previous)
  std::vector<TensorT<T>> preacts;  // pre-activation output of each layer
};

template <typename T>
std::pair<TensorT<T>, MlpCacheT<T>> mlp_forward(const MlpParamsT<T>& params, const TensorT<T>& x) {
  if (x.rank() != 2) throw std::invalid_argument("mlp_forward: expected x[N,D]");
  MlpCacheT<T> cache;
  TensorT<T> cur = x;
  const std::size_t nl = params.layers.size();
  for (std::size_t l = 0; l < nl; ++l) {
    cache.inputs.push_back(cur);
    TensorT<T> z = dense(cur, params.layers[l].w, params.layers[l].b);
    cache.preacts.push_back(z);
    cur = (l + 1 < nl) ? relu(z) : z;
  }
  return {cur, cache};
}

template <typename T>
struct MlpGradsT {
  std::vector<typename MlpParamsT<T>::Layer> layers;  // dw, db per layer
  TensorT<T> dx;
};

template <typename T>
MlpGradsT<T> mlp_backward(const MlpParamsT<T>& params, const MlpCacheT<T>& cache,
                          const TensorT<T>& dlogits) {
  const std::size_t nl = params.layers.size();
  if (cache.inputs.size() != nl) throw std::invalid_argument("mlp_backward: cache mismatch");
  MlpGradsT<T> g;
  g.layers.resize(nl);
  TensorT<T> dcur = dlogits;
  for (std::size_t l = nl; l-- > 0;) {
    const TensorT<T>& x = cache.inputs[l];
    const TensorT<T>& z = cache.preacts[l];
    TensorT<T> dz = dcur;
    if (l + 1 < nl) {
      for (std::size_t i = 0; i < dz.data.size(); ++i) {
        if (z.data[i] <= T(0)) dz.data[i] = T(0);
      }
    }
    const std::int64_t n = x.dim(0), din = x.dim(1), dout = dz.dim(1);
    typename MlpParamsT<T>::Layer grad{TensorT<T>({din, dout}), TensorT<T>({dout})};
    for (std::int64_t a = 0; a < din; ++a) {
      for (std::int64_t b = 0; b < dout; ++b) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
          acc += static_cast<double>(x.at2(i, a)) * static_cast<double>(dz.at2(i, b));
        grad.w.at2(a, b) = static_cast<T>(acc);
      }
    }
    for (std::int64_t b = 0; b < dout; ++b) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(dz.at2(i, b));
      grad.b.data[static_cast<std::size_t>(b)] = static_cast<T>(acc);
    }
    TensorT<T> dx({n, din});
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t a = 0; a < din; ++a) {
        double acc = 0.0;
        for (std::int64_t b = 0; b < dout; ++b)
          acc += static_cast<double>(dz.at2(i, b)) *
                 static_cast<double>(params.layers[l].w.at2(a, b));
        dx.at2(i, a) = static_cast<T>(acc);
      }
    }
    g.layers[l] = std::move(grad);
    dcur = std::move(dx);
  }
  g.dx = std::move(dcur);
  return g;
}

/// Velocity state for classic momentum SGD: v' = mu v + g; p' = p - lr v'.
template <typename T>
struct SgdStateT {
  std::vector<typename MlpParamsT<T>::Layer> velocity;
};

template <typename T>
void sgd_step(MlpParamsT<T>& params, const MlpGradsT<T>& grads, SgdStateT<T>& state, double lr,
              double momentum) {
  if (grads.layers.size() != params.layers.size())
    throw std::invalid_argument("sgd_step: grads/params layer count mismatch");
  if (state.velocity.empty()) {
    for (const auto& layer : params.layers) {
      state.velocity.push_back({TensorT<T>(layer.w.shape), TensorT<T>(layer.b.shape)});
    }
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto step = [&](TensorT<T>& p, TensorT<T>& v, const TensorT<T>& g) {
      if (!p.same_shape(g)) throw std::invalid_argument("sgd_step: gradient shape mismatch");
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        v.data[i] = static_cast<T>(momentum * static_cast<double>(v.data[i]) +
                                   static_cast<double>(g.data[i]));
        p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) -
                                   lr * static_cast<double>(v.data[i]));
      }
    };
    step(params.layers[l].w, state.velocity[l].w, grads.layers[l].w);
    step(params.layers[l].b, state.velocity[l].b, grads.layers[l].b);
  }
}

}  // namespace vmk
