#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sheafnet/activation.hpp"
#include "sheafnet/error.hpp"
#include "sheafnet/network.hpp"
#include "sheafnet/topology.hpp"

namespace sheafnet {

namespace detail {

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
  Matrix m(rows, cols);
  for (auto& v : m.data) v = normal(rng);
  return m;
}

inline Vec random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 0.1);
  Vec v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

inline Section affine_map(Matrix w, Vec b) {
  const std::size_t cols = w.cols;
  return affine(std::move(w), std::move(b), Section::identity(cols));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolutional networks on a square grid

/// Non-overlapping convolution with a kernel x kernel window.
struct ConvStep {
  std::size_t kernel = 2;
  std::size_t filters = 4;
  std::string activation = "relu";
  /// Filter block p copies input p into rows [p*in, (p+1)*in); needs
  /// filters = kernel^2 * input dim. Output is a permutation of the patch.
  bool identity_filter = false;
};

enum class PoolKind { max, sum, avg };

struct PoolStep {
  PoolKind kind = PoolKind::max;
  std::size_t kernel = 2;
  std::size_t stride = 0;  ///< 0 means stride = kernel
};

/// Fully connected head onto the global open set; must be the last step.
struct DenseStep {
  std::size_t k = 1;
  std::string activation = "identity";
};

using CnnStep = std::variant<ConvStep, PoolStep, DenseStep>;

struct CnnPlan {
  std::vector<CnnStep> steps;
  std::uint64_t seed = 0;
  std::size_t channels = 3;
};

/// Grid network on side x side cells, one marked point per cell with
/// `channels` fiber coordinates, following `plan`.
inline Network build_cnn(std::size_t side, const CnnPlan& plan) {
  if (side < 2) throw InvalidInput("build_cnn needs a grid side of at least 2");
  if (plan.steps.empty() || !std::holds_alternative<DenseStep>(plan.steps.back()))
    throw InvalidInput("CNN plan must end with a dense step onto the global set");
  const MarkedSpace space = MarkedSpace::grid(side, side, plan.channels);
  std::mt19937_64 rng(plan.seed);

  // Current stage as a grid of patches.
  std::size_t rows = side, cols = side, dim = plan.channels;
  std::vector<PointSet> patches;
  for (std::size_t i = 0; i < side * side; ++i) patches.push_back(PointSet{i});

  std::vector<std::vector<PointSet>> stages{patches};
  std::vector<Layer> layers;

  for (std::size_t s = 0; s < plan.steps.size(); ++s) {
    const std::string where = "CNN plan step " + std::to_string(s) + ": ";
    if (const auto* dense = std::get_if<DenseStep>(&plan.steps[s])) {
      if (s + 1 != plan.steps.size()) throw InvalidInput(where + "dense step must come last");
      if (dense->k == 0) throw InvalidInput(where + "dense output dimension must be positive");
      FactorsThroughInclusion f{{}, &activation(dense->activation)};
      std::vector<std::size_t> all;
      for (std::size_t a = 0; a < patches.size(); ++a) {
        all.push_back(a);
        f.phi.push_back(detail::affine_map(detail::random_matrix(rng, dense->k, dim),
                                           a == 0 ? detail::random_vector(rng, dense->k) : Vec{}));
      }
      layers.push_back(Layer{{all}, std::move(f), dense->k});
      break;
    }

    std::size_t kernel = 0, stride = 0;
    if (const auto* conv = std::get_if<ConvStep>(&plan.steps[s])) {
      kernel = stride = conv->kernel;
    } else {
      const auto& pool = std::get<PoolStep>(plan.steps[s]);
      kernel = pool.kernel;
      stride = pool.stride == 0 ? pool.kernel : pool.stride;
    }
    if (kernel == 0 || kernel > rows || kernel > cols || (rows - kernel) % stride != 0 || (cols - kernel) % stride != 0)
      throw InvalidInput(where + "window does not tile the current " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " patch grid");
    const std::size_t out_rows = (rows - kernel) / stride + 1;
    const std::size_t out_cols = (cols - kernel) / stride + 1;

    std::vector<PointSet> next;
    std::vector<std::vector<std::size_t>> aggregation;
    std::vector<std::size_t> position(patches.size(), 0);  // slot of each input inside its window
    for (std::size_t r = 0; r < out_rows; ++r)
      for (std::size_t c = 0; c < out_cols; ++c) {
        PointSet members;
        std::vector<std::size_t> agg;
        for (std::size_t i = 0; i < kernel; ++i)
          for (std::size_t j = 0; j < kernel; ++j) {
            const std::size_t a = (r * stride + i) * cols + (c * stride + j);
            agg.push_back(a);
            members = members | patches[a];
            position[a] = i * kernel + j;
          }
        next.push_back(std::move(members));
        aggregation.push_back(std::move(agg));
      }

    Layer layer;
    layer.aggregation = std::move(aggregation);
    if (const auto* conv = std::get_if<ConvStep>(&plan.steps[s])) {
      const std::size_t window = kernel * kernel;
      std::vector<Matrix> filter;
      if (conv->identity_filter) {
        if (conv->filters != window * dim) throw InvalidInput(where + "identity filter needs kernel^2 * dim outputs");
        for (std::size_t p = 0; p < window; ++p) {
          Matrix w(conv->filters, dim);
          for (std::size_t t = 0; t < dim; ++t) w(p * dim + t, t) = 1.0;
          filter.push_back(std::move(w));
        }
      } else {
        for (std::size_t p = 0; p < window; ++p) filter.push_back(detail::random_matrix(rng, conv->filters, dim));
      }
      const Vec bias = conv->identity_filter ? Vec{} : detail::random_vector(rng, conv->filters);
      FactorsThroughInclusion f{{}, &activation(conv->activation)};
      for (std::size_t a = 0; a < patches.size(); ++a)
        f.phi.push_back(detail::affine_map(filter[position[a]], position[a] == 0 ? bias : Vec{}));
      layer.kind = std::move(f);
      layer.out_dim = conv->filters;
      dim = conv->filters;
    } else {
      const auto& pool = std::get<PoolStep>(plan.steps[s]);
      if (pool.kind == PoolKind::max) {
        layer.kind = General{MaxPool{}};
      } else {
        const double scale = pool.kind == PoolKind::avg ? 1.0 / static_cast<double>(kernel * kernel) : 1.0;
        FactorsThroughInclusion f{{}, &activation("identity")};
        for (std::size_t a = 0; a < patches.size(); ++a)
          f.phi.push_back(scale == 1.0 ? Section::identity(dim) : scaled(Section::identity(dim), scale));
        layer.kind = std::move(f);
      }
      layer.out_dim = dim;
    }
    layers.push_back(std::move(layer));
    patches = std::move(next);
    rows = out_rows;
    cols = out_cols;
    stages.push_back(patches);
  }
  return Network(CoverSequence::with_global(space, std::move(stages)), std::move(layers));
}

// ---------------------------------------------------------------------------
// Recurrent covers

enum class RecurrentKind { rnn, lstm };

/// Cover sequence of a recurrent network over N ordered points.
///
/// rnn: stage t holds the prefix {1..t+1} and the points not yet read.
/// lstm: stage t holds all windows of `window + t - 1` consecutive points.
inline CoverSequence build_rnn_cover(std::size_t n, RecurrentKind kind, std::size_t window = 2) {
  if (n < 2) throw InvalidInput("recurrent covers need at least two points");
  const MarkedSpace space(std::vector<std::size_t>(n, 1), LineShape{});
  std::vector<std::vector<PointSet>> stages;
  std::vector<PointSet> singletons;
  for (std::size_t i = 0; i < n; ++i) singletons.push_back(PointSet{i});
  stages.push_back(singletons);

  if (kind == RecurrentKind::rnn) {
    for (std::size_t t = 1; t < n; ++t) {
      std::vector<PointSet> stage{PointSet::range(t + 1)};
      for (std::size_t i = t + 1; i < n; ++i) stage.push_back(PointSet{i});
      stages.push_back(std::move(stage));
    }
    return CoverSequence(space, stages);
  }

  if (window < 2 || window > n) throw InvalidInput("lstm window must lie in [2, N]");
  for (std::size_t w = window; w < n; ++w) {
    std::vector<PointSet> stage;
    for (std::size_t start = 0; start + w <= n; ++start) {
      std::vector<std::size_t> pts;
      for (std::size_t i = start; i < start + w; ++i) pts.push_back(i);
      stage.push_back(PointSet(std::move(pts)));
    }
    stages.push_back(std::move(stage));
  }
  stages.push_back({space.all_points()});
  return CoverSequence(space, stages);
}

/// Recurrent network on a recurrent cover: every stage carries `hidden`
/// features per element, each layer is F(sum phi_a) with tanh.
inline Network build_rnn(std::size_t n, RecurrentKind kind, std::size_t hidden, std::uint64_t seed,
                         std::size_t window = 2) {
  CoverSequence seq = build_rnn_cover(n, kind, window);
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (std::size_t s = 0; s + 1 < seq.size(); ++s) {
    const Cover& in = seq[s];
    const Cover& out = seq[s + 1];
    Layer l;
    for (std::size_t b = 0; b < out.size(); ++b) {
      std::vector<std::size_t> agg;
      for (std::size_t a = 0; a < in.size(); ++a)
        if (in[a].members.subset_of(out[b].members)) agg.push_back(a);
      l.aggregation.push_back(std::move(agg));
    }
    const std::size_t in_dim = s == 0 ? 1 : hidden;
    FactorsThroughInclusion f{{}, &activation("tanh")};
    for (std::size_t a = 0; a < in.size(); ++a)
      f.phi.push_back(detail::affine_map(detail::random_matrix(rng, hidden, in_dim), detail::random_vector(rng, hidden)));
    l.kind = std::move(f);
    l.out_dim = hidden;
    layers.push_back(std::move(l));
  }
  return Network(std::move(seq), std::move(layers));
}

// ---------------------------------------------------------------------------
// Attention

/// Points x_{i,j} on the cylinder S^1 x [0,1], index (i-1)*d + (j-1).
inline std::vector<std::pair<double, double>> positional_encoding(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0) throw InvalidInput("positional encoding needs N, d >= 1");
  std::vector<std::pair<double, double>> out;
  out.reserve(n * d);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= d; ++j) {
      const double angle =
          static_cast<double>(i) / std::pow(10000.0, 2.0 * static_cast<double>(j) / static_cast<double>(d));
      const double s = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
      out.emplace_back(s, (2.0 * static_cast<double>(j) - 1.0) / (2.0 * static_cast<double>(d)));
    }
  return out;
}

/// Deviation adding the first encoding coordinate to every input value.
inline Deviation positional_deviation(const MarkedSpace& space, std::size_t n, std::size_t d) {
  const auto pe = positional_encoding(n, d);
  std::vector<Vec> offsets;
  for (const auto& [s, t] : pe) offsets.push_back({s});
  return Deviation::constant(space, offsets);
}

/// Per-head d x w query/key/value maps and the wh x d output map.
struct AttentionWeights {
  std::vector<Matrix> wq, wk, wv;
  Matrix wz;

  static AttentionWeights random(std::size_t d, std::size_t heads, std::size_t width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    AttentionWeights w;
    for (std::size_t h = 0; h < heads; ++h) {
      w.wq.push_back(detail::random_matrix(rng, d, width));
      w.wk.push_back(detail::random_matrix(rng, d, width));
      w.wv.push_back(detail::random_matrix(rng, d, width));
    }
    w.wz = detail::random_matrix(rng, heads * width, d);
    return w;
  }
};

/// One multi-head attention block over N tokens of d features.
///
/// Stages: N*d singletons, N tokens, N copies of the whole set (one per
/// attending token), global. Layers: token projection to [q|k|v] (factoring),
/// attention (general), output map W_Z placed into token blocks (factoring).
inline Network build_attention(std::size_t n, std::size_t d, const AttentionWeights& w) {
  if (n == 0 || d == 0 || w.wq.empty()) throw InvalidInput("attention needs positive N, d and heads");
  const std::size_t heads = w.wq.size();
  const std::size_t width = w.wq.front().cols;
  const std::size_t hw = heads * width;
  if (w.wk.size() != heads || w.wv.size() != heads) throw InvalidInput("attention needs q, k, v maps for every head");
  for (std::size_t h = 0; h < heads; ++h)
    for (const Matrix* m : {&w.wq[h], &w.wk[h], &w.wv[h]})
      if (m->rows != d || m->cols != width) throw InvalidInput("attention head maps must be d x w");
  if (w.wz.rows != hw || w.wz.cols != d) throw InvalidInput("attention output map must be wh x d");

  const MarkedSpace space(std::vector<std::size_t>(n * d, 1), GridShape{n, d});
  std::vector<PointSet> singles, tokens, copies;
  for (std::size_t p = 0; p < n * d; ++p) singles.push_back(PointSet{p});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> pts;
    for (std::size_t j = 0; j < d; ++j) pts.push_back(i * d + j);
    tokens.push_back(PointSet(std::move(pts)));
    copies.push_back(space.all_points());
  }
  CoverSequence seq = CoverSequence::with_global(space, {singles, tokens, copies});

  // Layer 0: x_{i,j} -> x_{i,j} * (row j of [W_Q | W_K | W_V]).
  Layer project;
  FactorsThroughInclusion proj{{}, &activation("identity")};
  for (std::size_t p = 0; p < n * d; ++p) {
    const std::size_t j = p % d;
    Matrix row(3 * hw, 1);
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t t = 0; t < width; ++t) {
        row(h * width + t, 0) = w.wq[h](j, t);
        row(hw + h * width + t, 0) = w.wk[h](j, t);
        row(2 * hw + h * width + t, 0) = w.wv[h](j, t);
      }
    proj.phi.push_back(linear(std::move(row), Section::identity(1)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> agg;
    for (std::size_t j = 0; j < d; ++j) agg.push_back(i * d + j);
    project.aggregation.push_back(std::move(agg));
  }
  project.kind = std::move(proj);
  project.out_dim = 3 * hw;

  // Layer 1: every copy attends from its own token over all tokens.
  Layer attend;
  Attention att{heads, width, {}};
  std::vector<std::size_t> all_tokens;
  for (std::size_t i = 0; i < n; ++i) all_tokens.push_back(i);
  for (std::size_t i = 0; i < n; ++i) {
    attend.aggregation.push_back(all_tokens);
    att.query_of.push_back(i);
  }
  attend.kind = General{att};
  attend.out_dim = hw;

  // Layer 2: z_i -> (z_i W_Z) placed in block i of R^{Nd}.
  Layer output;
  FactorsThroughInclusion place{{}, &activation("identity")};
  for (std::size_t i = 0; i < n; ++i) {
    Matrix m(n * d, hw);
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t r = 0; r < hw; ++r) m(i * d + c, r) = w.wz(r, c);
    place.phi.push_back(linear(std::move(m), Section::identity(hw)));
  }
  output.aggregation.push_back(all_tokens);
  output.kind = std::move(place);
  output.out_dim = n * d;

  return Network(std::move(seq), {std::move(project), std::move(attend), std::move(output)});
}

inline Network build_attention(std::size_t n, std::size_t d, std::size_t heads, std::size_t width,
                               std::uint64_t seed) {
  return build_attention(n, d, AttentionWeights::random(d, heads, width, seed));
}

// ---------------------------------------------------------------------------
// Small reference networks

/// Four scalar inputs summed pairwise into two outputs, then into one
/// global output through `final_activation`.
inline Network build_sum_pool_demo(const std::string& final_activation = "identity") {
  const MarkedSpace space = MarkedSpace::uniform(4);
  CoverSequence seq = CoverSequence::with_global(space, {{PointSet{0}, PointSet{1}, PointSet{2}, PointSet{3}},
                                                         {PointSet{0, 1}, PointSet{2, 3}}});
  Layer pool{{{0, 1}, {2, 3}},
             FactorsThroughInclusion{std::vector<Section>(4, Section::identity(1)), &activation("identity")},
             1};
  Layer head{{{0, 1}},
             FactorsThroughInclusion{std::vector<Section>(2, Section::identity(1)), &activation(final_activation)},
             1};
  return Network(std::move(seq), {std::move(pool), std::move(head)});
}

}  // namespace sheafnet
