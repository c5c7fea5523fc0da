#pragma once

#include <utility>
#include <vector>

#include "fadkit/encoders.hpp"

namespace fadkit {

constexpr double kDefaultTemperature = 0.07;

// One trainable affine map per tap layer, projecting frozen vision features
// into the text-feature space.
struct AdapterSet {
  std::vector<Mat> weights;  // C_j x C
  std::vector<Mat> biases;   // 1 x C
};

inline AdapterSet init_adapters(const EncoderConfig& cfg, std::uint64_t seed) {
  AdapterSet a;
  Rng rng(derive_seed(seed, "adapters"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.vision_dim));
  for (std::size_t j = 0; j < cfg.tap_layers.size(); ++j) {
    Mat w(cfg.vision_dim, cfg.feature_dim);
    detail::fill_normal(w, rng, scale);
    a.weights.push_back(std::move(w));
    a.biases.push_back(Mat::Zero(1, cfg.feature_dim));
  }
  return a;
}

struct AdapterNodes {
  std::vector<int> w;
  std::vector<int> b;
};

inline AdapterNodes stage_adapters(Graph& g, const AdapterSet& a, bool trainable) {
  AdapterNodes n;
  for (std::size_t j = 0; j < a.weights.size(); ++j) {
    n.w.push_back(trainable ? g.input(a.weights[j]) : g.constant(a.weights[j]));
    n.b.push_back(trainable ? g.input(a.biases[j]) : g.constant(a.biases[j]));
  }
  return n;
}

// Position-wise affine map over an (H_j W_j) x C_j feature grid.
inline int adapt_node(Graph& g, int features, int w, int b) {
  return g.add_rowvec(g.matmul(features, w), b);
}

struct LayerScoreNodes {
  int s_n;
  int s_a;
};

// Two-way softmax over temperature-scaled cosine similarities:
//   S_a = sigmoid((<g,f_a> - <g,f_n>) / tau),  S_n = 1 - S_a.
inline LayerScoreNodes similarity_nodes(Graph& g, int adapted, int f_n, int f_a,
                                        double tau) {
  if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
  const int cn = g.cosine_rows(adapted, f_n);
  const int ca = g.cosine_rows(adapted, f_a);
  LayerScoreNodes out;
  out.s_a = g.sigmoid(g.scale(g.sub(ca, cn), 1.0 / tau));
  out.s_n = g.one_minus(out.s_a);
  return out;
}

// Pixel-center-aligned bilinear interpolation as an (out_h out_w) x
// (in_h in_w) matrix; rows sum to one, so constants are preserved and the
// same-size case is the identity.
inline Mat bilinear_upsample_matrix(int in_h, int in_w, int out_h, int out_w) {
  Mat u = Mat::Zero(static_cast<Eigen::Index>(out_h) * out_w,
                    static_cast<Eigen::Index>(in_h) * in_w);
  const double sr = static_cast<double>(in_h) / out_h;
  const double sc = static_cast<double>(in_w) / out_w;
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) {
      double fr = (r + 0.5) * sr - 0.5;
      double fc = (c + 0.5) * sc - 0.5;
      fr = std::min(std::max(fr, 0.0), static_cast<double>(in_h - 1));
      fc = std::min(std::max(fc, 0.0), static_cast<double>(in_w - 1));
      const int r0 = static_cast<int>(std::floor(fr));
      const int c0 = static_cast<int>(std::floor(fc));
      const int r1 = std::min(r0 + 1, in_h - 1);
      const int c1 = std::min(c0 + 1, in_w - 1);
      const double wr = fr - r0;
      const double wc = fc - c0;
      const Eigen::Index row = static_cast<Eigen::Index>(r) * out_w + c;
      u(row, static_cast<Eigen::Index>(r0) * in_w + c0) += (1.0 - wr) * (1.0 - wc);
      u(row, static_cast<Eigen::Index>(r0) * in_w + c1) += (1.0 - wr) * wc;
      u(row, static_cast<Eigen::Index>(r1) * in_w + c0) += wr * (1.0 - wc);
      u(row, static_cast<Eigen::Index>(r1) * in_w + c1) += wr * wc;
    }
  return u;
}

struct AggregatedScoreNodes {
  int s_n;
  int s_a;
};

// Upsamples each per-layer map to the image resolution and averages.
// `upsample` is a graph constant holding the interpolation matrix shared by
// all tap layers (the toy ViT grid is single-resolution).
inline AggregatedScoreNodes aggregate_nodes(Graph& g,
                                            const std::vector<LayerScoreNodes>& layers,
                                            int upsample) {
  if (layers.empty()) throw std::invalid_argument("aggregate: need at least one layer");
  int sn = -1, sa = -1;
  for (const auto& l : layers) {
    const int un = g.matmul(upsample, l.s_n);
    const int ua = g.matmul(upsample, l.s_a);
    sn = sn < 0 ? un : g.add(sn, un);
    sa = sa < 0 ? ua : g.add(sa, ua);
  }
  const double inv = 1.0 / static_cast<double>(layers.size());
  return {g.scale(sn, inv), g.scale(sa, inv)};
}

// ---- plain (non-training) helpers for tests and tools -------------------

inline Mat adapt(const Mat& features, const Mat& w, const Mat& b) {
  Graph g;
  return g.value(adapt_node(g, g.constant(features), g.constant(w), g.constant(b)));
}

inline std::pair<Mat, Mat> similarity_maps(const Mat& adapted, const Mat& f_n,
                                           const Mat& f_a,
                                           double tau = kDefaultTemperature) {
  Graph g;
  const LayerScoreNodes s = similarity_nodes(g, g.constant(adapted), g.constant(f_n),
                                             g.constant(f_a), tau);
  return {g.value(s.s_n), g.value(s.s_a)};
}

}  // namespace fadkit
