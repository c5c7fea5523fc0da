#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "fadkit/autodiff.hpp"
#include "fadkit/common.hpp"
#include "fadkit/image.hpp"

namespace fadkit {

using autodiff::Graph;
using autodiff::Mat;

struct EncoderConfig {
  int image_size = 64;
  int patch_size = 8;
  int vision_dim = 64;
  int vision_layers = 6;
  int vision_heads = 4;
  int text_dim = 64;
  int text_layers = 4;
  int text_heads = 4;
  int context_length = 16;
  int vocab_size = 32;
  int feature_dim = 64;                  // C: shared text/vision-adapter dim
  std::vector<int> tap_layers = {2, 4, 6};

  int grid() const { return image_size / patch_size; }
  int tokens() const { return grid() * grid(); }

  void validate() const {
    if (image_size < kMinImageSide) throw ConfigError("image_size must be >= 16");
    if (patch_size < 1 || image_size % patch_size != 0)
      throw ConfigError("patch_size must divide image_size");
    if (vision_layers < 1 || text_layers < 1) throw ConfigError("need at least one layer");
    if (vision_dim % vision_heads != 0) throw ConfigError("vision_heads must divide vision_dim");
    if (text_dim % text_heads != 0) throw ConfigError("text_heads must divide text_dim");
    if (context_length < 2) throw ConfigError("context_length must be >= 2");
    if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
    if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
    if (tap_layers.empty()) throw ConfigError("need at least one tap layer");
    int prev = 0;
    for (int t : tap_layers) {
      if (t <= prev || t > vision_layers)
        throw ConfigError("tap_layers must be strictly increasing and <= vision_layers");
      prev = t;
    }
  }
};

struct BlockWeights {
  Mat ln1_g, ln1_b;
  Mat wq, bq, wk, bk, wv, bv, wo, bo;
  Mat ln2_g, ln2_b;
  Mat w1, b1, w2, b2;
};

struct VisionWeights {
  Mat patch_w;  // (3 P^2) x D
  Mat patch_b;  // 1 x D
  Mat cls;      // 1 x D
  Mat pos;      // (tokens + 1) x D
  std::vector<BlockWeights> blocks;
};

struct TextWeights {
  Mat token_embed;  // vocab x Dt; row 0 is the end-of-sequence token
  Mat pos;          // context x Dt
  std::vector<BlockWeights> blocks;
  Mat ln_f_g, ln_f_b;
  Mat proj;  // Dt x C
};

constexpr int kEosTokenId = 0;

// The frozen pair standing in for a pretrained dual encoder. Weights are a
// deterministic function of (config, seed), are never updated, and stay on
// the float32 grid so digests and checkpoints are exact.
struct DualEncoders {
  EncoderConfig cfg;
  VisionWeights vision;
  TextWeights text;
  std::uint64_t seed = 0;
};

namespace detail {

inline double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline void fill_normal(Mat& m, Rng& rng, double scale) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = snap_f32(rng.normal() * scale);
}

inline BlockWeights init_block(Rng& rng, int dim) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  const int hidden = 4 * dim;
  BlockWeights b;
  b.ln1_g = Mat::Ones(1, dim);
  b.ln1_b = Mat::Zero(1, dim);
  b.wq = Mat(dim, dim);
  b.wk = Mat(dim, dim);
  b.wv = Mat(dim, dim);
  b.wo = Mat(dim, dim);
  fill_normal(b.wq, rng, s);
  fill_normal(b.wk, rng, s);
  fill_normal(b.wv, rng, s);
  fill_normal(b.wo, rng, s);
  b.bq = Mat::Zero(1, dim);
  b.bk = Mat::Zero(1, dim);
  b.bv = Mat::Zero(1, dim);
  b.bo = Mat::Zero(1, dim);
  b.ln2_g = Mat::Ones(1, dim);
  b.ln2_b = Mat::Zero(1, dim);
  b.w1 = Mat(dim, hidden);
  fill_normal(b.w1, rng, s);
  b.b1 = Mat::Zero(1, hidden);
  b.w2 = Mat(hidden, dim);
  fill_normal(b.w2, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
  b.b2 = Mat::Zero(1, dim);
  return b;
}

template <typename Fn>
inline void for_each_block_weight(const BlockWeights& b, Fn&& fn) {
  fn(b.ln1_g); fn(b.ln1_b);
  fn(b.wq); fn(b.bq); fn(b.wk); fn(b.bk); fn(b.wv); fn(b.bv); fn(b.wo); fn(b.bo);
  fn(b.ln2_g); fn(b.ln2_b);
  fn(b.w1); fn(b.b1); fn(b.w2); fn(b.b2);
}

template <typename Fn>
inline void for_each_weight(const DualEncoders& e, Fn&& fn) {
  fn(e.vision.patch_w); fn(e.vision.patch_b); fn(e.vision.cls); fn(e.vision.pos);
  for (const auto& b : e.vision.blocks) for_each_block_weight(b, fn);
  fn(e.text.token_embed); fn(e.text.pos);
  for (const auto& b : e.text.blocks) for_each_block_weight(b, fn);
  fn(e.text.ln_f_g); fn(e.text.ln_f_b); fn(e.text.proj);
}

}  // namespace detail

inline DualEncoders init_frozen(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DualEncoders e;
  e.cfg = cfg;
  e.seed = seed;

  Rng rng(derive_seed(seed, "frozen-encoders"));
  const int d = cfg.vision_dim;
  const int patch_in = 3 * cfg.patch_size * cfg.patch_size;
  e.vision.patch_w = Mat(patch_in, d);
  detail::fill_normal(e.vision.patch_w, rng, 1.0 / std::sqrt(static_cast<double>(patch_in)));
  e.vision.patch_b = Mat::Zero(1, d);
  e.vision.cls = Mat(1, d);
  detail::fill_normal(e.vision.cls, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  e.vision.pos = Mat(cfg.tokens() + 1, d);
  detail::fill_normal(e.vision.pos, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  for (int l = 0; l < cfg.vision_layers; ++l)
    e.vision.blocks.push_back(detail::init_block(rng, d));

  const int dt = cfg.text_dim;
  e.text.token_embed = Mat(cfg.vocab_size, dt);
  detail::fill_normal(e.text.token_embed, rng, 1.0 / std::sqrt(static_cast<double>(dt)));
  e.text.pos = Mat(cfg.context_length, dt);
  detail::fill_normal(e.text.pos, rng, 1.0 / std::sqrt(static_cast<double>(dt)));
  for (int l = 0; l < cfg.text_layers; ++l)
    e.text.blocks.push_back(detail::init_block(rng, dt));
  e.text.ln_f_g = Mat::Ones(1, dt);
  e.text.ln_f_b = Mat::Zero(1, dt);
  e.text.proj = Mat(dt, cfg.feature_dim);
  detail::fill_normal(e.text.proj, rng, 1.0 / std::sqrt(static_cast<double>(dt)));
  return e;
}

// FNV-1a over the float32 little-endian bytes of every frozen tensor, in a
// fixed traversal order. Changes to any frozen weight change the digest.
inline std::uint64_t encoder_digest(const DualEncoders& e) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  detail::for_each_weight(e, [&](const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const float f = static_cast<float>(m(r, c));
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        for (int i = 0; i < 4; ++i) {
          h ^= (bits >> (8 * i)) & 0xff;
          h *= 0x100000001b3ULL;
        }
      }
  });
  return h;
}

// ---------------------------------------------------------------------------
// Taped transformer forward
// ---------------------------------------------------------------------------

struct BlockNodes {
  int ln1_g, ln1_b;
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln2_g, ln2_b;
  int w1, b1, w2, b2;
};

namespace detail {

inline BlockNodes stage_block(Graph& g, const BlockWeights& b) {
  BlockNodes n;
  n.ln1_g = g.constant(b.ln1_g);
  n.ln1_b = g.constant(b.ln1_b);
  n.wq = g.constant(b.wq);
  n.bq = g.constant(b.bq);
  n.wk = g.constant(b.wk);
  n.bk = g.constant(b.bk);
  n.wv = g.constant(b.wv);
  n.bv = g.constant(b.bv);
  n.wo = g.constant(b.wo);
  n.bo = g.constant(b.bo);
  n.ln2_g = g.constant(b.ln2_g);
  n.ln2_b = g.constant(b.ln2_b);
  n.w1 = g.constant(b.w1);
  n.b1 = g.constant(b.b1);
  n.w2 = g.constant(b.w2);
  n.b2 = g.constant(b.b2);
  return n;
}

inline int attention(Graph& g, int x, const BlockNodes& w, int heads, bool causal) {
  const int dim = static_cast<int>(g.value(x).cols());
  const int dh = dim / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const int q = g.add_rowvec(g.matmul(x, w.wq), w.bq);
  const int k = g.add_rowvec(g.matmul(x, w.wk), w.bk);
  const int v = g.add_rowvec(g.matmul(x, w.wv), w.bv);
  std::vector<int> heads_out;
  heads_out.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const int qh = g.slice_cols(q, h * dh, dh);
    const int kh = g.slice_cols(k, h * dh, dh);
    const int vh = g.slice_cols(v, h * dh, dh);
    const int scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt_dh);
    const int attn = g.softmax_rows(scores, causal);
    heads_out.push_back(g.matmul(attn, vh));
  }
  const int merged = g.concat_cols(heads_out);
  return g.add_rowvec(g.matmul(merged, w.wo), w.bo);
}

// Pre-norm block: x + attn(LN(x)); x + MLP(LN(x)) with GELU.
inline int transformer_block(Graph& g, int x, const BlockNodes& w, int heads, bool causal) {
  const int h = attention(g, g.layer_norm(x, w.ln1_g, w.ln1_b), w, heads, causal);
  const int x1 = g.add(x, h);
  int m = g.layer_norm(x1, w.ln2_g, w.ln2_b);
  m = g.add_rowvec(g.matmul(m, w.w1), w.b1);
  m = g.gelu(m);
  m = g.add_rowvec(g.matmul(m, w.w2), w.b2);
  return g.add(x1, m);
}

}  // namespace detail

struct TapedVision {
  int patch_w, patch_b, cls, pos;
  std::vector<BlockNodes> blocks;
};

struct TapedText {
  int token_embed, eos, pos;
  std::vector<BlockNodes> blocks;
  int ln_f_g, ln_f_b, proj;
};

inline TapedVision stage_vision(Graph& g, const VisionWeights& v) {
  TapedVision t;
  t.patch_w = g.constant(v.patch_w);
  t.patch_b = g.constant(v.patch_b);
  t.cls = g.constant(v.cls);
  t.pos = g.constant(v.pos);
  for (const auto& b : v.blocks) t.blocks.push_back(detail::stage_block(g, b));
  return t;
}

inline TapedText stage_text(Graph& g, const TextWeights& t) {
  TapedText n;
  n.token_embed = g.constant(t.token_embed);
  n.eos = g.constant(t.token_embed.row(kEosTokenId));
  n.pos = g.constant(t.pos);
  for (const auto& b : t.blocks) n.blocks.push_back(detail::stage_block(g, b));
  n.ln_f_g = g.constant(t.ln_f_g);
  n.ln_f_b = g.constant(t.ln_f_b);
  n.proj = g.constant(t.proj);
  return n;
}

// Flattens the image into per-patch vectors with the single channel
// replicated to three, matching the (3 P^2) x D patch projection.
inline Mat patch_matrix(const Image& x, const EncoderConfig& cfg) {
  const int p = cfg.patch_size;
  const int grid = cfg.grid();
  Mat patches(cfg.tokens(), 3 * p * p);
  for (int gr = 0; gr < grid; ++gr)
    for (int gc = 0; gc < grid; ++gc) {
      const int row = gr * grid + gc;
      for (int pr = 0; pr < p; ++pr)
        for (int pc = 0; pc < p; ++pc) {
          const double v = x.at(gr * p + pr, gc * p + pc);
          const int off = pr * p + pc;
          patches(row, off) = v;
          patches(row, p * p + off) = v;
          patches(row, 2 * p * p + off) = v;
        }
    }
  return patches;
}

// Vision forward; returns the tap-layer patch-token grids (class token
// dropped), each tokens() x vision_dim, in tap order.
inline std::vector<int> encode_image_nodes(Graph& g, const TapedVision& w,
                                           const EncoderConfig& cfg, const Image& x) {
  if (x.height != cfg.image_size || x.width != cfg.image_size)
    throw ShapeError("encode_image: input must match config.image_size");
  const int tokens = cfg.tokens();
  int t = g.add_rowvec(g.matmul(g.constant(patch_matrix(x, cfg)), w.patch_w), w.patch_b);
  t = g.concat_rows({w.cls, t});
  t = g.add(t, w.pos);
  std::vector<int> taps;
  std::size_t next_tap = 0;
  for (int layer = 1; layer <= cfg.vision_layers; ++layer) {
    t = detail::transformer_block(g, t, w.blocks[static_cast<std::size_t>(layer - 1)],
                                  cfg.vision_heads, /*causal=*/false);
    if (next_tap < cfg.tap_layers.size() && cfg.tap_layers[next_tap] == layer) {
      taps.push_back(g.slice_rows(t, 1, tokens));
      ++next_tap;
    }
  }
  return taps;
}

// Text forward over a raw embedding sequence (L x text_dim). An
// end-of-sequence embedding is appended internally; the output feature is
// the projected final-position state (1 x feature_dim). Gradients flow back
// to the input embeddings.
inline int encode_text_node(Graph& g, const TapedText& w, const EncoderConfig& cfg,
                            int embeds) {
  const Eigen::Index len = g.value(embeds).rows();
  if (g.value(embeds).cols() != cfg.text_dim)
    throw ShapeError("encode_text: embedding width must equal text_dim");
  if (len + 1 > cfg.context_length)
    throw Error("encode_text: sequence exceeds context length");
  int x = g.concat_rows({embeds, w.eos});
  x = g.add(x, g.slice_rows(w.pos, 0, static_cast<int>(len) + 1));
  for (int layer = 0; layer < cfg.text_layers; ++layer)
    x = detail::transformer_block(g, x, w.blocks[static_cast<std::size_t>(layer)],
                                  cfg.text_heads, /*causal=*/true);
  x = g.layer_norm(x, w.ln_f_g, w.ln_f_b);
  const int eos_state = g.slice_rows(x, static_cast<int>(len), 1);
  return g.matmul(eos_state, w.proj);
}

// Convenience non-training wrappers.

inline std::vector<Mat> encode_image_multiscale(const DualEncoders& e, const Image& x) {
  Graph g;
  const TapedVision w = stage_vision(g, e.vision);
  std::vector<Mat> out;
  for (int id : encode_image_nodes(g, w, e.cfg, x)) out.push_back(g.value(id));
  return out;
}

inline Mat encode_text(const DualEncoders& e, const Mat& embeds) {
  Graph g;
  const TapedText w = stage_text(g, e.text);
  return g.value(encode_text_node(g, w, e.cfg, g.constant(embeds)));
}

}  // namespace fadkit
