#pragma once

#include <string>
#include <vector>

#include "fadkit/image.hpp"
#include "fadkit/prompts.hpp"
#include "fadkit/scoring.hpp"

namespace fadkit {

// Frozen encoders plus the trainable head (prompt prefix and per-layer
// adapters), with the provenance needed to checkpoint and re-derive the
// frozen part.
struct Model {
  DualEncoders encoders;
  PromptBank bank;
  AdapterSet adapters;
  double tau = kDefaultTemperature;
  Mat upsample;  // (H W) x tokens, shared by all tap layers

  std::uint64_t model_seed = 0;
  std::string train_family;
  std::uint64_t train_seed = 0;
  long trained_steps = 0;

  const EncoderConfig& cfg() const { return encoders.cfg; }
};

inline Model make_model(const EncoderConfig& cfg, std::uint64_t seed,
                        int prompt_tokens = 8, double tau = kDefaultTemperature) {
  if (tau <= 0.0) throw ConfigError("temperature must be positive");
  Model m;
  m.encoders = init_frozen(cfg, derive_seed(seed, "encoders"));
  m.bank = init_prompt_bank(cfg, seed, prompt_tokens);
  m.adapters = init_adapters(cfg, seed);
  m.tau = tau;
  m.upsample = bilinear_upsample_matrix(cfg.grid(), cfg.grid(), cfg.image_size,
                                        cfg.image_size);
  m.model_seed = seed;
  return m;
}

// Graph-staged model: weights and trainable leaves registered once per graph,
// shared by every image forward in the same step.
struct TapedModel {
  TapedVision vision;
  TapedText text;
  PromptFeatureNodes prompts;
  AdapterNodes adapters;
  int upsample = -1;
};

inline TapedModel stage_model(Graph& g, const Model& m, bool trainable) {
  TapedModel t;
  t.vision = stage_vision(g, m.encoders.vision);
  t.text = stage_text(g, m.encoders.text);
  t.prompts = prompt_features(g, t.text, m.cfg(), m.bank, trainable);
  t.adapters = stage_adapters(g, m.adapters, trainable);
  t.upsample = g.constant(m.upsample);
  return t;
}

// Full scoring pipeline for one image (already at encoder resolution):
// encode, adapt each tap, similarity against (f_n, f_a), aggregate.
// Returned maps are (image_size^2) x 1 columns in row-major pixel order.
inline AggregatedScoreNodes forward_scores(Graph& g, const TapedModel& t,
                                           const Model& m, const Image& x) {
  const auto taps = encode_image_nodes(g, t.vision, m.cfg(), x);
  std::vector<LayerScoreNodes> layers;
  layers.reserve(taps.size());
  for (std::size_t j = 0; j < taps.size(); ++j) {
    const int adapted = adapt_node(g, taps[j], t.adapters.w[j], t.adapters.b[j]);
    layers.push_back(similarity_nodes(g, adapted, t.prompts.f_n, t.prompts.f_a, m.tau));
  }
  return aggregate_nodes(g, layers, t.upsample);
}

struct AnomalyResult {
  Field map;           // S_a at encoder resolution, values in (0,1)
  double score = 0.0;  // max over the map
};

// Inference: no synthesis, the query itself is scored. Queries are resized
// to the encoder input size if needed.
inline AnomalyResult infer(const Model& m, const Image& query) {
  const int side = m.cfg().image_size;
  const Image x = resize_bilinear(query, side, side);
  Graph g;
  const TapedModel t = stage_model(g, m, /*trainable=*/false);
  const AggregatedScoreNodes s = forward_scores(g, t, m, x);
  const Mat& sa = g.value(s.s_a);

  AnomalyResult out;
  out.map = Field(side, side);
  double best = -1.0;
  for (Eigen::Index i = 0; i < sa.rows(); ++i) {
    out.map.data[static_cast<std::size_t>(i)] = sa(i, 0);
    best = std::max(best, sa(i, 0));
  }
  out.score = best;
  return out;
}

}  // namespace fadkit
