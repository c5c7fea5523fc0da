#pragma once

#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fadkit/encoders.hpp"

namespace fadkit {

// Class phrases for the two prompt sets. Multi-word phrases tokenize to
// multi-embedding sequences.
inline const std::vector<std::string>& normal_class_tokens() {
  static const std::vector<std::string> v = {
      "normal",       "healthy",        "negative",
      "unremarkable", "clear",          "asymptomatic",
      "normal findings", "no findings", "in good health",
      "no evidence of disease"};
  return v;
}

inline const std::vector<std::string>& anomaly_class_tokens() {
  static const std::vector<std::string> v = {
      "abnormal",    "disease",            "lesion",
      "positive",    "symptomatic",        "pathological",
      "impaired",    "evidence of disease", "abnormal finding",
      "pathological condition", "pathological abnormality"};
  return v;
}

// Fixed word-level vocabulary: id 0 is <eos>, the rest covers every word in
// the class phrases plus basic punctuation.
class Vocabulary {
 public:
  Vocabulary() {
    add("<eos>");
    for (const auto& phrase : normal_class_tokens()) add_words(phrase);
    for (const auto& phrase : anomaly_class_tokens()) add_words(phrase);
    add(".");
    add(",");
  }

  int size() const { return static_cast<int>(words_.size()); }

  int id(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) throw Error("word not in vocabulary: " + word);
    return it->second;
  }

  std::vector<int> tokenize(const std::string& phrase) const {
    std::vector<int> ids;
    std::istringstream ss(phrase);
    std::string word;
    while (ss >> word) ids.push_back(id(word));
    if (ids.empty()) throw std::invalid_argument("empty phrase");
    return ids;
  }

  const std::string& word(int token_id) const {
    return words_[static_cast<std::size_t>(token_id)];
  }

 private:
  void add(const std::string& w) {
    if (index_.count(w)) return;
    index_[w] = static_cast<int>(words_.size());
    words_.push_back(w);
  }
  void add_words(const std::string& phrase) {
    std::istringstream ss(phrase);
    std::string word;
    while (ss >> word) add(word);
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

inline const Vocabulary& vocabulary() {
  static const Vocabulary v;
  return v;
}

// Learnable prompt prefix [V_1 ... V_M] shared by every class sequence, plus
// the frozen class-token id lists. The prefix is the only trainable tensor
// here; class-word embeddings stay frozen in the text encoder.
struct PromptBank {
  Mat prefix;  // M x text_dim, trainable
  std::vector<std::vector<int>> normal_ids;
  std::vector<std::vector<int>> anomaly_ids;

  int prompt_tokens() const { return static_cast<int>(prefix.rows()); }
};

inline PromptBank init_prompt_bank(const EncoderConfig& cfg, std::uint64_t seed,
                                   int prompt_tokens = 8) {
  if (prompt_tokens < 1) throw ConfigError("prompt_tokens must be >= 1");
  const Vocabulary& vocab = vocabulary();
  if (cfg.vocab_size < vocab.size())
    throw ConfigError("config vocab_size smaller than the class-token vocabulary");

  PromptBank bank;
  bank.prefix = Mat(prompt_tokens, cfg.text_dim);
  Rng rng(derive_seed(seed, "prompt-prefix"));
  detail::fill_normal(bank.prefix, rng, 0.02);

  for (const auto& phrase : normal_class_tokens())
    bank.normal_ids.push_back(vocab.tokenize(phrase));
  for (const auto& phrase : anomaly_class_tokens())
    bank.anomaly_ids.push_back(vocab.tokenize(phrase));

  for (const auto& ids : {bank.normal_ids, bank.anomaly_ids})
    for (const auto& seq : ids)
      if (prompt_tokens + static_cast<int>(seq.size()) + 1 > cfg.context_length)
        throw Error("class phrase exceeds context length after prompt prefix");
  return bank;
}

// Node pair (f_n, f_a): mean text features of the normal and anomaly prompt
// sets, recomputed from the current prefix so gradients reach it.
struct PromptFeatureNodes {
  int prefix;  // trainable leaf the caller reads gradients from
  int f_n;
  int f_a;
};

inline PromptFeatureNodes prompt_features(Graph& g, const TapedText& tw,
                                          const EncoderConfig& cfg,
                                          const PromptBank& bank,
                                          bool trainable = true) {
  PromptFeatureNodes out;
  out.prefix = trainable ? g.input(bank.prefix) : g.constant(bank.prefix);

  auto encode_set = [&](const std::vector<std::vector<int>>& id_lists) {
    std::vector<int> feats;
    for (const auto& ids : id_lists) {
      Mat cls_embeds(static_cast<Eigen::Index>(ids.size()), cfg.text_dim);
      for (std::size_t i = 0; i < ids.size(); ++i)
        cls_embeds.row(static_cast<Eigen::Index>(i)) =
            g.value(tw.token_embed).row(ids[i]);
      const int seq = g.concat_rows({out.prefix, g.constant(cls_embeds)});
      feats.push_back(encode_text_node(g, tw, cfg, seq));
    }
    return g.mean_rows(g.concat_rows(feats));
  };

  out.f_n = encode_set(bank.normal_ids);
  out.f_a = encode_set(bank.anomaly_ids);
  return out;
}

// Plain evaluation of (f_n, f_a) for inspection and tests.
inline std::pair<Mat, Mat> mean_text_features(const DualEncoders& e, const PromptBank& bank) {
  Graph g;
  const TapedText tw = stage_text(g, e.text);
  const PromptFeatureNodes nodes = prompt_features(g, tw, e.cfg, bank, /*trainable=*/false);
  return {g.value(nodes.f_n), g.value(nodes.f_a)};
}

}  // namespace fadkit
