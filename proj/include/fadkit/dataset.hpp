#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fadkit/common.hpp"
#include "fadkit/phantom.hpp"
#include "fadkit/png_io.hpp"
#include "fadkit/synthesis.hpp"

namespace fadkit {

struct AnomalyEntry {
  std::string image;
  std::string mask;
};

struct DatasetManifest {
  std::string family;
  std::uint64_t seed = 0;
  int image_size = 0;
  std::vector<std::string> train;
  std::vector<std::string> test_normal;
  std::vector<AnomalyEntry> test_anomaly;
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["family"] = m.family;
  j["seed"] = m.seed;
  j["image_size"] = m.image_size;
  j["train"] = m.train;
  j["test_normal"] = m.test_normal;
  j["test_anomaly"] = nlohmann::json::array();
  for (const auto& e : m.test_anomaly)
    j["test_anomaly"].push_back({{"image", e.image}, {"mask", e.mask}});
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.family = j.at("family").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.image_size = j.value("image_size", 0);
  m.train = j.at("train").get<std::vector<std::string>>();
  m.test_normal = j.at("test_normal").get<std::vector<std::string>>();
  for (const auto& e : j.at("test_anomaly")) {
    AnomalyEntry entry;
    entry.image = e.at("image").get<std::string>();
    entry.mask = e.at("mask").get<std::string>();
    m.test_anomaly.push_back(entry);
  }
  return m;
}

inline void validate_manifest(const DatasetManifest& m) {
  std::set<std::string> train_paths(m.train.begin(), m.train.end());
  std::set<std::string> test_paths(m.test_normal.begin(), m.test_normal.end());
  for (const auto& e : m.test_anomaly) test_paths.insert(e.image);
  for (const auto& p : test_paths)
    if (train_paths.count(p))
      throw FormatError("manifest: path appears in both train and test: " + p);
  for (const auto& e : m.test_anomaly)
    if (e.mask.empty())
      throw FormatError("manifest: test anomaly without mask: " + e.image);
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest: " + path.string());
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) throw Error("manifest write failed: " + path.string());
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest parse error: " + std::string(e.what()));
  }
  DatasetManifest m = manifest_from_json(j);
  validate_manifest(m);
  return m;
}

namespace detail {

inline std::string numbered(const char* stem, int i, const char* suffix = "") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d%s.png", stem, i, suffix);
  return buf;
}

}  // namespace detail

// Writes a complete phantom dataset: k training normals, a normal/anomaly
// test split with ground-truth masks, and manifest.json (paths relative to
// out_dir). Test anomalies are synthesized with the same parameter ranges as
// training but from a seed stream disjoint from the training episode stream.
inline DatasetManifest build_dataset(const PhantomFamily& family, int k,
                                     int n_test_normal, int n_test_anomaly,
                                     std::uint64_t seed,
                                     const std::filesystem::path& out_dir,
                                     int image_size = 64,
                                     const SynthParams& synth = {}) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (n_test_normal < 0 || n_test_anomaly < 0)
    throw std::invalid_argument("test counts must be nonnegative");

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "train", ec);
  std::filesystem::create_directories(out_dir / "test", ec);
  if (!std::filesystem::is_directory(out_dir / "train") ||
      !std::filesystem::is_directory(out_dir / "test"))
    throw Error("cannot create dataset directories under " + out_dir.string());

  DatasetManifest m;
  m.family = family_name(family.id);
  m.seed = seed;
  m.image_size = image_size;

  for (int i = 0; i < k; ++i) {
    const Image im =
        generate_phantom(family, derive_seed(derive_seed(seed, "train"), i), image_size);
    const std::string rel = "train/" + detail::numbered("normal", i);
    save_image(im, out_dir / rel);
    m.train.push_back(rel);
  }

  for (int i = 0; i < n_test_normal; ++i) {
    const Image im = generate_phantom(
        family, derive_seed(derive_seed(seed, "test_normal"), i), image_size);
    const std::string rel = "test/" + detail::numbered("normal", i);
    save_image(im, out_dir / rel);
    m.test_normal.push_back(rel);
  }

  const std::uint64_t img_stream = derive_seed(seed, "test_anomaly_image");
  const std::uint64_t synth_stream = derive_seed(seed, "test_anomaly_synth");
  for (int i = 0; i < n_test_anomaly; ++i) {
    const Image base = generate_phantom(family, derive_seed(img_stream, i), image_size);
    AnomalyMask mask;
    Image anomalous;
    // a sprawling perlin mask can make cutpaste placement impossible; retry
    // with a fresh draw
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t s = derive_seed(derive_seed(synth_stream, i), attempt);
      Rng rng(s);
      const SynthesisTask task = sample_task(rng);
      if (task == SynthesisTask::source) {
        const MaskKind kind =
            rng.uniform_int(2) == 0 ? MaskKind::ellipse : MaskKind::rectangle;
        mask = parametric_mask(derive_seed(s, "mask"), image_size, kind);
      } else {
        const double area = rng.uniform(synth.mask_area_min, synth.mask_area_max);
        mask = perlin_mask(derive_seed(s, "mask"), image_size, area);
      }
      try {
        anomalous = synthesize(base, mask, task, derive_seed(s, "apply"), synth);
        break;
      } catch (const PlacementError&) {
        if (attempt >= 7) throw;
      }
    }

    AnomalyEntry entry;
    entry.image = "test/" + detail::numbered("anomaly", i);
    entry.mask = "test/" + detail::numbered("anomaly", i, "_mask");
    save_image(anomalous, out_dir / entry.image);
    save_mask(mask, out_dir / entry.mask);
    m.test_anomaly.push_back(entry);
  }

  validate_manifest(m);
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace fadkit
