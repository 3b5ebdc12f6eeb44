#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pgp/world.hpp"

namespace pgp::config {

/// Which relational components are active.
enum class Variant { kFull, kBaseline, kNoSize, kNoVisual, kNoGtn, kNoAux, kCoOnly };

std::string_view variant_name(Variant v);
/// Throws ConfigError for unknown names.
Variant parse_variant(std::string_view name);

struct VariantFlags {
  bool relational = true;  // false: visual-only head, embeddings are zero
  bool co = true;
  bool size = true;
  bool visual = true;
  bool gtn = true;
  bool aux = true;
};
VariantFlags flags_of(Variant v);

struct DataConfig {
  std::size_t prescriptions = 2000;
  std::size_t train_scenes = 1000;
  std::size_t test_scenes = 200;
};

struct ModelConfig {
  std::size_t latent_dim = 64;     // h' of the visual semantic graph
  std::size_t channels = 10;       // GTN output channels C
  std::size_t layers = 2;          // meta-path length; only 2 is supported
  std::size_t embedding_dim = 64;  // GCN output width
  bool identity_channel = true;
  bool cosine_visual = false;
  Variant variant = Variant::kFull;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double lambda_box = 1.0;
  double lambda_aux = 0.1;
  std::size_t k = 2;
  double pseudo_weight = 1.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

enum class AblationMode { kEdgeRemove, kEdgeAdd, kNodeRemove };
std::string_view ablation_name(AblationMode m);
AblationMode parse_ablation(std::string_view name);

struct AblationConfig {
  AblationMode mode = AblationMode::kEdgeRemove;
  double fraction = 0.25;  // [0, 1); 0 leaves the graph untouched
  std::uint64_t seed = 0;
};

struct EvalConfig {
  std::size_t bins = 10;
};

/// Every path is resolved against `workdir`, which is itself resolved against
/// the directory holding the config file.
struct PathsConfig {
  std::filesystem::path workdir = ".";
  std::filesystem::path world = "world.json";
  std::filesystem::path corpus = "prescriptions.jsonl";
  std::filesystem::path catalog;  // optional; numbered classes when empty
  std::filesystem::path train_annotations = "train_annotations.jsonl";
  std::filesystem::path train_features = "train_features.jsonl";
  std::filesystem::path test_annotations = "test_annotations.jsonl";
  std::filesystem::path test_features = "test_features.jsonl";
  std::filesystem::path co_graph = "co_graph.json";
  std::filesystem::path size_graph = "size_graph.json";
  std::filesystem::path checkpoint = "model.ckpt";
  std::filesystem::path loss_csv = "loss.csv";
  std::filesystem::path report_dir = "report";
  std::filesystem::path ablation_dir = "ablation";
};

struct RunConfig {
  world::WorldSpec world;
  DataConfig data;
  ModelConfig model;
  TrainConfig training;
  AblationConfig ablation;
  EvalConfig eval;
  PathsConfig paths;

  /// Range and consistency checks; ConfigError on failure.
  void validate() const;
  /// Canonical JSON (every field, fixed key order).
  std::string to_json() const;
};

/// Parses JSON text. Unknown keys anywhere are rejected. `overrides` are
/// "dotted.key=value" strings applied before parsing; value is read as JSON
/// and falls back to a plain string. Relative paths resolve against `base_dir`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                       const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace pgp::config
