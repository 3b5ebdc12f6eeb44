#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgp/config.hpp"
#include "pgp/fusion.hpp"
#include "pgp/losses.hpp"
#include "pgp/matrix.hpp"
#include "pgp/tape.hpp"

namespace pgp::model {

/// Architecture: data dimensions plus the active components.
struct ModelSpec {
  std::size_t feature_dim = 0;  // h
  std::size_t classes = 0;      // N
  std::size_t latent_dim = 64;  // h'
  std::size_t channels = 10;    // C
  std::size_t embedding_dim = 64;
  bool identity_channel = true;
  bool cosine_visual = false;
  config::Variant variant = config::Variant::kFull;

  static ModelSpec from_config(const config::RunConfig& cfg, std::size_t feature_dim, std::size_t classes);
  config::VariantFlags flags() const { return config::flags_of(variant); }
  /// Number of stacked adjacency channels K.
  std::size_t input_channels() const;
  /// Width of the fused vector fed to the heads: h + d.
  std::size_t fused_dim() const { return feature_dim + embedding_dim; }
  /// One-line canonical description; stored in checkpoints.
  std::string fingerprint() const;
};

struct Params {
  num::Matrix pseudo_w, pseudo_b;  // h x N, 1 x N
  num::Matrix vis_w, vis_b;        // h x h', 1 x h'
  num::Matrix phi1, phi2;          // C x K
  std::vector<num::Matrix> gcn;    // C of (h + d) x d
  num::Matrix cls_w, cls_b;        // (h + d) x N, 1 x N
  num::Matrix box_w, box_b;        // (h + d) x 4, 1 x 4

  /// Visits every parameter in a fixed order with a stable name.
  void visit(const std::function<void(const std::string&, num::Matrix&)>& fn);
  void visit(const std::function<void(const std::string&, const num::Matrix&)>& fn) const;
  std::size_t count() const;
};

/// Seeded initialization: Glorot-uniform weights, N(0, 0.001) box weights,
/// N(0, 0.1) channel selectors, zero biases.
Params init_params(const ModelSpec& spec, std::uint64_t seed);

/// Class-level priors consumed by the relational head.
struct GraphInputs {
  num::Matrix co;     // N x N co-occurrence weights
  num::Matrix size;   // N x N size ratios (1 where unknown)
  losses::NeighborSets neighbors;
};

/// Parameters as tape nodes. Leaves when tracked, constants otherwise.
struct ParamVars {
  num::Var pseudo_w, pseudo_b, vis_w, vis_b, phi1, phi2;
  std::vector<num::Var> gcn;
  num::Var cls_w, cls_b, box_w, box_b;

  /// Same order as Params::visit.
  std::vector<num::Var> all() const;
};
ParamVars bind(num::Tape& tape, const Params& p, bool track);

struct ForwardOutputs {
  num::Var pseudo_logits;  // M x N (unset for the visual-only variant)
  num::Var scores;         // M x N
  num::Var deltas;         // M x 4
  num::Var embeddings;     // M x d
  std::vector<num::Var> composites;
};

ForwardOutputs forward(const ModelSpec& spec, const ParamVars& p, const num::Matrix& features,
                       const GraphInputs& graphs);

struct LossWeights {
  double lambda_box = 1.0;
  double lambda_aux = 0.1;
  double pseudo_weight = 1.0;
};

struct LossParts {
  num::Var total;
  double cls = 0, box = 0, aux = 0, pseudo = 0;
};

/// cls CE + box smooth-L1 + lambda_aux * (-aux) + pseudo_weight * pseudo CE.
/// Terms of disabled components are omitted (not multiplied by zero).
LossParts objective(const ModelSpec& spec, const ForwardOutputs& out, std::span<const std::size_t> labels,
                    const num::Matrix& box_targets, const GraphInputs& graphs, const LossWeights& w);

}  // namespace pgp::model
