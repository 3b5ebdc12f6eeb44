#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "pgp/box.hpp"
#include "pgp/matrix.hpp"
#include "pgp/tape.hpp"

namespace pgp::relational {

/// Regions of one image: M feature rows of width h, their boxes, and
/// (when known) ground-truth labels.
struct RoIBatch {
  num::Matrix features;
  std::vector<Box> boxes;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return features.rows(); }
  /// Throws DimensionError / ContractError on inconsistent sizes or M == 0.
  void validate() const;
};

/// Fully connected pseudo classifier: logits = features * weight + bias.
/// weight is h x N, bias 1 x N; result M x N.
num::Var pseudo_classify(num::Var features, num::Var weight, num::Var bias);

/// Projects an N x N class graph onto the regions of one image:
/// softmax_rows(logits) * class_graph * softmax_rows(logits)^T, M x M.
num::Var condense(num::Var class_graph, num::Var logits);

struct VisualGraphOptions {
  /// Normalize the latent vectors to unit length before the dot products.
  bool cosine = false;
  /// Dot the latent F(z) (default) or the raw features z.
  bool use_latent = true;
};

/// Gram matrix of F(z) = ReLU(z * weight + bias), weight h x h'. Symmetric PSD,
/// nonnegative entries.
num::Var visual_semantic_graph(num::Var features, num::Var weight, num::Var bias,
                               const VisualGraphOptions& opts = {});

enum class Channel { kCondensedCo, kCondensedSize, kVisualSemantic, kIdentity };
std::string_view channel_name(Channel c);

/// Ordered stack of K M x M adjacency channels over one image's regions.
struct HeterogeneousRoIGraph {
  std::vector<num::Var> adjacencies;
  std::vector<Channel> tags;

  std::size_t channels() const noexcept { return adjacencies.size(); }
  std::size_t regions() const { return adjacencies.empty() ? 0 : adjacencies.front().rows(); }
};

/// Stack in the fixed order co, size, visual[, identity].
HeterogeneousRoIGraph assemble(num::Var condensed_co, num::Var condensed_size, num::Var visual,
                               bool include_identity = true);

/// Same ordering rule over any subset of the relational channels; used by the
/// component ablations. At least one channel (possibly only identity) required.
HeterogeneousRoIGraph assemble_subset(std::optional<num::Var> condensed_co, std::optional<num::Var> condensed_size,
                                      std::optional<num::Var> visual, bool include_identity, num::Tape& tape,
                                      std::size_t regions);

}  // namespace pgp::relational
