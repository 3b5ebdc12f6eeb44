#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pgp/relational.hpp"
#include "pgp/tape.hpp"

namespace pgp::fusion {

/// Node attribute of region k: sum_i softmax(logits_k)[i] * omega_i, where
/// omega_i is column i of the H x N classifier weight. Result M x H.
num::Var node_attributes(num::Var logits, num::Var classifier_weight);

/// Two-stage soft channel selection with C output channels.
/// phi1 and phi2 are C x K; the selection weights are their row softmaxes.
struct GtnSelection {
  num::Var phi1;
  num::Var phi2;
};

/// Per channel c: Q1 = sum_k a1[c,k] A_k, Q2 = sum_k a2[c,k] A_k, composite = Q1 * Q2.
/// Returns C composite M x M adjacencies.
std::vector<num::Var> gtn_forward(const relational::HeterogeneousRoIGraph& graph, const GtnSelection& sel);

/// Composite used when the transformer stage is ablated: every channel sees
/// the uniform mean of the K input adjacencies.
std::vector<num::Var> mean_adjacency(const relational::HeterogeneousRoIGraph& graph, std::size_t channels);

/// Row-normalized (A + I): D^-1 (A + I) with D the row sums.
num::Var normalize_with_self_loops(num::Var adjacency);

/// mean_c ReLU(D^-1 (A_c + I) * X * W_c). X is M x H, each W_c is H x d.
num::Var gcn_embed(std::span<const num::Var> composites, num::Var attributes, std::span<const num::Var> weights);

struct HeadParams {
  num::Var cls_weight;  // (h + d) x N; its columns double as the node-attribute classifier weights
  num::Var cls_bias;    // 1 x N
  num::Var box_weight;  // (h + d) x 4
  num::Var box_bias;    // 1 x 4
};

struct HeadOutputs {
  num::Var fused;        // M x (h + d)
  num::Var class_scores; // M x N
  num::Var box_deltas;   // M x 4
};

/// Concatenates visual features with node embeddings and applies the affine heads.
HeadOutputs fuse_and_head(num::Var visual, num::Var embeddings, const HeadParams& head);

}  // namespace pgp::fusion
