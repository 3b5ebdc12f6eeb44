#include "pgp/fusion.hpp"

#include "pgp/error.hpp"

namespace pgp::fusion {

using num::Matrix;
using num::Var;

Var node_attributes(Var logits, Var classifier_weight) {
  if (logits.cols() != classifier_weight.cols()) {
    throw DimensionError("node_attributes: logits " + num::shape_str(logits.value()) + " vs classifier " +
                         num::shape_str(classifier_weight.value()));
  }
  return num::matmul(num::softmax_rows(logits), num::transpose(classifier_weight));
}

namespace {

Var mix(const std::vector<Var>& adj, Var alpha, std::size_t c) {
  Var acc = num::scale_by(num::element(alpha, c, 0), adj[0]);
  for (std::size_t k = 1; k < adj.size(); ++k) {
    acc = num::add(acc, num::scale_by(num::element(alpha, c, k), adj[k]));
  }
  return acc;
}

}  // namespace

std::vector<Var> gtn_forward(const relational::HeterogeneousRoIGraph& graph, const GtnSelection& sel) {
  const std::size_t k = graph.channels();
  if (k == 0) throw ContractError("gtn_forward: empty graph");
  if (sel.phi1.cols() != k || sel.phi2.cols() != k || sel.phi1.rows() != sel.phi2.rows()) {
    throw DimensionError("gtn_forward: selection " + num::shape_str(sel.phi1.value()) + " / " +
                         num::shape_str(sel.phi2.value()) + " for " + std::to_string(k) + " channels");
  }
  const Var a1 = num::softmax_rows(sel.phi1);
  const Var a2 = num::softmax_rows(sel.phi2);
  std::vector<Var> out;
  out.reserve(sel.phi1.rows());
  for (std::size_t c = 0; c < sel.phi1.rows(); ++c) {
    out.push_back(num::matmul(mix(graph.adjacencies, a1, c), mix(graph.adjacencies, a2, c)));
  }
  return out;
}

std::vector<Var> mean_adjacency(const relational::HeterogeneousRoIGraph& graph, std::size_t channels) {
  if (graph.channels() == 0) throw ContractError("mean_adjacency: empty graph");
  Var acc = graph.adjacencies[0];
  for (std::size_t k = 1; k < graph.channels(); ++k) acc = num::add(acc, graph.adjacencies[k]);
  const Var mean = num::scale(acc, 1.0 / static_cast<double>(graph.channels()));
  return std::vector<Var>(channels, mean);
}

Var normalize_with_self_loops(Var adjacency) {
  const std::size_t m = adjacency.rows();
  if (adjacency.cols() != m) throw DimensionError("normalize_with_self_loops: non-square " + num::shape_str(adjacency.value()));
  const Var with_loops = num::add(adjacency, adjacency.tape().constant(Matrix::identity(m)));
  return num::div_rows(with_loops, num::row_sums(with_loops));
}

Var gcn_embed(std::span<const Var> composites, Var attributes, std::span<const Var> weights) {
  if (composites.empty() || composites.size() != weights.size()) {
    throw DimensionError("gcn_embed: " + std::to_string(composites.size()) + " composites vs " +
                         std::to_string(weights.size()) + " weights");
  }
  Var acc;
  for (std::size_t c = 0; c < composites.size(); ++c) {
    if (composites[c].rows() != attributes.rows()) {
      throw DimensionError("gcn_embed: composite " + num::shape_str(composites[c].value()) + " vs attributes " +
                           num::shape_str(attributes.value()));
    }
    if (weights[c].rows() != attributes.cols()) {
      throw DimensionError("gcn_embed: weight " + num::shape_str(weights[c].value()) + " vs attributes " +
                           num::shape_str(attributes.value()));
    }
    const Var h = num::relu(num::matmul(normalize_with_self_loops(composites[c]), num::matmul(attributes, weights[c])));
    acc = c == 0 ? h : num::add(acc, h);
  }
  return num::scale(acc, 1.0 / static_cast<double>(composites.size()));
}

HeadOutputs fuse_and_head(Var visual, Var embeddings, const HeadParams& head) {
  if (visual.rows() != embeddings.rows()) {
    throw DimensionError("fuse_and_head: visual " + num::shape_str(visual.value()) + " vs embeddings " +
                         num::shape_str(embeddings.value()));
  }
  const Var fused = num::concat_cols(visual, embeddings);
  if (head.cls_weight.rows() != fused.cols() || head.box_weight.rows() != fused.cols()) {
    throw DimensionError("fuse_and_head: head input width mismatch, fused " + num::shape_str(fused.value()));
  }
  return HeadOutputs{fused, num::add_row(num::matmul(fused, head.cls_weight), head.cls_bias),
                     num::add_row(num::matmul(fused, head.box_weight), head.box_bias)};
}

}  // namespace pgp::fusion
