#include "pgp/relational.hpp"

#include "pgp/error.hpp"

namespace pgp::relational {

using num::Matrix;
using num::Var;

void RoIBatch::validate() const {
  if (features.rows() == 0) throw ContractError("RoIBatch needs at least one region");
  if (boxes.size() != features.rows()) {
    throw DimensionError("RoIBatch: " + std::to_string(boxes.size()) + " boxes for " +
                         std::to_string(features.rows()) + " feature rows");
  }
  if (!labels.empty() && labels.size() != features.rows()) {
    throw DimensionError("RoIBatch: label count does not match regions");
  }
}

Var pseudo_classify(Var features, Var weight, Var bias) {
  if (features.cols() != weight.rows()) {
    throw DimensionError("pseudo_classify: feature width " + std::to_string(features.cols()) +
                         " vs weight " + num::shape_str(weight.value()));
  }
  return num::add_row(num::matmul(features, weight), bias);
}

Var condense(Var class_graph, Var logits) {
  const std::size_t n = logits.cols();
  if (class_graph.rows() != n || class_graph.cols() != n) {
    throw DimensionError("condense: class graph " + num::shape_str(class_graph.value()) + " vs " +
                         std::to_string(n) + " classes");
  }
  const Var soft = num::softmax_rows(logits);
  return num::matmul(num::matmul(soft, class_graph), num::transpose(soft));
}

Var visual_semantic_graph(Var features, Var weight, Var bias, const VisualGraphOptions& opts) {
  Var z = features;
  if (opts.use_latent) {
    if (features.cols() != weight.rows()) {
      throw DimensionError("visual_semantic_graph: feature width " + std::to_string(features.cols()) +
                           " vs weight " + num::shape_str(weight.value()));
    }
    z = num::relu(num::add_row(num::matmul(features, weight), bias));
  }
  if (opts.cosine) {
    num::Tape& t = features.tape();
    const Var norms = num::sqrt(num::add(num::row_sums(num::mul(z, z)), t.constant(Matrix(z.rows(), 1, 1e-12))));
    z = num::div_rows(z, norms);
  }
  // Gram of ReLU outputs is already nonnegative; the clamp only matters for
  // the raw-feature variant.
  return num::relu(num::matmul(z, num::transpose(z)));
}

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::kCondensedCo: return "condensed_co";
    case Channel::kCondensedSize: return "condensed_size";
    case Channel::kVisualSemantic: return "visual_semantic";
    case Channel::kIdentity: return "identity";
  }
  return "?";
}

namespace {
void require_square(Var a, std::size_t m, const char* what) {
  if (a.rows() != m || a.cols() != m) {
    throw DimensionError(std::string("assemble: ") + what + " is " + num::shape_str(a.value()) + ", expected " +
                         std::to_string(m) + "x" + std::to_string(m));
  }
}
}  // namespace

HeterogeneousRoIGraph assemble(Var condensed_co, Var condensed_size, Var visual, bool include_identity) {
  return assemble_subset(condensed_co, condensed_size, visual, include_identity, condensed_co.tape(),
                         condensed_co.rows());
}

HeterogeneousRoIGraph assemble_subset(std::optional<Var> condensed_co, std::optional<Var> condensed_size,
                                      std::optional<Var> visual, bool include_identity, num::Tape& tape,
                                      std::size_t regions) {
  HeterogeneousRoIGraph g;
  auto push = [&](const std::optional<Var>& v, Channel tag, const char* what) {
    if (!v) return;
    require_square(*v, regions, what);
    g.adjacencies.push_back(*v);
    g.tags.push_back(tag);
  };
  push(condensed_co, Channel::kCondensedCo, "condensed_co");
  push(condensed_size, Channel::kCondensedSize, "condensed_size");
  push(visual, Channel::kVisualSemantic, "visual_semantic");
  if (include_identity) {
    g.adjacencies.push_back(tape.constant(Matrix::identity(regions)));
    g.tags.push_back(Channel::kIdentity);
  }
  if (g.adjacencies.empty()) throw ContractError("assemble: no adjacency channels selected");
  return g;
}

}  // namespace pgp::relational
