#include "pgp/model.hpp"

#include <cmath>
#include <sstream>

#include "pgp/error.hpp"
#include "pgp/relational.hpp"
#include "pgp/rng.hpp"

namespace pgp::model {

using num::Matrix;
using num::Tape;
using num::Var;

ModelSpec ModelSpec::from_config(const config::RunConfig& cfg, std::size_t feature_dim, std::size_t classes) {
  ModelSpec s;
  s.feature_dim = feature_dim;
  s.classes = classes;
  s.latent_dim = cfg.model.latent_dim;
  s.channels = cfg.model.channels;
  s.embedding_dim = cfg.model.embedding_dim;
  s.identity_channel = cfg.model.identity_channel;
  s.cosine_visual = cfg.model.cosine_visual;
  s.variant = cfg.model.variant;
  return s;
}

std::size_t ModelSpec::input_channels() const {
  const auto f = flags();
  if (!f.relational) return 0;
  return static_cast<std::size_t>(f.co) + f.size + f.visual + identity_channel;
}

std::string ModelSpec::fingerprint() const {
  std::ostringstream o;
  o << "h=" << feature_dim << " N=" << classes << " latent=" << latent_dim << " C=" << channels
    << " d=" << embedding_dim << " K=" << input_channels() << " identity=" << identity_channel
    << " cosine=" << cosine_visual << " variant=" << config::variant_name(variant);
  return o.str();
}

void Params::visit(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("pseudo_w", pseudo_w);
  fn("pseudo_b", pseudo_b);
  fn("vis_w", vis_w);
  fn("vis_b", vis_b);
  fn("phi1", phi1);
  fn("phi2", phi2);
  for (std::size_t c = 0; c < gcn.size(); ++c) fn("gcn_" + std::to_string(c), gcn[c]);
  fn("cls_w", cls_w);
  fn("cls_b", cls_b);
  fn("box_w", box_w);
  fn("box_b", box_b);
}

void Params::visit(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<Params*>(this)->visit([&](const std::string& n, Matrix& m) { fn(n, m); });
}

std::size_t Params::count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : m.data()) v = rng.uniform(-a, a);
  return m;
}

}  // namespace

Params init_params(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.feature_dim == 0 || spec.classes == 0) throw ConfigError("model: feature_dim and classes must be >= 1");
  Rng rng(seed, 0x696e6974ULL);
  const std::size_t h = spec.feature_dim, n = spec.classes, k = std::max<std::size_t>(spec.input_channels(), 1);
  Params p;
  p.pseudo_w = glorot(h, n, rng);
  p.pseudo_b = Matrix(1, n);
  p.vis_w = glorot(h, spec.latent_dim, rng);
  p.vis_b = Matrix(1, spec.latent_dim);
  p.phi1 = Matrix(spec.channels, k);
  p.phi2 = Matrix(spec.channels, k);
  for (double& v : p.phi1.data()) v = rng.normal(0.0, 0.1);
  for (double& v : p.phi2.data()) v = rng.normal(0.0, 0.1);
  for (std::size_t c = 0; c < spec.channels; ++c) p.gcn.push_back(glorot(spec.fused_dim(), spec.embedding_dim, rng));
  p.cls_w = glorot(spec.fused_dim(), n, rng);
  p.cls_b = Matrix(1, n);
  // Near-zero box head: proposals start where the region proposer put them.
  p.box_w = Matrix(spec.fused_dim(), 4);
  for (double& v : p.box_w.data()) v = rng.normal(0.0, 0.001);
  p.box_b = Matrix(1, 4);
  return p;
}

std::vector<Var> ParamVars::all() const {
  std::vector<Var> v{pseudo_w, pseudo_b, vis_w, vis_b, phi1, phi2};
  v.insert(v.end(), gcn.begin(), gcn.end());
  v.insert(v.end(), {cls_w, cls_b, box_w, box_b});
  return v;
}

ParamVars bind(Tape& tape, const Params& p, bool track) {
  auto mk = [&](const Matrix& m, const char* name) { return track ? tape.leaf(m, name) : tape.constant(m); };
  ParamVars v;
  v.pseudo_w = mk(p.pseudo_w, "pseudo_w");
  v.pseudo_b = mk(p.pseudo_b, "pseudo_b");
  v.vis_w = mk(p.vis_w, "vis_w");
  v.vis_b = mk(p.vis_b, "vis_b");
  v.phi1 = mk(p.phi1, "phi1");
  v.phi2 = mk(p.phi2, "phi2");
  for (const Matrix& g : p.gcn) v.gcn.push_back(mk(g, "gcn"));
  v.cls_w = mk(p.cls_w, "cls_w");
  v.cls_b = mk(p.cls_b, "cls_b");
  v.box_w = mk(p.box_w, "box_w");
  v.box_b = mk(p.box_b, "box_b");
  return v;
}

ForwardOutputs forward(const ModelSpec& spec, const ParamVars& p, const Matrix& features, const GraphInputs& graphs) {
  if (features.cols() != spec.feature_dim) {
    throw DimensionError("forward: features " + num::shape_str(features) + " vs feature_dim " +
                         std::to_string(spec.feature_dim));
  }
  if (features.rows() == 0) throw ContractError("forward: image without regions");
  Tape& t = p.cls_w.tape();
  const std::size_t m = features.rows();
  const Var z = t.constant(features);
  const auto f = spec.flags();
  ForwardOutputs out;

  if (!f.relational) {
    out.embeddings = t.constant(Matrix(m, spec.embedding_dim));
  } else {
    if (graphs.co.rows() != spec.classes || graphs.size.rows() != spec.classes) {
      throw DimensionError("forward: class graphs do not match " + std::to_string(spec.classes) + " classes");
    }
    out.pseudo_logits = relational::pseudo_classify(z, p.pseudo_w, p.pseudo_b);
    std::optional<Var> co, size, visual;
    if (f.co) co = relational::condense(t.constant(graphs.co), out.pseudo_logits);
    if (f.size) size = relational::condense(t.constant(graphs.size), out.pseudo_logits);
    if (f.visual) {
      relational::VisualGraphOptions opts;
      opts.cosine = spec.cosine_visual;
      visual = relational::visual_semantic_graph(z, p.vis_w, p.vis_b, opts);
    }
    const auto graph = relational::assemble_subset(co, size, visual, spec.identity_channel, t, m);
    out.composites = f.gtn ? fusion::gtn_forward(graph, {p.phi1, p.phi2}) : fusion::mean_adjacency(graph, spec.channels);
    const Var x = fusion::node_attributes(out.pseudo_logits, p.cls_w);
    out.embeddings = fusion::gcn_embed(out.composites, x, p.gcn);
  }
  const auto heads = fusion::fuse_and_head(z, out.embeddings, {p.cls_w, p.cls_b, p.box_w, p.box_b});
  out.scores = heads.class_scores;
  out.deltas = heads.box_deltas;
  return out;
}

LossParts objective(const ModelSpec& spec, const ForwardOutputs& out, std::span<const std::size_t> labels,
                    const Matrix& box_targets, const GraphInputs& graphs, const LossWeights& w) {
  Tape& t = out.scores.tape();
  const auto f = spec.flags();
  LossParts parts;
  const Var cls = losses::output_cls_loss(out.scores, labels);
  const std::vector<int> positive(labels.size(), 1);
  const Var box = losses::box_loss(out.deltas, box_targets, positive, w.lambda_box);
  parts.cls = cls.value().item();
  parts.box = box.value().item();
  Var total = num::add(cls, box);
  if (f.relational && f.aux && w.lambda_aux > 0.0) {
    const Var aux = losses::aux_loss(num::softmax_rows(out.pseudo_logits), labels, graphs.neighbors);
    parts.aux = aux.value().item();
    total = num::sub(total, num::scale(aux, w.lambda_aux));
  }
  if (f.relational && w.pseudo_weight > 0.0) {
    const Var pseudo = losses::output_cls_loss(out.pseudo_logits, labels);
    parts.pseudo = pseudo.value().item();
    total = num::add(total, num::scale(pseudo, w.pseudo_weight));
  }
  (void)t;
  parts.total = total;
  return parts;
}

}  // namespace pgp::model
