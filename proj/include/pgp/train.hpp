#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pgp/config.hpp"
#include "pgp/model.hpp"
#include "pgp/world.hpp"

namespace pgp::train {

/// One image prepared for the model: features, labels, and box regression
/// targets from each proposal to its ground-truth box.
struct Example {
  std::string image;
  num::Matrix features;
  std::vector<std::size_t> labels;
  num::Matrix box_targets;  // M x 4
};
std::vector<Example> prepare(const std::vector<world::Scene>& scenes);

/// Builds the class priors for the model; neighbor-set truncation warnings go to `warnings`.
model::GraphInputs make_graph_inputs(num::Matrix co, num::Matrix size, std::size_t k,
                                     std::vector<std::string>* warnings = nullptr);

struct LossRow {
  std::size_t step = 0;
  double total = 0, cls = 0, box = 0, aux = 0, pseudo = 0;
};
/// "step,total,cls,box,aux,pseudo" then one row per step, shortest round-trip decimals.
std::string loss_csv(const std::vector<LossRow>& curve);

/// Decoupled weight decay Adam over every parameter.
class AdamW {
 public:
  AdamW(const config::TrainConfig& cfg, const model::Params& shape);
  void step(model::Params& params, const std::vector<num::Matrix>& grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, b1_, b2_, eps_, wd_;
  std::size_t t_ = 0;
  std::vector<num::Matrix> m_, v_;
};

/// Loss and per-parameter gradients of one image (Params::visit order).
struct ImageGradient {
  model::LossParts parts;
  double total = 0;
  std::vector<num::Matrix> grads;
};
ImageGradient image_gradient(const model::ModelSpec& spec, const model::Params& params, const Example& ex,
                             const model::GraphInputs& graphs, const model::LossWeights& w);

struct TrainResult {
  model::Params params;
  std::vector<LossRow> curve;
};

/// Minibatch AdamW. Batches come from a seeded per-epoch shuffle; batch
/// members may run on `workers` threads but gradients are summed in batch
/// order, so results do not depend on the worker count. A non-finite loss
/// aborts with NumericError after writing a JSON dump of the batch to
/// `nan_dump` (when non-empty).
TrainResult fit(const model::ModelSpec& spec, const model::GraphInputs& graphs, const std::vector<Example>& data,
                const config::TrainConfig& cfg, const std::filesystem::path& nan_dump = {},
                std::ostream* progress = nullptr);

}  // namespace pgp::train
