#include "pgp/train.hpp"

#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "pgp/dataset.hpp"
#include "pgp/error.hpp"
#include "pgp/prescription.hpp"
#include "pgp/rng.hpp"

namespace pgp::train {

using num::Matrix;

std::vector<Example> prepare(const std::vector<world::Scene>& scenes) {
  std::vector<Example> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) {
    if (s.size() == 0) throw ValidationError("image " + s.image + " has no regions");
    Example e{s.image, s.features, s.labels, Matrix(s.size(), 4)};
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto d = encode_deltas(s.proposals[i], s.boxes[i]);
      for (std::size_t c = 0; c < 4; ++c) e.box_targets(i, c) = d[c];
    }
    out.push_back(std::move(e));
  }
  return out;
}

model::GraphInputs make_graph_inputs(Matrix co, Matrix size, std::size_t k, std::vector<std::string>* warnings) {
  model::GraphInputs g;
  g.neighbors = losses::build_neighbor_sets(co, k, warnings);
  g.co = std::move(co);
  g.size = std::move(size);
  return g;
}

std::string loss_csv(const std::vector<LossRow>& curve) {
  using graphs::format_double;
  std::string out = "step,total,cls,box,aux,pseudo\n";
  for (const auto& r : curve) {
    out += std::to_string(r.step) + "," + format_double(r.total) + "," + format_double(r.cls) + "," +
           format_double(r.box) + "," + format_double(r.aux) + "," + format_double(r.pseudo) + "\n";
  }
  return out;
}

AdamW::AdamW(const config::TrainConfig& cfg, const model::Params& shape)
    : lr_(cfg.learning_rate), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.epsilon), wd_(cfg.weight_decay) {
  shape.visit([&](const std::string&, const Matrix& m) {
    m_.emplace_back(m.rows(), m.cols());
    v_.emplace_back(m.rows(), m.cols());
  });
}

void AdamW::step(model::Params& params, const std::vector<Matrix>& grads) {
  if (grads.size() != m_.size()) throw ContractError("AdamW: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  std::size_t k = 0;
  params.visit([&](const std::string&, Matrix& p) {
    auto pd = p.data();
    const auto g = grads[k].data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      pd[i] -= lr_ * (wd_ * pd[i] + (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
    }
    ++k;
  });
}

ImageGradient image_gradient(const model::ModelSpec& spec, const model::Params& params, const Example& ex,
                             const model::GraphInputs& graphs, const model::LossWeights& w) {
  num::Tape tape;
  const model::ParamVars pv = model::bind(tape, params, true);
  const auto out = model::forward(spec, pv, ex.features, graphs);
  ImageGradient g;
  g.parts = model::objective(spec, out, ex.labels, ex.box_targets, graphs, w);
  g.total = g.parts.total.value().item();
  tape.backward(g.parts.total);
  for (const num::Var& v : pv.all()) {
    const Matrix& gr = v.grad();
    g.grads.push_back(gr.empty() ? Matrix(v.rows(), v.cols()) : gr);
  }
  g.parts.total = {};
  return g;
}

namespace {

struct Failure {
  bool failed = false;
  std::string message;
  std::exception_ptr other;  // non-numeric errors are rethrown as-is
};

void write_dump(const std::filesystem::path& path, std::size_t step, const std::vector<std::size_t>& batch,
                const std::vector<Example>& data, const std::vector<ImageGradient>& results,
                const std::vector<Failure>& failures, const model::Params& params) {
  nlohmann::ordered_json doc;
  doc["step"] = step;
  nlohmann::ordered_json images = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Example& ex = data[batch[b]];
    nlohmann::ordered_json im;
    im["image"] = ex.image;
    im["labels"] = ex.labels;
    im["error"] = failures[b].message;
    const auto& p = results[b].parts;
    // JSON cannot carry NaN; non-finite values are written as strings.
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(std::to_string(v)); };
    im["total"] = num(results[b].total);
    im["cls"] = num(p.cls);
    im["box"] = num(p.box);
    im["aux"] = num(p.aux);
    im["pseudo"] = num(p.pseudo);
    images.push_back(im);
  }
  doc["batch"] = images;
  nlohmann::ordered_json norms;
  params.visit([&](const std::string& name, const Matrix& m) {
    double s = 0;
    for (double v : m.data()) s += v * v;
    norms[name] = std::isfinite(s) ? nlohmann::ordered_json(std::sqrt(s)) : nlohmann::ordered_json("non-finite");
  });
  doc["param_norms"] = norms;
  dataset::write_text(path, doc.dump(2) + "\n");
}

}  // namespace

TrainResult fit(const model::ModelSpec& spec, const model::GraphInputs& graphs, const std::vector<Example>& data,
                const config::TrainConfig& cfg, const std::filesystem::path& nan_dump, std::ostream* progress) {
  if (data.empty()) throw ValidationError("training set is empty");
  if (cfg.batch_size == 0) throw ConfigError("training.batch_size must be >= 1");
  TrainResult res;
  res.params = model::init_params(spec, cfg.seed);
  AdamW opt(cfg, res.params);
  const model::LossWeights w{cfg.lambda_box, cfg.lambda_aux, cfg.pseudo_weight};
  Rng order_rng(cfg.seed, 0x6f72646572ULL);
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  const unsigned workers = std::max(1u, cfg.workers);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<std::size_t> batch;
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        order_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    std::vector<ImageGradient> results(batch.size());
    std::vector<Failure> failures(batch.size());
    auto run = [&](std::size_t b) {
      try {
        results[b] = image_gradient(spec, res.params, data[batch[b]], graphs, w);
        if (!std::isfinite(results[b].total)) failures[b] = {true, "non-finite loss"};
      } catch (const NumericError& e) {
        failures[b] = {true, e.what()};
        results[b].total = std::nan("");
      } catch (...) {
        failures[b].other = std::current_exception();
      }
    };
    if (workers == 1) {
      for (std::size_t b = 0; b < batch.size(); ++b) run(b);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t b = t; b < batch.size(); b += workers) run(b);
        });
      }
      for (auto& th : pool) th.join();
    }
    for (const auto& f : failures)
      if (f.other) std::rethrow_exception(f.other);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (!failures[b].failed) continue;
      if (!nan_dump.empty()) write_dump(nan_dump, step, batch, data, results, failures, res.params);
      throw NumericError("step " + std::to_string(step) + ": image " + data[batch[b]].image + ": " +
                         failures[b].message + (nan_dump.empty() ? "" : "; batch dumped to " + nan_dump.string()));
    }

    // Fixed reduction order: batch position 0, 1, 2, ...
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::vector<Matrix> grads = std::move(results[0].grads);
    LossRow row{step, results[0].total, results[0].parts.cls, results[0].parts.box, results[0].parts.aux,
                results[0].parts.pseudo};
    for (std::size_t b = 1; b < batch.size(); ++b) {
      for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += results[b].grads[k];
      row.total += results[b].total;
      row.cls += results[b].parts.cls;
      row.box += results[b].parts.box;
      row.aux += results[b].parts.aux;
      row.pseudo += results[b].parts.pseudo;
    }
    for (auto& g : grads) g *= inv;
    row.total *= inv;
    row.cls *= inv;
    row.box *= inv;
    row.aux *= inv;
    row.pseudo *= inv;
    res.curve.push_back(row);
    opt.step(res.params, grads);
    if (progress && (step % 100 == 0 || step == cfg.steps)) {
      *progress << "step " << step << "/" << cfg.steps << " loss " << row.total << " cls " << row.cls << "\n";
    }
  }
  return res;
}

}  // namespace pgp::train
