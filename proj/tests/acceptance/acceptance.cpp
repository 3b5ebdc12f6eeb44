// Acceptance runner: one PASS/FAIL line per criterion on stdout, progress and
// per-seed measurements on stderr, raw numbers in <workdir>/acceptance.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgp/ablation.hpp"
#include "pgp/dataset.hpp"
#include "pgp/graphs.hpp"
#include "pgp/metrics.hpp"
#include "pgp/pipeline.hpp"
#include "pgp/relational.hpp"
#include "pgp/train.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using pgp::num::Matrix;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

const char* kSixPrescriptions =
    R"({"id":"r1","diagnoses":["D1"],"pills":[0,1]}
{"id":"r2","diagnoses":["D1","D2"],"pills":[0,2]}
{"id":"r3","diagnoses":["D2"],"pills":[2,3]}
{"id":"r4","diagnoses":["D3"],"pills":[3]}
{"id":"r5","diagnoses":["D3","D1"],"pills":[1,3,4]}
{"id":"r6","diagnoses":["D2"],"pills":[2,4]}
)";

// tf -> idf -> normalize over diagnoses -> sum of products, by explicit scans.
Matrix co_graph_oracle(const pgp::graphs::PrescriptionCorpus& c, std::size_t n) {
  std::set<std::string> diags;
  for (const auto& r : c.records) diags.insert(r.diagnoses.begin(), r.diagnoses.end());
  const double total = static_cast<double>(c.records.size());
  std::map<std::pair<std::size_t, std::string>, double> p;
  for (std::size_t pill = 0; pill < n; ++pill) {
    std::map<std::string, double> impact;
    double with_pill = 0;
    for (const auto& r : c.records) with_pill += std::count(r.pills.begin(), r.pills.end(), pill) > 0;
    double z = 0;
    for (const auto& d : diags) {
      double with_d = 0, both = 0;
      for (const auto& r : c.records) {
        const bool hd = std::count(r.diagnoses.begin(), r.diagnoses.end(), d) > 0;
        const bool hp = std::count(r.pills.begin(), r.pills.end(), pill) > 0;
        with_d += hd;
        both += hd && hp;
      }
      const double tf = both / with_d;
      const double idf = with_pill > 0 ? std::log(total / with_pill) : 0.0;
      impact[d] = tf * idf;
      z += impact[d];
    }
    for (const auto& d : diags) p[{pill, d}] = z > 0 ? impact[d] / z : 0.0;
  }
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (const auto& d : diags) w(i, j) += p[{i, d}] * p[{j, d}];
  return w;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::istringstream in(kSixPrescriptions);
  const auto catalog = pgp::graphs::PillCatalog::numbered(5);
  const auto corpus = pgp::graphs::parse_corpus(in, catalog);
  const auto g = pgp::graphs::build_co_graph(corpus, catalog);
  const Matrix oracle = co_graph_oracle(corpus, 5);
  const double err = pgp::num::max_abs_diff(g.weights, oracle);
  bool symmetric = true;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) symmetric &= g.weights(i, j) == g.weights(j, i);
  const double t = seconds_since(t0);
  return {err <= 1e-12 && symmetric && t < 1.0,
          "co-graph max |diff| vs oracle " + sci(err) + ", exact symmetry " + (symmetric ? "yes" : "no") +
              ", " + fmt(t, 3) + " s"};
}

// ---------------------------------------------------------------- criterion 2

pgp::graphs::AnnotationSet size_fixture() {
  // (area, label) per box; square boxes on a row
  const std::vector<std::vector<std::pair<double, std::size_t>>> images{
      {{100, 0}, {200, 1}}, {{50, 0}, {150, 1}}, {{100, 1}, {400, 2}}, {{90, 2}, {20, 3}, {40, 3}}, {{100, 2}, {50, 3}}};
  pgp::graphs::AnnotationSet set;
  for (std::size_t k = 0; k < images.size(); ++k) {
    pgp::graphs::ImageAnnotation a;
    a.image = "im" + std::to_string(k);
    double x = 0;
    for (const auto& [area, label] : images[k]) {
      const double side = std::sqrt(area);
      a.boxes.push_back({{x, 0, side, side}, label});
      x += side + 2;
    }
    set.images.push_back(a);
  }
  return set;
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  const auto fixture = size_fixture();
  const auto catalog = pgp::graphs::PillCatalog::numbered(4);
  const auto g = pgp::graphs::build_size_graph(fixture, catalog);
  // Geometric mean of per-image ratios on each observed pair (class means per
  // image), multiplied along the path 0-1-2-3.
  std::vector<double> s(4);
  s[0] = 1.0;
  s[1] = s[0] * std::sqrt((200.0 / 100.0) * (150.0 / 50.0));
  s[2] = s[1] * (400.0 / 100.0);
  s[3] = s[2] * std::sqrt((30.0 / 90.0) * (50.0 / 100.0));
  double rel = 0, recip = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      rel = std::max(rel, std::abs(g.weights(i, j) / (s[i] / s[j]) - 1.0));
      recip = std::max(recip, std::abs(g.weights(i, j) * g.weights(j, i) - 1.0));
    }
  bool seed_invariant = true;
  for (std::size_t seed = 0; seed < 4; ++seed) {
    const std::vector<std::size_t> seeds{seed};
    seed_invariant &= pgp::graphs::build_size_graph(fixture, catalog, seeds).weights == g.weights;
  }
  const double t = seconds_since(t0);
  return {rel <= 1e-9 && recip <= 1e-9 && seed_invariant && t < 1.0,
          "size-graph max rel err " + sci(rel) + ", reciprocity err " + sci(recip) +
              ", seed-invariant " + (seed_invariant ? "yes" : "no") + ", " + fmt(t, 3) + " s"};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3() {
  std::mt19937_64 rng(3);
  double worst_onehot = 0, worst_uniform = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + trial % 5, m = 2 + trial % 4;
    Matrix a = pgp::testing::random_matrix(n, n, rng, 0.0, 2.0);
    std::vector<std::size_t> cls(m);
    Matrix logits(m, n, -30.0);
    for (std::size_t i = 0; i < m; ++i) {
      cls[i] = rng() % n;
      logits(i, cls[i]) = 30.0;
    }
    pgp::num::Tape t;
    const Matrix hard = pgp::relational::condense(t.constant(a), t.constant(logits)).value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) worst_onehot = std::max(worst_onehot, std::abs(hard(i, j) - a(cls[i], cls[j])));
    double mean = 0;
    for (double v : a.data()) mean += v;
    mean /= static_cast<double>(a.size());
    const Matrix flat = pgp::relational::condense(t.constant(a), t.constant(Matrix(m, n))).value();
    for (double v : flat.data()) worst_uniform = std::max(worst_uniform, std::abs(v - mean));
  }
  return {worst_onehot <= 1e-6 && worst_uniform <= 1e-9,
          "one-hot max |diff| " + sci(worst_onehot) + ", uniform max |diff| " +
              sci(worst_uniform)};
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion4() {
  const auto t0 = Clock::now();
  pgp::config::RunConfig cfg;
  cfg.data = {300, 40, 1};
  cfg.model.latent_dim = 8;
  cfg.model.channels = 3;
  cfg.model.embedding_dim = 8;
  const auto data = pgp::pipeline::generate(cfg);
  const auto graphs = pgp::pipeline::build_graphs(data.corpus, data.train, data.world.classes());
  const auto inputs = pgp::train::make_graph_inputs(graphs.co.weights,
                                                    pgp::graphs::size_weights_for_pipeline(graphs.size), 2);
  const auto spec = pgp::pipeline::spec_for(cfg, data.train, data.world.classes());
  const auto examples = pgp::train::prepare(data.train);
  const pgp::model::LossWeights w{1.0, 0.1, 1.0};
  std::map<std::string, double> worst;
  int seeds = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed, ++seeds) {
    const auto params = pgp::model::init_params(spec, 1000 + seed);
    const auto& ex = examples[seed % examples.size()];
    const auto ig = pgp::train::image_gradient(spec, params, ex, inputs, w);
    std::size_t index = 0;
    params.visit([&](const std::string& name, const Matrix& value) {
      const std::size_t k = index++;
      auto f = [&](const Matrix& x) {
        pgp::model::Params q = params;
        std::size_t j = 0;
        q.visit([&](const std::string&, Matrix& m) {
          if (j++ == k) m = x;
        });
        pgp::num::Tape tape;
        const auto out = pgp::model::forward(spec, pgp::model::bind(tape, q, false), ex.features, inputs);
        return pgp::model::objective(spec, out, ex.labels, ex.box_targets, inputs, w).total.value().item();
      };
      const double e = pgp::testing::relative_error(pgp::testing::finite_diff(f, value), ig.grads[k]);
      const std::string group = name.rfind("gcn_", 0) == 0 ? "gcn" : name;
      worst[group] = std::max(worst[group], e);
    });
  }
  double max_err = 0;
  std::string detail;
  for (const auto& [g, e] : worst) {
    max_err = std::max(max_err, e);
    detail += g + "=" + sci(e) + " ";
  }
  const double t = seconds_since(t0);
  return {max_err < 1e-4 && t < 30.0 && seeds >= 20,
          std::to_string(seeds) + " seeds, worst relative error per group: " + detail + "(" + fmt(t, 1) + " s)"};
}

// ---------------------------------------------------------------- criterion 5

double brute_force_ap(const std::vector<pgp::metrics::Detection>& dets,
                      const std::vector<pgp::metrics::GroundTruth>& gts, std::size_t cls, double thr) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (dets[i].label == cls) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return dets[a].confidence > dets[b].confidence; });
  double npos = 0;
  for (const auto& g : gts) npos += g.label == cls;
  std::vector<bool> used(gts.size(), false);
  std::vector<double> prec, rec;
  double tp = 0, fp = 0;
  for (std::size_t i : idx) {
    int best = -1;
    double best_o = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].label != cls || gts[g].image != dets[i].image) continue;
      const double o = pgp::iou(dets[i].box, gts[g].box);
      if (o >= thr && o > best_o) {
        best = static_cast<int>(g);
        best_o = o;
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    } else {
      ++fp;
    }
    prec.push_back(tp / (tp + fp));
    rec.push_back(tp / npos);
  }
  double ap = 0, last = 0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (rec[k] == last) continue;
    double best = 0;
    for (std::size_t j = k; j < rec.size(); ++j) best = std::max(best, prec[j]);
    ap += (rec[k] - last) * best;
    last = rec[k];
  }
  return ap;
}

Outcome criterion5() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  int mismatches = 0, invariance_failures = 0, fixtures = 0;
  for (int trial = 0; trial < 100; ++trial, ++fixtures) {
    std::vector<pgp::metrics::GroundTruth> gt;
    std::vector<pgp::metrics::Detection> det;
    const int images = 1 + static_cast<int>(rng() % 5);
    for (int im = 0; im < images; ++im) {
      const std::string name = "im" + std::to_string(im);
      const int ng = 1 + static_cast<int>(rng() % 4);
      for (int g = 0; g < ng; ++g) {
        const pgp::Box b{u(rng) * 200, u(rng) * 200, 10 + u(rng) * 120, 10 + u(rng) * 120};
        const std::size_t label = rng() % 3;
        gt.push_back({name, b, label});
        const int copies = static_cast<int>(rng() % 3);
        for (int c = 0; c < copies; ++c) {
          pgp::Box d = b;
          d.x += (u(rng) - 0.5) * 0.5 * b.w;
          d.y += (u(rng) - 0.5) * 0.5 * b.h;
          det.push_back({name, d, rng() % 4 == 0 ? (label + 1) % 3 : label, u(rng)});
        }
      }
    }
    const auto r = pgp::metrics::map_report(det, gt, 3);
    for (std::size_t c = 0; c < 3; ++c) {
      if (r.per_class[c][0] < 0) continue;
      for (std::size_t t = 0; t < r.thresholds.size(); ++t)
        mismatches += r.per_class[c][t] != brute_force_ap(det, gt, c, r.thresholds[t]);
    }
    auto squashed = det;
    for (auto& d : squashed) d.confidence = 0.25 + 0.5 * std::pow(d.confidence, 5.0);
    invariance_failures += pgp::metrics::map_report(squashed, gt, 3).per_class != r.per_class;
  }
  std::vector<pgp::metrics::GroundTruth> gt{{"a", {0, 0, 10, 10}, 0}, {"a", {50, 50, 40, 40}, 1}, {"b", {5, 5, 200, 200}, 2}};
  std::vector<pgp::metrics::Detection> perfect;
  for (const auto& g : gt) perfect.push_back({g.image, g.box, g.label, 0.9});
  const double map = pgp::metrics::map_report(perfect, gt, 3).map;
  return {mismatches == 0 && invariance_failures == 0 && map == 1.0,
          std::to_string(fixtures) + " fixtures: " + std::to_string(mismatches) + " AP mismatches vs brute force, " +
              std::to_string(invariance_failures) + " rescaling failures, perfect mAP " + fmt(map, 3)};
}

// ------------------------------------------------------------ criteria 6 - 9

const std::vector<pgp::config::Variant> kVariants{
    pgp::config::Variant::kBaseline, pgp::config::Variant::kFull,  pgp::config::Variant::kNoSize,
    pgp::config::Variant::kNoVisual, pgp::config::Variant::kNoGtn, pgp::config::Variant::kNoAux,
    pgp::config::Variant::kCoOnly};
const std::vector<pgp::config::Variant> kSingleRemovals{pgp::config::Variant::kNoSize, pgp::config::Variant::kNoVisual,
                                                        pgp::config::Variant::kNoGtn, pgp::config::Variant::kNoAux};

struct SeedResult {
  std::map<std::string, double> hard_ap50, ece, map;
  // crit 7: hard-class AP50 drop (base - ablated) per perturbation; node
  // removal: retained-class AP50 drop
  std::map<std::string, double> drop;
};

pgp::config::RunConfig reference_config(std::uint64_t seed, std::size_t steps) {
  pgp::config::RunConfig cfg;
  cfg.world.seed = seed;
  cfg.training.seed = seed;
  cfg.ablation.seed = seed;
  cfg.training.steps = steps;
  return cfg;
}

SeedResult run_seed(std::uint64_t seed, std::size_t steps, bool variants, bool ablations) {
  SeedResult out;
  const auto cfg = reference_config(seed, steps);
  const auto data = pgp::pipeline::generate(cfg);
  const auto graphs = pgp::pipeline::build_graphs(data.corpus, data.train, data.world.classes());
  const Matrix size = pgp::graphs::size_weights_for_pipeline(graphs.size);
  std::optional<pgp::evaluate::Evaluation> full;
  for (auto v : kVariants) {
    const bool needed = variants || (ablations && v == pgp::config::Variant::kFull);
    if (!needed) continue;
    auto c = cfg;
    c.model.variant = v;
    const auto t0 = Clock::now();
    const auto r = pgp::pipeline::train_and_evaluate(c, data, graphs.co.weights, size);
    const std::string name(pgp::config::variant_name(v));
    out.hard_ap50[name] = r.eval.hard_ap50;
    out.ece[name] = r.eval.ece;
    out.map[name] = r.eval.overall.map;
    std::cerr << "  seed " << seed << " " << name << ": hard AP50 " << fmt(r.eval.hard_ap50) << ", ECE "
              << fmt(r.eval.ece) << ", mAP " << fmt(r.eval.overall.map) << " (" << fmt(seconds_since(t0), 1)
              << " s)\n";
    if (v == pgp::config::Variant::kFull) full = r.eval;
  }
  if (!ablations) return out;
  using M = pgp::config::AblationMode;
  const std::vector<std::pair<M, double>> runs{
      {M::kEdgeRemove, 0.25}, {M::kEdgeRemove, 0.5}, {M::kEdgeAdd, 0.25}, {M::kNodeRemove, 0.25}};
  for (const auto& [mode, fraction] : runs) {
    pgp::config::AblationConfig a = cfg.ablation;
    a.mode = mode;
    a.fraction = fraction;
    const auto p = pgp::ablation::perturb(graphs.co.weights, a);
    const auto r = pgp::pipeline::train_and_evaluate(cfg, data, p.co, size);
    const auto cmp = pgp::ablation::compare(a, p, *full, r.eval);
    const std::string key = std::string(pgp::config::ablation_name(mode)) + "_" + fmt(fraction, 2);
    const double drop = mode == M::kNodeRemove ? cmp.base_retained_ap50 - cmp.ablated_retained_ap50
                                               : cmp.base_hard_ap50 - cmp.ablated_hard_ap50;
    out.drop[key] = drop;
    std::cerr << "  seed " << seed << " " << key << ": " << p.changed << " changed, "
              << (mode == M::kNodeRemove ? "retained" : "hard") << " AP50 drop " << fmt(drop) << "\n";
  }
  return out;
}

Outcome criterion6(const std::vector<SeedResult>& rs) {
  std::vector<double> gain;
  std::string per;
  for (const auto& r : rs) {
    gain.push_back(r.hard_ap50.at("full") - r.hard_ap50.at("baseline"));
    per += fmt(gain.back(), 3) + " ";
  }
  const double m = median(gain);
  return {m >= 0.05, "median hard-class AP50 gain of full over visual-only " + fmt(m) + " (per seed: " + per +
                         "; need >= 0.05)"};
}

Outcome criterion7(const std::vector<SeedResult>& rs) {
  std::vector<double> removal_order, node_drop, add_vs_remove;
  int violations = 0;
  for (const auto& r : rs) {
    removal_order.push_back(r.drop.at("edge_remove_0.50") - r.drop.at("edge_remove_0.25"));
    node_drop.push_back(r.drop.at("node_remove_0.25"));
    add_vs_remove.push_back(r.drop.at("edge_remove_0.25") - r.drop.at("edge_add_0.25"));
    violations += (removal_order.back() <= 0) + (node_drop.back() <= 0) + (add_vs_remove.back() <= 0);
  }
  const double a = median(removal_order), b = median(node_drop), c = median(add_vs_remove);
  return {a > 0 && b > 0 && c > 0,
          "median [drop(remove 50%) - drop(remove 25%)] " + fmt(a) + ", median retained-class drop under node "
          "removal " + fmt(b) + ", median [drop(remove 25%) - drop(add 25%)] " + fmt(c) + "; each must be > 0; " +
              std::to_string(violations) + " individual-seed violations"};
}

Outcome criterion8(const std::vector<SeedResult>& rs) {
  auto med = [&](const std::string& v) {
    std::vector<double> x;
    for (const auto& r : rs) x.push_back(r.hard_ap50.at(v));
    return median(x);
  };
  const double full = med("full"), base = med("baseline");
  bool ok = true;
  std::string detail = "median hard AP50: full " + fmt(full);
  for (auto v : kSingleRemovals) {
    const std::string name(pgp::config::variant_name(v));
    const double x = med(name);
    const bool in_order = full >= x && x >= base;
    ok &= in_order;
    detail += ", " + name + " " + fmt(x) + (in_order ? "" : " (out of order)");
  }
  detail += ", baseline " + fmt(base) + "; co_only " + fmt(med("co_only")) + " (reported only)";
  return {ok, detail};
}

Outcome criterion9(const std::vector<SeedResult>& rs) {
  std::vector<double> f, b;
  for (const auto& r : rs) {
    f.push_back(r.ece.at("full"));
    b.push_back(r.ece.at("baseline"));
  }
  const double mf = median(f), mb = median(b);
  return {mf <= mb, "median ECE full " + fmt(mf) + " vs visual-only " + fmt(mb)};
}

// --------------------------------------------------------------- criterion 10

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = pgp::dataset::read_text(e.path());
  return files;
}

Outcome criterion10(const fs::path& workdir, const std::string& pgp_bin) {
  if (pgp_bin.empty()) return {false, "no --pgp binary given"};
  const fs::path root = workdir / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  pgp::dataset::write_text(root / "config.json", R"({
  "data": {"prescriptions": 300, "train_scenes": 40, "test_scenes": 20},
  "model": {"latent_dim": 8, "channels": 3, "embedding_dim": 8},
  "training": {"steps": 25, "batch_size": 4, "workers": 2},
  "ablation": {"mode": "edge_remove", "fraction": 0.5}
})");
  const std::vector<std::string> commands{"gen-world", "build-graphs", "train", "eval", "ablate", "report"};
  for (const std::string run : {"run_a", "run_b"}) {
    for (const auto& c : commands) {
      const std::string cmd = "\"" + pgp_bin + "\" " + c + " --config \"" + (root / "config.json").string() +
                              "\" --set paths.workdir=" + run + " >> \"" + (root / (run + ".log")).string() +
                              "\" 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + c + " (see " + run + ".log)"};
    }
  }
  const auto a = snapshot(root / "run_a");
  const auto b = snapshot(root / "run_b");
  std::size_t differing = 0;
  std::string first;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      if (first.empty()) first = name;
    }
  }
  const bool ok = a.size() == b.size() && differing == 0 && a.size() >= 15;
  return {ok, std::to_string(a.size()) + " artifacts from 6 commands compared across two runs, " +
                  std::to_string(differing) + " differ" + (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string workdir = "acceptance_work", pgp_bin;
  std::size_t seeds = 5, steps = 1000;
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_option("--pgp", pgp_bin, "Path to the pgp command-line tool");
  app.add_option("--seeds", seeds, "Seeds for the trend criteria");
  app.add_option("--steps", steps, "Training steps for the trend criteria");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);
  auto wanted = [&](int c) { return only.empty() || std::count(only.begin(), only.end(), c) > 0; };

  std::map<int, Outcome> results;
  auto guarded = [&](int c, const std::function<Outcome()>& f) {
    if (!wanted(c)) return;
    try {
      results[c] = f();
    } catch (const std::exception& e) {
      results[c] = {false, std::string("exception: ") + e.what()};
    }
  };
  guarded(1, criterion1);
  guarded(2, criterion2);
  guarded(3, criterion3);
  guarded(4, criterion4);
  guarded(5, criterion5);

  const bool trends = wanted(6) || wanted(8) || wanted(9);
  std::vector<SeedResult> per_seed;
  if (trends || wanted(7)) {
    try {
      for (std::size_t s = 0; s < seeds; ++s) {
        std::cerr << "reference world, seed " << s << "\n";
        per_seed.push_back(run_seed(s, steps, trends, wanted(7)));
      }
    } catch (const std::exception& e) {
      for (int c : {6, 7, 8, 9})
        if (wanted(c)) results[c] = {false, std::string("exception: ") + e.what()};
    }
  }
  if (per_seed.size() == seeds) {
    if (wanted(6)) guarded(6, [&] { return criterion6(per_seed); });
    if (wanted(7)) guarded(7, [&] { return criterion7(per_seed); });
    if (wanted(8)) guarded(8, [&] { return criterion8(per_seed); });
    if (wanted(9)) guarded(9, [&] { return criterion9(per_seed); });
  }
  guarded(10, [&] { return criterion10(workdir, pgp_bin); });

  nlohmann::ordered_json dump;
  dump["seeds"] = seeds;
  dump["steps"] = steps;
  for (std::size_t s = 0; s < per_seed.size(); ++s) {
    dump["per_seed"][s] = {{"hard_ap50", per_seed[s].hard_ap50},
                           {"ece", per_seed[s].ece},
                           {"map", per_seed[s].map},
                           {"drop", per_seed[s].drop}};
  }
  bool all = true;
  for (const auto& [c, o] : results) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << ": " << o.detail << "\n";
    dump["criteria"][std::to_string(c)] = {{"pass", o.pass}, {"detail", o.detail}};
    all &= o.pass;
  }
  pgp::dataset::write_text(fs::path(workdir) / "acceptance.json", dump.dump(2) + "\n");
  return all ? 0 : 1;
}
