#include "pgp/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include "pgp/error.hpp"
#include "pgp/rng.hpp"

namespace pgp::world {

using num::Matrix;

namespace {

constexpr std::uint64_t kWorldStream = 0x776f726c64ULL;
constexpr std::uint64_t kCorpusStream = 0x636f72707573ULL;
constexpr std::uint64_t kSceneStream = 0x7363656e65ULL;
constexpr double kOverlapIoU = 0.3;
constexpr double kJitter = 0.1;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// `count` orthonormal rows in R^dim by Gram-Schmidt on Gaussian draws.
Matrix orthonormal_rows(std::size_t count, std::size_t dim, Rng& rng) {
  Matrix q(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    for (;;) {
      auto row = q.row(r);
      for (double& v : row) v = rng.normal();
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < r; ++p) {
          const double c = dot(row, q.row(p));
          auto prev = q.row(p);
          for (std::size_t j = 0; j < dim; ++j) row[j] -= c * prev[j];
        }
      }
      const double norm = std::sqrt(dot(row, row));
      if (norm < 1e-6) continue;
      for (double& v : row) v /= norm;
      break;
    }
  }
  return q;
}

std::vector<int> group_index(const WorldSpec& spec) {
  std::vector<int> g(spec.classes, -1);
  for (std::size_t k = 0; k < spec.hard_groups.size(); ++k)
    for (std::size_t c : spec.hard_groups[k]) g[c] = static_cast<int>(k);
  return g;
}

bool conflicts(const std::vector<std::size_t>& members, std::size_t cls, const std::vector<int>& group) {
  for (std::size_t m : members) {
    if (m == cls) return true;
    if (group[cls] >= 0 && group[m] == group[cls]) return true;
  }
  return false;
}

}  // namespace

void WorldSpec::validate() const {
  if (classes == 0) throw ConfigError("world: classes must be >= 1");
  if (diagnoses == 0) throw ConfigError("world: diagnoses must be >= 1");
  if (max_diagnoses_per_rx == 0) throw ConfigError("world: max_diagnoses_per_rx must be >= 1");
  if (comorbidity_groups == 0 || comorbidity_groups > diagnoses) {
    throw ConfigError("world: comorbidity_groups must be in [1, diagnoses]");
  }
  if (feature_dim == 0) throw ConfigError("world: feature_dim must be >= 1");
  std::set<std::size_t> seen;
  std::size_t hard_total = 0;
  std::size_t largest = 0;
  for (const auto& g : hard_groups) {
    if (g.size() < 2) throw ConfigError("world: hard groups need at least two classes");
    for (std::size_t c : g) {
      if (c >= classes) {
        throw ConfigError("world: hard group class " + std::to_string(c) + " outside " + std::to_string(classes) +
                          " classes");
      }
      if (!seen.insert(c).second) throw ConfigError("world: hard groups must be disjoint");
    }
    hard_total += g.size();
    largest = std::max(largest, g.size());
  }
  if (classes < hard_total) throw ConfigError("world: fewer classes than hard-group members");
  if (feature_dim < classes + hard_groups.size()) {
    throw ConfigError("world: feature_dim " + std::to_string(feature_dim) + " too small; need classes + groups = " +
                      std::to_string(classes + hard_groups.size()));
  }
  if (largest > diagnoses) throw ConfigError("world: hard-group members need distinct diagnoses");
  if (comorbidity_groups > 1 && largest > comorbidity_groups) {
    throw ConfigError("world: hard-group members need distinct comorbidity groups; raise comorbidity_groups to " +
                      std::to_string(largest));
  }
  if (!size_table.empty()) {
    if (size_table.size() != classes) throw ConfigError("world: size_table length must equal classes");
    for (double s : size_table)
      if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("world: sizes must be positive");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("world: noise_std must be >= 0");
  if (!(occlusion_rate >= 0.0 && occlusion_rate <= 1.0)) throw ConfigError("world: occlusion_rate must be in [0, 1]");
  if (!(hard_cosine >= 0.95 && hard_cosine < 1.0)) throw ConfigError("world: hard_cosine must be in [0.95, 1)");
  if (min_pills == 0 || min_pills > max_pills) throw ConfigError("world: need 1 <= min_pills <= max_pills");
  if (!(base_side > 0.0) || !(image_size > 0.0)) throw ConfigError("world: image geometry must be positive");
  if (occlusion_rate > 0.0 && !size_table.empty()) {
    const auto [lo, hi] = std::minmax_element(size_table.begin(), size_table.end());
    if (*lo / *hi <= kOverlapIoU) throw ConfigError("world: size spread too wide to place occluded pairs");
  }
  // largest box: size 1.6 (or table max) at camera 2 must fit comfortably
  const double max_size = size_table.empty() ? 1.6 : *std::max_element(size_table.begin(), size_table.end());
  if (2.0 * base_side * std::sqrt(max_size) * 4.0 > image_size) {
    throw ConfigError("world: image_size too small for the largest box");
  }
}

int World::hard_group_of(std::size_t cls) const {
  for (std::size_t g = 0; g < spec.hard_groups.size(); ++g)
    for (std::size_t c : spec.hard_groups[g])
      if (c == cls) return static_cast<int>(g);
  return -1;
}

std::vector<std::size_t> World::hard_classes() const {
  std::vector<std::size_t> out;
  for (const auto& g : spec.hard_groups) out.insert(out.end(), g.begin(), g.end());
  std::sort(out.begin(), out.end());
  return out;
}

World sample_world(const WorldSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, kWorldStream);
  const std::size_t n = spec.classes;
  const std::size_t h = spec.feature_dim;
  const std::vector<int> group = group_index(spec);

  World w;
  w.spec = spec;
  const Matrix basis = orthonormal_rows(n + spec.hard_groups.size(), h, rng);
  const double scale = std::sqrt(static_cast<double>(h));
  const double c = std::sqrt(spec.hard_cosine);
  const double s = std::sqrt(1.0 - spec.hard_cosine);
  w.prototypes = Matrix(n, h);
  for (std::size_t k = 0; k < n; ++k) {
    auto own = basis.row(k);
    auto out = w.prototypes.row(k);
    if (group[k] < 0) {
      for (std::size_t j = 0; j < h; ++j) out[j] = scale * own[j];
    } else {
      auto shared = basis.row(n + static_cast<std::size_t>(group[k]));
      for (std::size_t j = 0; j < h; ++j) out[j] = scale * (c * shared[j] + s * own[j]);
    }
  }

  // Primary diagnosis per class: round-robin over a shuffled order, redrawn
  // until no diagnosis (or, with several comorbidity groups, no group) holds
  // two members of one hard group.
  const std::size_t d = spec.diagnoses;
  const std::size_t groups = spec.comorbidity_groups;
  std::vector<std::vector<std::size_t>> support(d);
  std::vector<std::vector<std::size_t>> pool(groups);  // classes by primary group
  for (int attempt = 0;; ++attempt) {
    if (attempt > 10000) throw ConfigError("world: could not separate hard-group members across diagnoses");
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    rng.shuffle(order.begin(), order.end());
    for (auto& sp : support) sp.clear();
    for (auto& p : pool) p.clear();
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      auto& sp = support[i % d];
      auto& gp = pool[(i % d) % groups];
      if (conflicts(groups > 1 ? gp : sp, order[i], group)) ok = false;
      sp.push_back(order[i]);
      gp.push_back(order[i]);
    }
    if (ok) break;
  }
  // Extras come from the diagnosis's own comorbidity group (from every class
  // when the group received no primary pill, as in worlds with N < groups).
  std::vector<std::size_t> all(n);
  for (std::size_t k = 0; k < n; ++k) all[k] = k;
  for (std::size_t dx = 0; dx < d; ++dx) {
    auto& sp = support[dx];
    const auto& gp = pool[dx % groups].empty() ? all : pool[dx % groups];
    const std::size_t extras = 1 + rng.below(2);
    for (std::size_t e = 0; e < extras; ++e) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t cls = gp[rng.below(gp.size())];
        if (!conflicts(sp, cls, group)) {
          sp.push_back(cls);
          break;
        }
      }
    }
  }
  w.disease_weights = Matrix(d, n);
  for (std::size_t i = 0; i < d; ++i) {
    std::sort(support[i].begin(), support[i].end());
    for (std::size_t cls : support[i]) w.disease_weights(i, cls) = rng.uniform(0.5, 0.9);
    w.diagnosis_names.push_back("dx_" + std::to_string(i));
  }
  if (spec.size_table.empty()) {
    w.sizes.resize(n);
    for (double& v : w.sizes) v = rng.uniform(0.6, 1.6);
  } else {
    w.sizes = spec.size_table;
  }
  return w;
}

graphs::PrescriptionCorpus sample_prescriptions(const World& world, std::size_t count, std::uint64_t stream) {
  if (count == 0) throw ConfigError("sample_prescriptions: count must be >= 1");
  Rng rng(world.spec.seed, kCorpusStream + stream);
  const std::size_t d = world.disease_weights.rows();
  const std::size_t n = world.disease_weights.cols();
  graphs::PrescriptionCorpus corpus;
  corpus.records.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t g = world.comorbidity_group_of_diagnosis(rng.below(d));
    std::vector<std::size_t> members;
    for (std::size_t i = g; i < d; i += world.spec.comorbidity_groups) members.push_back(i);
    const std::size_t m = members.size();
    const std::size_t k = 1 + rng.below(std::min(world.spec.max_diagnoses_per_rx, m));
    // partial Fisher-Yates: first k entries are a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) std::swap(members[i], members[i + rng.below(m - i)]);
    std::vector<std::size_t> chosen(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::size_t> pills;
    while (pills.empty()) {
      std::vector<bool> in(n, false);
      for (std::size_t di : chosen)
        for (std::size_t p = 0; p < n; ++p) {
          const double wdp = world.disease_weights(di, p);
          if (wdp > 0.0 && rng.bernoulli(wdp)) in[p] = true;
        }
      for (std::size_t p = 0; p < n; ++p)
        if (in[p]) pills.push_back(p);
    }
    graphs::Prescription rx;
    rx.id = "rx_" + std::to_string(r);
    for (std::size_t di : chosen) rx.diagnoses.push_back(world.diagnosis_names[di]);
    std::sort(rx.diagnoses.begin(), rx.diagnoses.end());
    rx.pills = std::move(pills);
    corpus.records.push_back(std::move(rx));
  }
  return corpus;
}

namespace {

double max_iou(const Box& b, const std::vector<Box>& placed) {
  double m = 0.0;
  for (const Box& p : placed) m = std::max(m, iou(b, p));
  return m;
}

Box clamp_into(Box b, double size) {
  b.x = std::clamp(b.x, 0.0, size - b.w);
  b.y = std::clamp(b.y, 0.0, size - b.h);
  return b;
}

}  // namespace

Scene render_scene(const World& world, const graphs::Prescription& prescription, std::uint64_t scene_seed,
                   std::string image_id) {
  const WorldSpec& spec = world.spec;
  if (prescription.pills.empty()) throw ValidationError("render_scene: prescription " + prescription.id + " is empty");
  for (std::size_t p : prescription.pills) {
    if (p >= world.classes()) {
      throw ValidationError("render_scene: prescription " + prescription.id + " references pill " + std::to_string(p) +
                            " outside this world");
    }
  }
  Rng rng(scene_seed);
  Scene scene;
  scene.image = std::move(image_id);
  scene.prescription = prescription.id;

  const std::size_t m = spec.min_pills + rng.below(spec.max_pills - spec.min_pills + 1);
  std::vector<std::size_t> pills = prescription.pills;
  rng.shuffle(pills.begin(), pills.end());
  for (std::size_t i = 0; i < m; ++i) {
    scene.labels.push_back(i < pills.size() ? pills[i] : pills[rng.below(pills.size())]);
  }
  rng.shuffle(scene.labels.begin(), scene.labels.end());

  scene.camera_scale = rng.uniform(0.5, 2.0);
  scene.occluded = m >= 2 && rng.bernoulli(spec.occlusion_rate);
  const double canvas = spec.image_size;
  for (std::size_t i = 0; i < m; ++i) {
    const double side = spec.base_side * std::sqrt(world.sizes[scene.labels[i]]) * scene.camera_scale;
    Box best{0, 0, side, side};
    double best_overlap = 2.0;
    if (i == 1 && scene.occluded) {
      const Box& a = scene.boxes[0];
      const double ca_x = a.x + a.w / 2, ca_y = a.y + a.h / 2;
      for (int attempt = 0; attempt < 256; ++attempt) {
        const double f = 0.3 * (1.0 - attempt / 256.0);
        Box b{ca_x + rng.uniform(-f, f) * a.w - side / 2, ca_y + rng.uniform(-f, f) * a.h - side / 2, side, side};
        b = clamp_into(b, canvas);
        if (iou(a, b) > kOverlapIoU) {
          best = b;
          best_overlap = 0.0;
          break;
        }
      }
      if (best_overlap > 0.0) best = clamp_into(Box{ca_x - side / 2, ca_y - side / 2, side, side}, canvas);
    } else {
      // the first box of an occluded pair keeps one side length of margin so its partner never needs clamping
      const double margin = i == 0 && scene.occluded ? side : 0.0;
      for (int attempt = 0; attempt < 4096 && best_overlap > 0.0; ++attempt) {
        const Box b{rng.uniform(margin, canvas - side - margin), rng.uniform(margin, canvas - side - margin), side,
                    side};
        const double o = max_iou(b, scene.boxes);
        if (o < best_overlap) {
          best = b;
          best_overlap = o;
        }
      }
    }
    scene.boxes.push_back(best);
  }

  const std::size_t h = spec.feature_dim;
  scene.features = Matrix(m, h);
  for (std::size_t i = 0; i < m; ++i) {
    auto proto = world.prototypes.row(scene.labels[i]);
    auto out = scene.features.row(i);
    for (std::size_t j = 0; j < h; ++j) out[j] = proto[j] + (spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0);
  }
  if (scene.occluded) {
    const double beta = iou(scene.boxes[0], scene.boxes[1]) / 2.0;
    auto a = scene.features.row(0);
    auto b = scene.features.row(1);
    for (std::size_t j = 0; j < h; ++j) {
      const double fa = a[j], fb = b[j];
      a[j] = (1.0 - beta) * fa + beta * fb;
      b[j] = (1.0 - beta) * fb + beta * fa;
    }
  }
  for (const Box& g : scene.boxes) {
    Box p = g;
    p.x += rng.normal(0.0, kJitter * g.w);
    p.y += rng.normal(0.0, kJitter * g.h);
    p.w = std::max(0.3 * g.w, g.w + rng.normal(0.0, kJitter * g.w));
    p.h = std::max(0.3 * g.h, g.h + rng.normal(0.0, kJitter * g.h));
    scene.proposals.push_back(p);
  }
  return scene;
}

std::vector<Scene> render_scenes(const World& world, const graphs::PrescriptionCorpus& corpus, std::size_t count,
                                 std::uint64_t stream, const std::string& prefix, unsigned threads) {
  if (corpus.empty()) throw ValidationError("render_scenes: empty prescription corpus");
  std::vector<Scene> scenes(count);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < count; i += step) {
      const std::uint64_t seed = derive_seed(derive_seed(world.spec.seed, kSceneStream + stream), i);
      Rng pick(seed, 1);
      const auto& rx = corpus.records[pick.below(corpus.size())];
      char id[32];
      std::snprintf(id, sizeof id, "%05zu", i);
      scenes[i] = render_scene(world, rx, seed, prefix + id);
    }
  };
  const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (t == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < t; ++k) pool.emplace_back(work, k, t);
    for (auto& th : pool) th.join();
  }
  return scenes;
}

graphs::AnnotationSet annotations_of(const std::vector<Scene>& scenes) {
  graphs::AnnotationSet set;
  for (const Scene& s : scenes) {
    graphs::ImageAnnotation a;
    a.image = s.image;
    for (std::size_t i = 0; i < s.size(); ++i) a.boxes.push_back({s.boxes[i], s.labels[i]});
    set.images.push_back(std::move(a));
  }
  return set;
}

bool has_heavy_overlap(const std::vector<Box>& boxes, double threshold) {
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j)
      if (iou(boxes[i], boxes[j]) > threshold) return true;
  return false;
}

}  // namespace pgp::world
