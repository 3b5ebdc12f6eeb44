#include "pgp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgp/error.hpp"

namespace pgp::config {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kBaseline: return "baseline";
    case Variant::kNoSize: return "no_size";
    case Variant::kNoVisual: return "no_visual";
    case Variant::kNoGtn: return "no_gtn";
    case Variant::kNoAux: return "no_aux";
    case Variant::kCoOnly: return "co_only";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kFull, Variant::kBaseline, Variant::kNoSize, Variant::kNoVisual, Variant::kNoGtn,
                    Variant::kNoAux, Variant::kCoOnly}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown model.variant '" + std::string(name) +
                    "' (full, baseline, no_size, no_visual, no_gtn, no_aux, co_only)");
}

VariantFlags flags_of(Variant v) {
  VariantFlags f;
  switch (v) {
    case Variant::kFull: break;
    case Variant::kBaseline: f = {false, false, false, false, false, false}; break;
    case Variant::kNoSize: f.size = false; break;
    case Variant::kNoVisual: f.visual = false; break;
    case Variant::kNoGtn: f.gtn = false; break;
    case Variant::kNoAux: f.aux = false; break;
    case Variant::kCoOnly: f = {true, true, false, false, false, false}; break;
  }
  return f;
}

std::string_view ablation_name(AblationMode m) {
  switch (m) {
    case AblationMode::kEdgeRemove: return "edge_remove";
    case AblationMode::kEdgeAdd: return "edge_add";
    case AblationMode::kNodeRemove: return "node_remove";
  }
  return "?";
}

AblationMode parse_ablation(std::string_view name) {
  for (AblationMode m : {AblationMode::kEdgeRemove, AblationMode::kEdgeAdd, AblationMode::kNodeRemove}) {
    if (ablation_name(m) == name) return m;
  }
  throw ConfigError("unknown ablation.mode '" + std::string(name) + "' (edge_remove, edge_add, node_remove)");
}

namespace {

// Reads one JSON object, remembering consumed keys so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + display() + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 && !v.is_number_unsigned())) {
        throw ConfigError("config: '" + path_ + key + "' must be a non-negative integer");
      }
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config: '" + path_ + key + "' must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config: '" + path_ + key + "' must be a number");
      out = v.get<T>();
    } else {
      try {
        out = v.get<T>();
      } catch (const json::exception&) {
        throw ConfigError("config: '" + path_ + key + "' has the wrong type");
      }
    }
  }

  void read_path(const char* key, fs::path& out) {
    std::string s;
    if (j_.contains(key) && !j_.at(key).is_string()) throw ConfigError("config: '" + path_ + key + "' must be a string");
    read(key, s);
    if (j_.contains(key)) out = s;
  }

  const json* child(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) throw ConfigError("config: unknown key '" + path_ + item.key() + "'");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1); }
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "' must look like key.path=value");
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + spec + "' has an empty key segment");
    if (!node->is_object()) throw ConfigError("override '" + spec + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

void read_world(Section& s, world::WorldSpec& w) {
  s.read("classes", w.classes);
  s.read("diagnoses", w.diagnoses);
  s.read("max_diagnoses_per_rx", w.max_diagnoses_per_rx);
  s.read("comorbidity_groups", w.comorbidity_groups);
  s.read("hard_groups", w.hard_groups);
  s.read("size_table", w.size_table);
  s.read("feature_dim", w.feature_dim);
  s.read("noise_std", w.noise_std);
  s.read("occlusion_rate", w.occlusion_rate);
  s.read("hard_cosine", w.hard_cosine);
  s.read("min_pills", w.min_pills);
  s.read("max_pills", w.max_pills);
  s.read("image_size", w.image_size);
  s.read("base_side", w.base_side);
  s.read("seed", w.seed);
  s.finish();
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty()) return p;
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

}  // namespace

void RunConfig::validate() const {
  world.validate();
  if (data.prescriptions == 0) throw ConfigError("data.prescriptions must be >= 1");
  if (data.train_scenes == 0 || data.test_scenes == 0) throw ConfigError("data: scene counts must be >= 1");
  if (model.layers != 2) throw ConfigError("model.layers must be 2 (meta-paths of length two)");
  if (model.channels == 0) throw ConfigError("model.channels must be >= 1");
  if (model.latent_dim == 0 || model.embedding_dim == 0) throw ConfigError("model: dimensions must be >= 1");
  if (training.batch_size == 0) throw ConfigError("training.batch_size must be >= 1");
  if (!(training.learning_rate > 0.0)) throw ConfigError("training.learning_rate must be > 0");
  if (!(training.beta1 >= 0.0 && training.beta1 < 1.0) || !(training.beta2 >= 0.0 && training.beta2 < 1.0)) {
    throw ConfigError("training: betas must be in [0, 1)");
  }
  if (!(training.epsilon > 0.0)) throw ConfigError("training.epsilon must be > 0");
  if (training.weight_decay < 0.0 || training.lambda_box < 0.0 || training.lambda_aux < 0.0 ||
      training.pseudo_weight < 0.0) {
    throw ConfigError("training: weights and decay must be >= 0");
  }
  if (training.workers == 0) throw ConfigError("training.workers must be >= 1");
  if (!(ablation.fraction >= 0.0 && ablation.fraction < 1.0)) throw ConfigError("ablation.fraction must be in [0, 1)");
  if (eval.bins == 0) throw ConfigError("eval.bins must be >= 1");
}

std::string RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["world"] = {{"classes", world.classes},
                {"diagnoses", world.diagnoses},
                {"max_diagnoses_per_rx", world.max_diagnoses_per_rx},
                {"comorbidity_groups", world.comorbidity_groups},
                {"hard_groups", world.hard_groups},
                {"size_table", world.size_table},
                {"feature_dim", world.feature_dim},
                {"noise_std", world.noise_std},
                {"occlusion_rate", world.occlusion_rate},
                {"hard_cosine", world.hard_cosine},
                {"min_pills", world.min_pills},
                {"max_pills", world.max_pills},
                {"image_size", world.image_size},
                {"base_side", world.base_side},
                {"seed", world.seed}};
  j["data"] = {{"prescriptions", data.prescriptions},
               {"train_scenes", data.train_scenes},
               {"test_scenes", data.test_scenes}};
  j["model"] = {{"latent_dim", model.latent_dim},
                {"channels", model.channels},
                {"layers", model.layers},
                {"embedding_dim", model.embedding_dim},
                {"identity_channel", model.identity_channel},
                {"cosine_visual", model.cosine_visual},
                {"variant", std::string(variant_name(model.variant))}};
  j["training"] = {{"steps", training.steps},
                   {"batch_size", training.batch_size},
                   {"learning_rate", training.learning_rate},
                   {"beta1", training.beta1},
                   {"beta2", training.beta2},
                   {"epsilon", training.epsilon},
                   {"weight_decay", training.weight_decay},
                   {"lambda_box", training.lambda_box},
                   {"lambda_aux", training.lambda_aux},
                   {"k", training.k},
                   {"pseudo_weight", training.pseudo_weight},
                   {"seed", training.seed},
                   {"workers", training.workers}};
  j["ablation"] = {{"mode", std::string(ablation_name(ablation.mode))},
                   {"fraction", ablation.fraction},
                   {"seed", ablation.seed}};
  j["eval"] = {{"bins", eval.bins}};
  j["paths"] = {{"workdir", paths.workdir.string()},
                {"world", paths.world.string()},
                {"corpus", paths.corpus.string()},
                {"catalog", paths.catalog.string()},
                {"train_annotations", paths.train_annotations.string()},
                {"train_features", paths.train_features.string()},
                {"test_annotations", paths.test_annotations.string()},
                {"test_features", paths.test_features.string()},
                {"co_graph", paths.co_graph.string()},
                {"size_graph", paths.size_graph.string()},
                {"checkpoint", paths.checkpoint.string()},
                {"loss_csv", paths.loss_csv.string()},
                {"report_dir", paths.report_dir.string()},
                {"ablation_dir", paths.ablation_dir.string()}};
  return j.dump(2) + "\n";
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir, const std::vector<std::string>& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  for (const std::string& o : overrides) apply_override(root, o);

  RunConfig c;
  Section top(root, "");
  if (const json* w = top.child("world")) {
    Section s(*w, "world.");
    read_world(s, c.world);
  }
  if (const json* d = top.child("data")) {
    Section s(*d, "data.");
    s.read("prescriptions", c.data.prescriptions);
    s.read("train_scenes", c.data.train_scenes);
    s.read("test_scenes", c.data.test_scenes);
    s.finish();
  }
  if (const json* m = top.child("model")) {
    Section s(*m, "model.");
    s.read("latent_dim", c.model.latent_dim);
    s.read("channels", c.model.channels);
    s.read("layers", c.model.layers);
    s.read("embedding_dim", c.model.embedding_dim);
    s.read("identity_channel", c.model.identity_channel);
    s.read("cosine_visual", c.model.cosine_visual);
    std::string variant(variant_name(c.model.variant));
    s.read("variant", variant);
    c.model.variant = parse_variant(variant);
    s.finish();
  }
  if (const json* t = top.child("training")) {
    Section s(*t, "training.");
    s.read("steps", c.training.steps);
    s.read("batch_size", c.training.batch_size);
    s.read("learning_rate", c.training.learning_rate);
    s.read("beta1", c.training.beta1);
    s.read("beta2", c.training.beta2);
    s.read("epsilon", c.training.epsilon);
    s.read("weight_decay", c.training.weight_decay);
    s.read("lambda_box", c.training.lambda_box);
    s.read("lambda_aux", c.training.lambda_aux);
    s.read("k", c.training.k);
    s.read("pseudo_weight", c.training.pseudo_weight);
    s.read("seed", c.training.seed);
    s.read("workers", c.training.workers);
    s.finish();
  }
  if (const json* a = top.child("ablation")) {
    Section s(*a, "ablation.");
    std::string mode(ablation_name(c.ablation.mode));
    s.read("mode", mode);
    c.ablation.mode = parse_ablation(mode);
    s.read("fraction", c.ablation.fraction);
    s.read("seed", c.ablation.seed);
    s.finish();
  }
  if (const json* e = top.child("eval")) {
    Section s(*e, "eval.");
    s.read("bins", c.eval.bins);
    s.finish();
  }
  if (const json* p = top.child("paths")) {
    Section s(*p, "paths.");
    s.read_path("workdir", c.paths.workdir);
    s.read_path("world", c.paths.world);
    s.read_path("corpus", c.paths.corpus);
    s.read_path("catalog", c.paths.catalog);
    s.read_path("train_annotations", c.paths.train_annotations);
    s.read_path("train_features", c.paths.train_features);
    s.read_path("test_annotations", c.paths.test_annotations);
    s.read_path("test_features", c.paths.test_features);
    s.read_path("co_graph", c.paths.co_graph);
    s.read_path("size_graph", c.paths.size_graph);
    s.read_path("checkpoint", c.paths.checkpoint);
    s.read_path("loss_csv", c.paths.loss_csv);
    s.read_path("report_dir", c.paths.report_dir);
    s.read_path("ablation_dir", c.paths.ablation_dir);
    s.finish();
  }
  top.finish();

  PathsConfig& p = c.paths;
  p.workdir = resolve(base_dir, p.workdir);
  for (fs::path* f : {&p.world, &p.corpus, &p.catalog, &p.train_annotations, &p.train_features, &p.test_annotations,
                      &p.test_features, &p.co_graph, &p.size_graph, &p.checkpoint, &p.loss_csv, &p.report_dir,
                      &p.ablation_dir}) {
    *f = resolve(p.workdir, *f);
  }
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_config(buf.str(), base, overrides);
}

}  // namespace pgp::config
