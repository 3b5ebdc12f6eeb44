#include "pgp/dataset.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pgp/error.hpp"

namespace pgp::dataset {

using nlohmann::ordered_json;
using num::Matrix;

namespace {

ordered_json matrix_rows(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const ordered_json& rows, std::size_t cols, const std::string& what) {
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw ValidationError(what + ": row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                            " values, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string serialize_world(const world::World& w) {
  const auto& s = w.spec;
  ordered_json spec;
  spec["classes"] = s.classes;
  spec["diagnoses"] = s.diagnoses;
  spec["max_diagnoses_per_rx"] = s.max_diagnoses_per_rx;
  spec["comorbidity_groups"] = s.comorbidity_groups;
  spec["hard_groups"] = s.hard_groups;
  spec["size_table"] = s.size_table;
  spec["feature_dim"] = s.feature_dim;
  spec["noise_std"] = s.noise_std;
  spec["occlusion_rate"] = s.occlusion_rate;
  spec["hard_cosine"] = s.hard_cosine;
  spec["min_pills"] = s.min_pills;
  spec["max_pills"] = s.max_pills;
  spec["image_size"] = s.image_size;
  spec["base_side"] = s.base_side;
  spec["seed"] = s.seed;
  ordered_json doc;
  doc["format"] = "pgp-world/1";
  doc["spec"] = spec;
  doc["sizes"] = w.sizes;
  doc["diagnosis_names"] = w.diagnosis_names;
  doc["prototypes"] = matrix_rows(w.prototypes);
  doc["disease_weights"] = matrix_rows(w.disease_weights);
  return doc.dump(1) + "\n";
}

world::World parse_world(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw ParseError(1, std::string("world: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "pgp-world/1") throw ValidationError("world: unsupported format tag");
    const auto& j = doc.at("spec");
    world::World w;
    auto& s = w.spec;
    s.classes = j.at("classes").get<std::size_t>();
    s.diagnoses = j.at("diagnoses").get<std::size_t>();
    s.max_diagnoses_per_rx = j.at("max_diagnoses_per_rx").get<std::size_t>();
    s.comorbidity_groups = j.at("comorbidity_groups").get<std::size_t>();
    s.hard_groups = j.at("hard_groups").get<std::vector<std::vector<std::size_t>>>();
    s.size_table = j.at("size_table").get<std::vector<double>>();
    s.feature_dim = j.at("feature_dim").get<std::size_t>();
    s.noise_std = j.at("noise_std").get<double>();
    s.occlusion_rate = j.at("occlusion_rate").get<double>();
    s.hard_cosine = j.at("hard_cosine").get<double>();
    s.min_pills = j.at("min_pills").get<std::size_t>();
    s.max_pills = j.at("max_pills").get<std::size_t>();
    s.image_size = j.at("image_size").get<double>();
    s.base_side = j.at("base_side").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    w.sizes = doc.at("sizes").get<std::vector<double>>();
    w.diagnosis_names = doc.at("diagnosis_names").get<std::vector<std::string>>();
    w.prototypes = matrix_from(doc.at("prototypes"), s.feature_dim, "world prototypes");
    w.disease_weights = matrix_from(doc.at("disease_weights"), s.classes, "world disease_weights");
    if (w.prototypes.rows() != s.classes || w.sizes.size() != s.classes || w.disease_weights.rows() != s.diagnoses ||
        w.diagnosis_names.size() != s.diagnoses) {
      throw ValidationError("world: sampled arrays disagree with the spec");
    }
    return w;
  } catch (const ordered_json::exception& e) {
    throw ParseError(1, std::string("world: ") + e.what());
  }
}

void save_world(const std::filesystem::path& path, const world::World& w) { write_text(path, serialize_world(w)); }

world::World load_world(const std::filesystem::path& path) {
  try {
    return parse_world(read_text(path));
  } catch (const ParseError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_features(const std::vector<world::Scene>& scenes) {
  std::string out;
  for (const auto& s : scenes) {
    ordered_json rec;
    rec["image"] = s.image;
    rec["prescription"] = s.prescription;
    rec["camera_scale"] = s.camera_scale;
    rec["occluded"] = s.occluded;
    ordered_json props = ordered_json::array();
    for (const Box& b : s.proposals) props.push_back({b.x, b.y, b.w, b.h});
    rec["proposals"] = props;
    rec["features"] = matrix_rows(s.features);
    out += rec.dump() + "\n";
  }
  return out;
}

std::vector<world::Scene> load_scenes(const std::filesystem::path& annotations, const std::filesystem::path& features,
                                      const graphs::PillCatalog& catalog) {
  const graphs::AnnotationSet ann = graphs::parse_annotations_file(annotations, catalog);
  std::ifstream in(features);
  if (!in) throw ValidationError("cannot open " + features.string());
  std::vector<world::Scene> scenes;
  std::string line;
  std::size_t lineno = 0;
  std::size_t feature_dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = features.string() + ": line " + std::to_string(lineno);
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
      throw ParseError(lineno, features.string() + ": " + e.what());
    }
    if (scenes.size() >= ann.images.size()) throw ValidationError(where + ": more sidecar records than annotations");
    const auto& a = ann.images[scenes.size()];
    world::Scene s;
    try {
      s.image = rec.at("image").get<std::string>();
      s.prescription = rec.at("prescription").get<std::string>();
      s.camera_scale = rec.at("camera_scale").get<double>();
      s.occluded = rec.at("occluded").get<bool>();
      for (const auto& p : rec.at("proposals")) {
        if (p.size() != 4) throw ValidationError(where + ": proposal needs 4 numbers");
        s.proposals.push_back(Box{p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>()});
      }
      const auto& rows = rec.at("features");
      if (rows.empty()) throw ValidationError(where + ": no feature rows");
      if (feature_dim == 0) feature_dim = rows[0].size();
      s.features = matrix_from(rows, feature_dim, where);
    } catch (const ordered_json::exception& e) {
      throw ParseError(lineno, features.string() + ": " + e.what());
    }
    if (s.image != a.image) throw ValidationError(where + ": image '" + s.image + "' but annotation has '" + a.image + "'");
    if (s.proposals.size() != a.boxes.size() || s.features.rows() != a.boxes.size()) {
      throw ValidationError(where + ": region count disagrees with the annotation");
    }
    for (const auto& lb : a.boxes) {
      s.boxes.push_back(lb.box);
      s.labels.push_back(lb.label);
    }
    scenes.push_back(std::move(s));
  }
  if (scenes.size() != ann.images.size()) {
    throw ValidationError(features.string() + ": " + std::to_string(scenes.size()) + " records for " +
                          std::to_string(ann.images.size()) + " annotated images");
  }
  return scenes;
}

}  // namespace pgp::dataset
