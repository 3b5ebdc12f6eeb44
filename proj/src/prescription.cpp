#include "pgp/prescription.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgp/error.hpp"

namespace pgp::graphs {

using nlohmann::json;

PillCatalog::PillCatalog(std::vector<std::string> names) : names_(std::move(names)) {}

PillCatalog PillCatalog::numbered(std::size_t n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) names.push_back("pill_" + std::to_string(i));
  return PillCatalog(std::move(names));
}

PillCatalog PillCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open catalog " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("catalog: ") + e.what());
  }
  const auto& classes = doc.at("classes");
  std::vector<std::string> names(classes.size());
  std::vector<bool> seen(classes.size(), false);
  for (const auto& c : classes) {
    const long long id = c.at("id").get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= names.size() || seen[static_cast<std::size_t>(id)]) {
      throw ValidationError("catalog ids must be unique and dense 0..N-1, got " + std::to_string(id));
    }
    seen[static_cast<std::size_t>(id)] = true;
    names[static_cast<std::size_t>(id)] = c.at("name").get<std::string>();
  }
  return PillCatalog(std::move(names));
}

namespace {

template <typename Fn>
void for_each_record(std::istream& in, Fn fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(lineno, "record is not an object");
    try {
      fn(rec, lineno);
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
}

std::string at_line(std::size_t lineno) { return "line " + std::to_string(lineno) + ": "; }

}  // namespace

PrescriptionCorpus parse_corpus(std::istream& in, const PillCatalog& catalog) {
  PrescriptionCorpus corpus;
  for_each_record(in, [&](const json& rec, std::size_t lineno) {
    Prescription p;
    p.id = rec.at("id").get<std::string>();
    std::set<std::string> diag;
    for (const auto& d : rec.at("diagnoses")) diag.insert(d.get<std::string>());
    std::set<std::size_t> pills;
    for (const auto& v : rec.at("pills")) {
      if (!v.is_number_integer()) throw ParseError(lineno, "pill id is not an integer");
      const long long id = v.get<long long>();
      if (!catalog.contains(id)) {
        throw ValidationError(at_line(lineno) + "unknown pill id " + std::to_string(id) + " in prescription " + p.id);
      }
      pills.insert(static_cast<std::size_t>(id));
    }
    if (diag.empty()) throw ValidationError(at_line(lineno) + "prescription " + p.id + " has no diagnoses");
    if (pills.empty()) throw ValidationError(at_line(lineno) + "prescription " + p.id + " has no pills");
    p.diagnoses.assign(diag.begin(), diag.end());
    p.pills.assign(pills.begin(), pills.end());
    corpus.records.push_back(std::move(p));
  });
  return corpus;
}

PrescriptionCorpus parse_corpus_file(const std::filesystem::path& path, const PillCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus " + path.string());
  try {
    return parse_corpus(in, catalog);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_corpus(const PrescriptionCorpus& corpus) {
  std::string out;
  for (const auto& p : corpus.records) {
    json rec;
    rec["id"] = p.id;
    rec["diagnoses"] = p.diagnoses;
    rec["pills"] = p.pills;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

AnnotationSet parse_annotations(std::istream& in, const PillCatalog& catalog) {
  AnnotationSet set;
  for_each_record(in, [&](const json& rec, std::size_t lineno) {
    ImageAnnotation img;
    img.image = rec.at("image").get<std::string>();
    for (const auto& b : rec.at("boxes")) {
      LabeledBox lb;
      lb.box = {b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(), b.at("h").get<double>()};
      const long long label = b.at("label").get<long long>();
      if (!lb.box.well_formed()) {
        throw ValidationError(at_line(lineno) + "box with non-positive extent in image " + img.image);
      }
      if (!catalog.contains(label)) {
        throw ValidationError(at_line(lineno) + "unknown label " + std::to_string(label) + " in image " + img.image);
      }
      lb.label = static_cast<std::size_t>(label);
      img.boxes.push_back(lb);
    }
    set.images.push_back(std::move(img));
  });
  return set;
}

AnnotationSet parse_annotations_file(const std::filesystem::path& path, const PillCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open annotations " + path.string());
  try {
    return parse_annotations(in, catalog);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string serialize_annotations(const AnnotationSet& set) {
  std::string out;
  for (const auto& img : set.images) {
    out += "{\"image\":" + json(img.image).dump() + ",\"boxes\":[";
    for (std::size_t i = 0; i < img.boxes.size(); ++i) {
      const auto& b = img.boxes[i];
      if (i) out += ',';
      out += "{\"x\":" + format_double(b.box.x) + ",\"y\":" + format_double(b.box.y) +
             ",\"w\":" + format_double(b.box.w) + ",\"h\":" + format_double(b.box.h) +
             ",\"label\":" + std::to_string(b.label) + "}";
    }
    out += "]}\n";
  }
  return out;
}

}  // namespace pgp::graphs
