#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pgp/box.hpp"

namespace pgp::graphs {

/// Ordered pill classes; ids are dense 0..N-1.
class PillCatalog {
 public:
  PillCatalog() = default;
  explicit PillCatalog(std::vector<std::string> names);
  /// "pill_0", "pill_1", ... for synthetic worlds.
  static PillCatalog numbered(std::size_t n);
  /// {"classes": [{"id": int, "name": str}, ...]}; ids must be a permutation of 0..N-1.
  static PillCatalog load(const std::filesystem::path& path);

  std::size_t size() const noexcept { return names_.size(); }
  bool contains(long long id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }

 private:
  std::vector<std::string> names_;
};

/// One prescription. Diagnoses and pills are sorted and duplicate-free.
struct Prescription {
  std::string id;
  std::vector<std::string> diagnoses;
  std::vector<std::size_t> pills;
  friend bool operator==(const Prescription&, const Prescription&) = default;
};

struct PrescriptionCorpus {
  std::vector<Prescription> records;
  bool empty() const noexcept { return records.empty(); }
  std::size_t size() const noexcept { return records.size(); }
  friend bool operator==(const PrescriptionCorpus&, const PrescriptionCorpus&) = default;
};

/// JSON-lines: {"id": str, "diagnoses": [str], "pills": [int]} per line.
/// Blank lines are skipped. ParseError on malformed records, ValidationError
/// (message names the line) on empty sets or unknown pill ids.
PrescriptionCorpus parse_corpus(std::istream& in, const PillCatalog& catalog);
PrescriptionCorpus parse_corpus_file(const std::filesystem::path& path, const PillCatalog& catalog);
std::string serialize_corpus(const PrescriptionCorpus& corpus);

struct LabeledBox {
  Box box;
  std::size_t label = 0;
  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

struct ImageAnnotation {
  std::string image;
  std::vector<LabeledBox> boxes;
  friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

struct AnnotationSet {
  std::vector<ImageAnnotation> images;
  bool empty() const noexcept { return images.empty(); }
  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

/// JSON-lines: {"image": str, "boxes": [{"x","y","w","h","label"}]} per line.
AnnotationSet parse_annotations(std::istream& in, const PillCatalog& catalog);
AnnotationSet parse_annotations_file(const std::filesystem::path& path, const PillCatalog& catalog);
std::string serialize_annotations(const AnnotationSet& set);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace pgp::graphs
