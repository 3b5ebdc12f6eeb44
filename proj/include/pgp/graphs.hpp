#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pgp/matrix.hpp"
#include "pgp/prescription.hpp"

namespace pgp::graphs {

/// Diagnose-pill impact factor: tf(D, P) * idf(P), natural log.
///   tf  = |prescriptions with D and P| / |prescriptions with D|
///   idf = log(|prescriptions| / |prescriptions with P|)
/// Throws UndefinedStatisticError when D or P never occurs.
double impact_factor(const PrescriptionCorpus& corpus, std::size_t pill, const std::string& diagnosis);

/// Symmetric pill-pill co-occurrence weights in [0, 1].
struct CoGraph {
  num::Matrix weights;
  std::size_t n() const noexcept { return weights.rows(); }
};

/// Directed relative-size graph: weights(i, j) = s_i / s_j where known.
/// Unknown entries (different components) hold 1.
struct SizeGraph {
  num::Matrix weights;
  std::vector<std::vector<bool>> known;
  /// Per-class size indicator, 1 at each component's seed.
  std::vector<double> indicators;
  /// Component id per class.
  std::vector<std::size_t> component;
  std::size_t n() const noexcept { return weights.rows(); }
};

struct GraphWarnings {
  std::vector<std::string> messages;
};

/// Pill-diagnosis affinity p(P, D): impact factors normalized over diagnoses.
/// Rows are pills, columns follow `diagnoses` (sorted unique codes of the corpus).
struct PillDiagnosisAffinity {
  std::vector<std::string> diagnoses;
  num::Matrix p;
};
PillDiagnosisAffinity pill_diagnosis_affinity(const PrescriptionCorpus& corpus, const PillCatalog& catalog,
                                              GraphWarnings* warnings = nullptr);

/// W(i, j) = sum_D p(i, D) p(j, D). Pills with no nonzero impact get a zero
/// row/column and a warning. Throws ValidationError on an empty corpus.
CoGraph build_co_graph(const PrescriptionCorpus& corpus, const PillCatalog& catalog,
                       GraphWarnings* warnings = nullptr);

/// Size indicators from co-annotated box areas. Per image each class uses its
/// mean box area; each co-occurring class pair contributes log(area_j / area_i),
/// and repeated observations of a pair are averaged in log space. Log sizes are
/// then fit per connected component (weighted least squares, which reduces to
/// direct propagation whenever the observations are cycle-consistent).
/// `seeds` optionally chooses which class is normalized to 1 in its component
/// (the first listed member of each component wins; default lowest index).
/// Weights do not depend on the seed choice.
SizeGraph build_size_graph(const AnnotationSet& annotations, const PillCatalog& catalog,
                           std::span<const std::size_t> seeds = {});

/// Size weights with unknown entries replaced by 1, for the pipeline.
num::Matrix size_weights_for_pipeline(const SizeGraph& g);

// JSON export: {"n": int, "kind": "co"|"size", "edges": [[i, j, w], ...], "known": [[bool]]}.
// Co edges list every nonzero entry; size edges list every known entry.
std::string export_co_graph(const CoGraph& g);
std::string export_size_graph(const SizeGraph& g);
CoGraph import_co_graph(const std::string& text);
SizeGraph import_size_graph(const std::string& text);
CoGraph load_co_graph(const std::filesystem::path& path);
SizeGraph load_size_graph(const std::filesystem::path& path);

struct GraphStats {
  std::size_t edges = 0;  // off-diagonal nonzero (co) / known (size) ordered pairs
  double density = 0.0;   // edges / (n * (n - 1))
};
GraphStats co_graph_stats(const CoGraph& g);
GraphStats size_graph_stats(const SizeGraph& g);

}  // namespace pgp::graphs
