#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pgp/box.hpp"
#include "pgp/matrix.hpp"
#include "pgp/prescription.hpp"

namespace pgp::world {

struct WorldSpec {
  std::size_t classes = 12;
  std::size_t diagnoses = 8;
  /// Each prescription draws 1..max_diagnoses_per_rx distinct diagnoses.
  std::size_t max_diagnoses_per_rx = 3;
  /// Diagnosis d belongs to comorbidity group d % comorbidity_groups. A
  /// prescription combines diagnoses of one group only, and every pill is
  /// supported by diagnoses of a single group, so pills of different groups
  /// are never co-prescribed. With more than one group, members of a hard
  /// group are placed in different comorbidity groups.
  std::size_t comorbidity_groups = 2;
  /// Disjoint class sets whose prototypes are near-identical.
  std::vector<std::vector<std::size_t>> hard_groups{{0, 1}, {2, 3}, {4, 5}};
  /// Per-class physical size; empty means drawn from [0.6, 1.6] by seed.
  std::vector<double> size_table;
  std::size_t feature_dim = 32;
  double noise_std = 1.0;
  double occlusion_rate = 0.3;
  /// Cosine similarity between members of a hard group.
  double hard_cosine = 0.96;
  std::size_t min_pills = 5;
  std::size_t max_pills = 10;
  double image_size = 1024.0;
  /// Box side in pixels for size 1 at camera scale 1.
  double base_side = 48.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on infeasible or out-of-range settings.
  void validate() const;
};

struct World {
  WorldSpec spec;
  num::Matrix prototypes;       // N x h, each row of norm sqrt(h)
  num::Matrix disease_weights;  // D x N; entry = inclusion probability, 0 when unsupported
  std::vector<double> sizes;    // N
  std::vector<std::string> diagnosis_names;

  std::size_t classes() const noexcept { return prototypes.rows(); }
  /// Index of the hard group containing `cls`, or -1.
  int hard_group_of(std::size_t cls) const;
  std::size_t comorbidity_group_of_diagnosis(std::size_t dx) const { return dx % spec.comorbidity_groups; }
  std::vector<std::size_t> hard_classes() const;
};

/// Deterministic in spec (including seed).
World sample_world(const WorldSpec& spec);

/// Each record: a comorbidity group with probability proportional to its
/// diagnosis count, then 1..min(max_diagnoses_per_rx, group size) distinct
/// diagnoses of that group uniformly, then every supported pill
/// independently with its weight; pill draws repeat until nonempty.
/// `stream` separates independent corpora drawn from one world.
graphs::PrescriptionCorpus sample_prescriptions(const World& world, std::size_t count, std::uint64_t stream = 0);

struct Scene {
  std::string image;
  std::string prescription;
  std::vector<Box> boxes;
  std::vector<std::size_t> labels;
  std::vector<Box> proposals;   // one per ground-truth box
  num::Matrix features;         // M x h, row i belongs to proposal i
  double camera_scale = 1.0;
  bool occluded = false;        // an occluded pair was placed on purpose

  std::size_t size() const noexcept { return labels.size(); }
};

/// Renders one scene from the prescription using its own seeded stream.
Scene render_scene(const World& world, const graphs::Prescription& prescription, std::uint64_t scene_seed,
                   std::string image_id);

/// `count` scenes; scene i picks a corpus record uniformly and renders with a
/// stream derived from (world seed, stream, i). Independent of thread count.
std::vector<Scene> render_scenes(const World& world, const graphs::PrescriptionCorpus& corpus, std::size_t count,
                                 std::uint64_t stream, const std::string& prefix, unsigned threads = 1);

/// Ground-truth view of scenes in the annotation format.
graphs::AnnotationSet annotations_of(const std::vector<Scene>& scenes);

/// True when any two ground-truth boxes overlap with IoU > 0.3.
bool has_heavy_overlap(const std::vector<Box>& boxes, double threshold = 0.3);

}  // namespace pgp::world
