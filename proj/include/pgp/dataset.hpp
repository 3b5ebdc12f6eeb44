#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pgp/prescription.hpp"
#include "pgp/world.hpp"

namespace pgp::dataset {

/// World file: the spec plus every sampled quantity, so loading never resamples.
std::string serialize_world(const world::World& w);
world::World parse_world(const std::string& text);
void save_world(const std::filesystem::path& path, const world::World& w);
world::World load_world(const std::filesystem::path& path);

/// Features sidecar, one JSON object per line:
/// {"image", "prescription", "camera_scale", "occluded", "proposals": [[x,y,w,h]], "features": [[...]]}.
/// Rows align with the boxes of the matching annotation record.
std::string serialize_features(const std::vector<world::Scene>& scenes);

/// Joins an annotation file and its sidecar back into scenes. Records must
/// appear in the same order with the same image ids and region counts.
std::vector<world::Scene> load_scenes(const std::filesystem::path& annotations, const std::filesystem::path& features,
                                      const graphs::PillCatalog& catalog);

/// Writes `text` to `path`, creating parent directories. Throws ValidationError on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace pgp::dataset
