#pragma once

#include <string>
#include <vector>

#include "edgetrack/io.hpp"
#include "edgetrack/synthetic.hpp"
#include "edgetrack/tracker.hpp"

namespace edgetrack {

struct PipelineConfig {
  TrackerConfig tracker;
  std::size_t keypoint_count = 9;
};

/// Parses a pipeline config. Unknown keys anywhere are errors. Far-Range mode starts from the
/// Far-Range defaults before explicit values are applied.
PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const fs::path& path);
std::string dump_pipeline_config(const PipelineConfig& cfg);

struct DatasetObject {
  std::uint16_t id = 1;
  std::string mesh;  // relative to the dataset root
  KeypointSet keypoints;
};

/// scene.json of a dataset directory.
struct DatasetInfo {
  Intrinsics intrinsics;
  int frames = 0;
  bool correspondences = false;
  std::vector<DatasetObject> objects;
};

DatasetInfo parse_dataset_info(const std::string& json_text);
std::string dump_dataset_info(const DatasetInfo& info);

fs::path frame_path(const fs::path& root, int frame);
fs::path vff_path(const fs::path& root, int frame);

/// Parses a `gen` script. Meshes come from an optional similar-object family followed by boxes
/// or OBJ files (resolved relative to `base_dir`). Keypoints are sampled per mesh.
SceneScript parse_scene_script(const std::string& json_text, const fs::path& base_dir);

/// Writes frames, optional VFFs, gt.csv, meshes and scene.json under `out_dir`.
void write_dataset(const fs::path& out_dir, const SceneScript& script, const RenderedSequence& seq);

Pose parse_pose_json(const std::string& json_text);

}  // namespace edgetrack
