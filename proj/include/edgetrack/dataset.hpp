#pragma once

#include <map>
#include <optional>
#include <vector>

#include "edgetrack/config.hpp"

namespace edgetrack {

/// A dataset directory as written by write_dataset: scene.json, meshes, frames and optional VFFs.
struct Dataset {
  fs::path root;
  DatasetInfo info;
  std::vector<Mesh> meshes;  // parallel to info.objects
};

Dataset load_dataset(const fs::path& root);

/// Meshes of a dataset keyed by object id.
std::map<int, Mesh> meshes_by_id(const Dataset& dataset);

/// Intrinsics from a scene.json or from a bare intrinsics object.
Intrinsics parse_intrinsics_json(const std::string& json_text);

struct TrackTimings {
  std::vector<double> frame_ms;  // refine + detect time summed over objects, per frame
};

/// Runs the tracker over every frame. One row per object per frame, registration order.
std::vector<PoseLogRow> track_dataset(const Dataset& dataset, const PipelineConfig& cfg,
                                      TrackTimings* timings = nullptr);

struct EvalSummary {
  std::size_t rows = 0;          // ground-truth rows
  std::size_t estimated = 0;     // rows with an estimated pose
  double proj_pass_rate = 0.0;   // 2D projection error < 5 px, missing poses count as failures
  double proj_below_1px = 0.0;
  double mean_proj_px = 0.0;     // over estimated rows
  double add_pass_rate = 0.0;    // ADD < 0.1 diameter
  double mean_rot_deg = 0.0;     // over estimated rows
  std::optional<double> improvement_rate;  // rows whose 2D error is below the init's
};

/// Joins estimates and ground truth on (frame, object id). `init` enables the improvement rate.
EvalSummary evaluate_logs(const std::vector<PoseLogRow>& est, const std::vector<PoseLogRow>& gt,
                          const std::map<int, Mesh>& meshes, const Intrinsics& intr,
                          const std::vector<PoseLogRow>* init = nullptr);

std::string format_eval_summary(const EvalSummary& s);

}  // namespace edgetrack
