#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgetrack/detector.hpp"
#include "edgetrack/image_ops.hpp"
#include "edgetrack/mesh.hpp"
#include "edgetrack/pose_validation.hpp"

namespace edgetrack {

namespace fs = std::filesystem;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
void write_file_atomic(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);

// Binary PGM (P5, maxval 255). Values are rounded from [0,1] on write and scaled back on read.
GrayImage decode_pgm(const std::string& bytes);
std::string encode_pgm(const GrayImage& img);
GrayImage read_pgm(const fs::path& path);
void write_pgm(const fs::path& path, const GrayImage& img);

/// Raw triangle lists as stored on disk (not recentered).
struct MeshData {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Triangle> triangles;
};

MeshData decode_obj(const std::string& text);
std::string encode_obj(const MeshData& data);
MeshData decode_msh(const std::string& bytes);
std::string encode_msh(const MeshData& data);
/// Loads `.obj` or `.msh` by extension and builds a bbox-centered mesh.
Mesh load_mesh(const fs::path& path);
void save_mesh(const fs::path& path, const Mesh& mesh);

// Correspondence frames: "VFF1", u32 width, u32 height, u16 k, u16 n_classes, u16 class plane,
// then vx and vy f32 planes per keypoint. All little-endian.
CorrespondenceFrame decode_vff(const std::string& bytes);
std::string encode_vff(const CorrespondenceFrame& frame);
CorrespondenceFrame read_vff(const fs::path& path);
void write_vff(const fs::path& path, const CorrespondenceFrame& frame);

struct PoseLogRow {
  int frame = 0;
  int object_id = 0;
  std::optional<Pose> pose;
  std::optional<EdgeScore> score;
  std::string state;
  bool detection_used = false;
};

std::string pose_log_header();
std::string format_pose_log_row(const PoseLogRow& row);
std::string encode_pose_log(const std::vector<PoseLogRow>& rows);
std::vector<PoseLogRow> decode_pose_log(const std::string& text);
std::vector<PoseLogRow> read_pose_log(const fs::path& path);
void write_pose_log(const fs::path& path, const std::vector<PoseLogRow>& rows);

}  // namespace edgetrack
