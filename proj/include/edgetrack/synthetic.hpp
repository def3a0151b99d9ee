#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "edgetrack/detector.hpp"
#include "edgetrack/image_ops.hpp"
#include "edgetrack/mesh.hpp"
#include "edgetrack/random.hpp"

namespace edgetrack {

/// A box body with thin pins on every face (fixing the bounding box) and a set of connector
/// stubs that are toggled per variant. A disabled stub is sunk just below the body surface so all
/// variants share vertex order.
struct FamilyParams {
  Eigen::Vector3d body_size{0.12, 0.08, 0.06};
  int body_subdivisions = 2;
  double stub_width = 0.024;
  double stub_length = 0.02;
  double pin_width = 0.004;
  double pin_length = 0.024;
  double recess = 0.001;
  int stub_sites = 8;  // at most 12

  void Validate() const;
};

/// Stub toggle codes of the variants, chosen greedily for pairwise Hamming separation.
std::vector<std::uint32_t> family_codes(const FamilyParams& params, int n, std::uint64_t seed);
Mesh make_family_member(const FamilyParams& params, std::uint32_t code);
std::vector<Mesh> generate_family(const FamilyParams& params, int n, std::uint64_t seed);

enum class Background { Constant, Gradient, ValueNoise };

struct BackgroundParams {
  Background mode = Background::ValueNoise;
  float level = 0.08f;
  float contrast = 0.06f;  // half-range of the gradient or noise
  int noise_cell = 24;     // value-noise lattice spacing, pixels
};

struct ScriptedObject {
  std::size_t mesh_index = 0;
  std::uint16_t id = 1;
  std::vector<Pose> trajectory;  // one pose per frame
};

/// Depth-correct occluder rendered with the scene but never tracked.
struct DistractorObject {
  std::size_t mesh_index = 0;
  std::vector<Pose> trajectory;
};

/// Flat rectangle painted over the frame for frames [first_frame, last_frame].
struct OverlayOccluder {
  int first_frame = 0;
  int last_frame = 0;
  Eigen::Vector2i min_corner = Eigen::Vector2i::Zero();
  Eigen::Vector2i max_corner = Eigen::Vector2i::Zero();  // exclusive
  float intensity = 0.5f;
};

struct SceneScript {
  std::vector<Mesh> meshes;
  std::vector<KeypointSet> keypoints;  // per mesh; required for correspondence frames
  std::vector<ScriptedObject> objects;
  std::vector<DistractorObject> distractors;
  std::vector<OverlayOccluder> overlays;
  Intrinsics intrinsics;
  int frames = 1;
  double noise_sigma = 0.0;
  BackgroundParams background;
  float gain = 1.0f;  // object shading gain and offset
  float offset = 0.0f;
  bool correspondences = false;
  CorrespondenceNoise correspondence_noise;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct RenderedSequence {
  std::vector<GrayImage> frames;
  std::vector<std::vector<Pose>> gt;  // [frame][object]
  std::vector<CorrespondenceFrame> correspondences;  // empty unless requested
};

GrayImage make_background(const BackgroundParams& params, int width, int height, std::uint64_t seed);

/// One frame of a script; `vff` is filled when non-null.
GrayImage render_frame(const SceneScript& script, const GrayImage& background, int frame,
                       CorrespondenceFrame* vff);

RenderedSequence render_sequence(const SceneScript& script);

/// Perturbation with axis-angle components ~ N(0, sigma_rot/sqrt 3) and translation components
/// ~ N(0, sigma_trans_frac * depth / sqrt 3).
Pose perturb_pose(const Pose& pose, double sigma_rot_deg, double sigma_trans_frac, Rng& rng);

/// Smooth periodic motion around a base pose.
std::vector<Pose> oscillating_trajectory(const Pose& base, int frames, double rot_amplitude_deg,
                                         double trans_amplitude, double period_frames);

}  // namespace edgetrack
