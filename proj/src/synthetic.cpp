#include "edgetrack/synthetic.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "edgetrack/parallel.hpp"
#include "edgetrack/rasterizer.hpp"

namespace edgetrack {

namespace {

struct StubSite {
  int axis;      // face normal axis
  int sign;      // +1 or -1
  int along;     // in-face axis carrying the offset
  double shift;  // fraction of the half extent along `along`
};

// Interleaved so the first sites already cover every face.
constexpr std::array<StubSite, 12> kSites{{
    {2, +1, 0, -0.55}, {1, -1, 0, +0.55}, {0, +1, 1, +0.6}, {2, -1, 0, +0.55},
    {1, +1, 0, -0.55}, {0, -1, 1, -0.6}, {2, +1, 0, +0.55}, {1, -1, 0, -0.55},
    {0, +1, 1, -0.6}, {2, -1, 0, -0.55}, {1, +1, 0, +0.55}, {0, -1, 1, +0.6},
}};

// Box extending from a face plane outward (depth > 0) or sunk inward (depth < 0).
void append_face_block(std::vector<Eigen::Vector3d>& v, std::vector<Triangle>& t, const Eigen::Vector3d& half,
                       int axis, int sign, const Eigen::Vector3d& center_in_face, double width,
                       double start, double end) {
  Eigen::Vector3d lo = center_in_face.array() - width / 2;
  Eigen::Vector3d hi = center_in_face.array() + width / 2;
  const double a = sign * (half[axis] + start);
  const double b = sign * (half[axis] + end);
  lo[axis] = std::min(a, b);
  hi[axis] = std::max(a, b);
  append_box(v, t, lo, hi, 1);
}

}  // namespace

void FamilyParams::Validate() const {
  if (!(body_size.minCoeff() > 0)) throw Error("body size must be positive");
  if (body_subdivisions < 1) throw Error("body_subdivisions must be >= 1");
  if (stub_sites < 1 || stub_sites > static_cast<int>(kSites.size())) throw Error("stub_sites must be in [1, 12]");
  if (!(stub_width > 0 && stub_length > 0 && pin_width > 0 && recess > 0)) throw Error("feature sizes must be positive");
  if (!(pin_length > stub_length)) throw Error("pins must be longer than stubs");
  if (!(stub_length + recess < 0.5 * body_size.minCoeff())) throw Error("disabled stubs do not fit inside the body");
  for (int s = 0; s < stub_sites; ++s) {
    const StubSite& site = kSites[static_cast<std::size_t>(s)];
    const double half_along = 0.5 * body_size[site.along];
    const double c = std::abs(site.shift) * half_along;
    if (c + stub_width / 2 > half_along || c - stub_width / 2 < pin_width / 2)
      throw Error("stub does not fit on its face");
    for (int k = 0; k < 3; ++k)
      if (k != site.axis && k != site.along && stub_width > body_size[k]) throw Error("stub wider than its face");
  }
}

std::vector<std::uint32_t> family_codes(const FamilyParams& params, int n, std::uint64_t seed) {
  params.Validate();
  if (n < 2) throw Error("a family needs at least two members");
  const std::uint32_t count = (1u << params.stub_sites) - 1;
  if (static_cast<std::uint32_t>(n) > count) throw Error("not enough stub sites for the family size");

  std::vector<std::uint32_t> pool(count);
  std::iota(pool.begin(), pool.end(), 1u);
  Rng rng(seed);
  for (std::size_t i = pool.size() - 1; i > 0; --i) std::swap(pool[i], pool[rng.index(i + 1)]);

  std::vector<std::uint32_t> chosen{pool.front()};
  std::vector<bool> used(pool.size(), false);
  used[0] = true;
  while (static_cast<int>(chosen.size()) < n) {
    int best_d = -1;
    std::size_t best = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used[i]) continue;
      int d = params.stub_sites + 1;
      for (const auto c : chosen) d = std::min(d, std::popcount(c ^ pool[i]));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    used[best] = true;
    chosen.push_back(pool[best]);
  }
  return chosen;
}

Mesh make_family_member(const FamilyParams& params, std::uint32_t code) {
  params.Validate();
  const Eigen::Vector3d half = 0.5 * params.body_size;
  std::vector<Eigen::Vector3d> v;
  std::vector<Triangle> t;
  append_box(v, t, -half, half, params.body_subdivisions);
  for (int axis = 0; axis < 3; ++axis)
    for (int sign : {-1, +1})
      append_face_block(v, t, half, axis, sign, Eigen::Vector3d::Zero(), params.pin_width, 0.0, params.pin_length);
  for (int s = 0; s < params.stub_sites; ++s) {
    const StubSite& site = kSites[static_cast<std::size_t>(s)];
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    c[site.along] = site.shift * half[site.along];
    if (code & (1u << s))
      append_face_block(v, t, half, site.axis, site.sign, c, params.stub_width, 0.0, params.stub_length);
    else
      append_face_block(v, t, half, site.axis, site.sign, c, params.stub_width, -params.recess - params.stub_length,
                        -params.recess);
  }
  return make_mesh(std::move(v), std::move(t));
}

std::vector<Mesh> generate_family(const FamilyParams& params, int n, std::uint64_t seed) {
  std::vector<Mesh> out;
  for (const auto code : family_codes(params, n, seed)) out.push_back(make_family_member(params, code));
  return out;
}

void SceneScript::Validate() const {
  intrinsics.Validate();
  if (frames < 1) throw Error("script needs at least one frame");
  if (!(noise_sigma >= 0)) throw Error("noise sigma must be non-negative");
  if (!(gain > 0)) throw Error("gain must be positive");
  if (background.noise_cell < 1) throw Error("noise_cell must be >= 1");
  for (const auto& o : objects) {
    if (o.mesh_index >= meshes.size()) throw Error("object references an unknown mesh");
    if (static_cast<int>(o.trajectory.size()) != frames) throw Error("trajectory length differs from frame count");
    if (o.id == 0) throw Error("object id 0 is reserved");
    if (correspondences && o.mesh_index >= keypoints.size()) throw Error("object has no keypoints");
  }
  for (const auto& d : distractors) {
    if (d.mesh_index >= meshes.size()) throw Error("distractor references an unknown mesh");
    if (static_cast<int>(d.trajectory.size()) != frames) throw Error("trajectory length differs from frame count");
  }
  if (correspondences && objects.empty()) throw Error("correspondence frames need at least one object");
}

GrayImage make_background(const BackgroundParams& params, int width, int height, std::uint64_t seed) {
  GrayImage img(height, width);
  switch (params.mode) {
    case Background::Constant:
      img.setConstant(params.level);
      break;
    case Background::Gradient:
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double u = (x + y) / static_cast<double>(std::max(1, width + height - 2));
          img(y, x) = static_cast<float>(params.level + params.contrast * (2.0 * u - 1.0));
        }
      break;
    case Background::ValueNoise: {
      const int cell = params.noise_cell;
      const int gw = width / cell + 2;
      const int gh = height / cell + 2;
      Rng rng(mix_seed(seed, 0xB6));
      std::vector<double> lattice(static_cast<std::size_t>(gw * gh));
      for (auto& l : lattice) l = rng.uniform(-1.0, 1.0);
      const auto at = [&](int gx, int gy) { return lattice[static_cast<std::size_t>(gy * gw + gx)]; };
      const auto smooth = [](double s) { return s * s * (3.0 - 2.0 * s); };
      for (int y = 0; y < height; ++y) {
        const int gy = y / cell;
        const double fy = smooth((y % cell) / static_cast<double>(cell));
        for (int x = 0; x < width; ++x) {
          const int gx = x / cell;
          const double fx = smooth((x % cell) / static_cast<double>(cell));
          const double top = at(gx, gy) * (1 - fx) + at(gx + 1, gy) * fx;
          const double bottom = at(gx, gy + 1) * (1 - fx) + at(gx + 1, gy + 1) * fx;
          img(y, x) = static_cast<float>(params.level + params.contrast * (top * (1 - fy) + bottom * fy));
        }
      }
      break;
    }
  }
  return img.max(0.0f).min(1.0f);
}

GrayImage render_frame(const SceneScript& script, const GrayImage& background, int frame,
                       CorrespondenceFrame* vff) {
  const auto f = static_cast<std::size_t>(frame);
  const Intrinsics& intr = script.intrinsics;
  std::vector<SceneObject> scene;
  int max_id = 0;
  for (const auto& o : script.objects) {
    scene.push_back(SceneObject{&script.meshes[o.mesh_index], o.trajectory[f], o.id});
    max_id = std::max<int>(max_id, o.id);
  }
  std::vector<SceneObject> distractors;
  for (std::size_t i = 0; i < script.distractors.size(); ++i) {
    const auto& d = script.distractors[i];
    distractors.push_back(SceneObject{&script.meshes[d.mesh_index], d.trajectory[f],
                                      static_cast<std::uint16_t>(max_id + 1 + static_cast<int>(i))});
  }
  std::vector<SceneObject> all = scene;
  all.insert(all.end(), distractors.begin(), distractors.end());

  GrayImage img = background;
  if (!all.empty()) {
    const RenderOutput r = render(all, intr);
    for (int y = 0; y < intr.height; ++y)
      for (int x = 0; x < intr.width; ++x)
        if (r.object_id(y, x) != 0) img(y, x) = script.gain * r.intensity(y, x) + script.offset;
  }

  MaskImage hidden = MaskImage::Constant(intr.height, intr.width, false);
  for (const auto& o : script.overlays) {
    if (frame < o.first_frame || frame > o.last_frame) continue;
    const int x0 = std::clamp(o.min_corner.x(), 0, intr.width);
    const int y0 = std::clamp(o.min_corner.y(), 0, intr.height);
    const int x1 = std::clamp(o.max_corner.x(), 0, intr.width);
    const int y1 = std::clamp(o.max_corner.y(), 0, intr.height);
    if (x1 <= x0 || y1 <= y0) continue;
    img.block(y0, x0, y1 - y0, x1 - x0).setConstant(o.intensity);
    hidden.block(y0, x0, y1 - y0, x1 - x0).setConstant(true);
  }

  if (script.noise_sigma > 0) {
    Rng rng(mix_seed(script.seed, static_cast<std::uint64_t>(frame), 1));
    for (int y = 0; y < intr.height; ++y)
      for (int x = 0; x < intr.width; ++x)
        img(y, x) += static_cast<float>(script.noise_sigma * rng.normal());
  }
  img = img.max(0.0f).min(1.0f);

  if (vff) {
    std::vector<CorrespondenceObject> objs;
    for (const auto& o : script.objects)
      objs.push_back(CorrespondenceObject{&script.meshes[o.mesh_index], &script.keypoints[o.mesh_index],
                                          o.trajectory[f], o.id});
    CorrespondenceNoise noise = script.correspondence_noise;
    noise.seed = mix_seed(script.seed ^ noise.seed, static_cast<std::uint64_t>(frame), 2);
    *vff = synth_correspondences(objs, intr, noise, &hidden, distractors);
  }
  return img;
}

RenderedSequence render_sequence(const SceneScript& script) {
  script.Validate();
  const Intrinsics& intr = script.intrinsics;
  const GrayImage background = make_background(script.background, intr.width, intr.height, script.seed);
  RenderedSequence out;
  const auto n = static_cast<std::size_t>(script.frames);
  out.frames.resize(n);
  out.gt.resize(n);
  if (script.correspondences) out.correspondences.resize(n);
  parallel_for(n, [&](std::size_t f) {
    out.frames[f] = render_frame(script, background, static_cast<int>(f),
                                 script.correspondences ? &out.correspondences[f] : nullptr);
    for (const auto& o : script.objects) out.gt[f].push_back(o.trajectory[f]);
  });
  return out;
}

Pose perturb_pose(const Pose& pose, double sigma_rot_deg, double sigma_trans_frac, Rng& rng) {
  const double sr = deg2rad(sigma_rot_deg) / std::sqrt(3.0);
  const double st = sigma_trans_frac * pose.translation.z() / std::sqrt(3.0);
  Eigen::Vector3d dr, dt;
  for (int i = 0; i < 3; ++i) dr[i] = sr * rng.normal();
  for (int i = 0; i < 3; ++i) dt[i] = st * rng.normal();
  return apply_delta(pose, MotionDelta{dr, dt});
}

std::vector<Pose> oscillating_trajectory(const Pose& base, int frames, double rot_amplitude_deg,
                                         double trans_amplitude, double period_frames) {
  if (frames < 1 || !(period_frames > 0)) throw Error("invalid trajectory parameters");
  std::vector<Pose> out;
  const double w = 2.0 * std::numbers::pi / period_frames;
  const double a = deg2rad(rot_amplitude_deg);
  for (int f = 0; f < frames; ++f) {
    const double s = std::sin(w * f);
    const double c = std::cos(0.7 * w * f);
    Pose p = base;
    p.rotation = Orthonormalize<double>(ExpSO3<double>(Eigen::Vector3d(a * s, a * c, 0.5 * a * s * c)) * base.rotation);
    p.translation += trans_amplitude * Eigen::Vector3d(s, 0.5 * (c - 1.0), 0.3 * s * c);
    out.push_back(p);
  }
  return out;
}

}  // namespace edgetrack
