#include "edgetrack/detector.hpp"

#include <cmath>
#include <numbers>

#include "edgetrack/random.hpp"

namespace edgetrack {

CorrespondenceFrame CorrespondenceFrame::Empty(int width, int height, int k, int n_classes) {
  CorrespondenceFrame f;
  f.width = width;
  f.height = height;
  f.n_classes = n_classes;
  f.class_mask = IdImage::Zero(height, width);
  f.vx.assign(static_cast<std::size_t>(k), FieldPlane::Zero(height, width));
  f.vy.assign(static_cast<std::size_t>(k), FieldPlane::Zero(height, width));
  return f;
}

void DetectionConfig::Validate() const {
  if (min_valid_points < 4) throw Error("min_valid_points must be >= 4");
  if (!(max_reproj_px > 0)) throw Error("max_reproj_px must be > 0");
  if (ransac_hypotheses < 1) throw Error("ransac_hypotheses must be >= 1");
  if (!(inlier_cos_threshold > -1 && inlier_cos_threshold < 1))
    throw Error("inlier_cos_threshold must be in (-1, 1)");
}

std::vector<KeypointEstimate> vote_keypoints(const CorrespondenceFrame& frame, std::uint16_t id,
                                             const DetectionConfig& cfg) {
  std::vector<Eigen::Vector2i> pixels;
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      if (frame.class_mask(y, x) == id) pixels.emplace_back(x, y);

  std::vector<KeypointEstimate> out(static_cast<std::size_t>(frame.k()));
  if (pixels.size() < 2) return out;
  const auto n = pixels.size();
  const double cos_thr = cfg.inlier_cos_threshold;

  std::vector<Eigen::Vector2d> pos(n), dir(n);
  for (int j = 0; j < frame.k(); ++j) {
    const auto& vx = frame.vx[static_cast<std::size_t>(j)];
    const auto& vy = frame.vy[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = pixels[i].cast<double>();
      dir[i] = Eigen::Vector2d(vx(pixels[i].y(), pixels[i].x()), vy(pixels[i].y(), pixels[i].x()));
    }

    const auto count_votes = [&](const Eigen::Vector2d& h, std::vector<std::uint8_t>* inliers) {
      std::size_t votes = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d d = h - pos[i];
        const double len = d.norm();
        const double vlen = dir[i].norm();
        const bool in = len > 0.0 && vlen > 0.0 && dir[i].dot(d) >= cos_thr * len * vlen;
        votes += in ? 1 : 0;
        if (inliers) (*inliers)[i] = in ? 1 : 0;
      }
      return votes;
    };

    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(j), id));
    std::size_t best_votes = 0;
    Eigen::Vector2d best = Eigen::Vector2d::Zero();
    bool have = false;
    for (int hyp = 0; hyp < cfg.ransac_hypotheses; ++hyp) {
      const std::size_t a = rng.index(n);
      std::size_t b = rng.index(n - 1);
      if (b >= a) ++b;
      const Eigen::Vector2d& d1 = dir[a];
      const Eigen::Vector2d& d2 = dir[b];
      const double cross = d1.x() * d2.y() - d1.y() * d2.x();
      if (std::abs(cross) < 1e-3) continue;
      const Eigen::Vector2d w = pos[b] - pos[a];
      const double s = (w.x() * d2.y() - w.y() * d2.x()) / cross;
      const Eigen::Vector2d h = pos[a] + s * d1;
      const std::size_t votes = count_votes(h, nullptr);
      if (!have || votes > best_votes) {
        best_votes = votes;
        best = h;
        have = true;
      }
    }
    if (!have) continue;

    // Least-squares intersection of the winner's inlier rays.
    std::vector<std::uint8_t> inliers(n, 0);
    count_votes(best, &inliers);
    Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      if (!inliers[i]) continue;
      const Eigen::Vector2d u = dir[i].normalized();
      const Eigen::Matrix2d proj = Eigen::Matrix2d::Identity() - u * u.transpose();
      a += proj;
      rhs += proj * pos[i];
    }
    Eigen::Vector2d refined = best;
    if (best_votes >= 2 && std::abs(a.determinant()) > 1e-9 * a.squaredNorm()) refined = a.ldlt().solve(rhs);

    auto& est = out[static_cast<std::size_t>(j)];
    est.position = refined;
    est.votes = best_votes;
    est.inlier_ratio = static_cast<double>(best_votes) / static_cast<double>(n);
  }
  return out;
}

bool validate_detection(const Pose& pose, const std::vector<Eigen::Vector3d>& points_3d,
                        const std::vector<Eigen::Vector2d>& points_2d, const Intrinsics& intr,
                        const DetectionConfig& cfg) {
  if (points_3d.size() != points_2d.size()) throw Error("correspondence count mismatch");
  std::size_t good = 0;
  for (std::size_t i = 0; i < points_3d.size(); ++i) {
    const Eigen::Vector3d p = pose * points_3d[i];
    if (!(p.z() > 1e-9)) continue;
    if ((project<double>(p, intr) - points_2d[i]).norm() < cfg.max_reproj_px) ++good;
  }
  return good >= cfg.min_valid_points;
}

std::optional<Detection> detect(const CorrespondenceFrame& frame, std::uint16_t id,
                                const KeypointSet& keys, const Intrinsics& intr,
                                const DetectionConfig& cfg, const Eigen::Vector2d& offset) {
  if (static_cast<std::size_t>(frame.k()) != keys.size())
    throw Error("correspondence frame keypoint count does not match the object");
  Detection det;
  det.keypoints = vote_keypoints(frame, id, cfg);
  std::vector<Eigen::Vector3d> p3;
  std::vector<Eigen::Vector2d> p2;
  for (std::size_t j = 0; j < det.keypoints.size(); ++j) {
    auto& kp = det.keypoints[j];
    if (kp.votes < cfg.min_votes) continue;
    kp.position += offset;
    det.used.push_back(j);
    p3.push_back(keys.points[j]);
    p2.push_back(kp.position);
  }
  if (p3.size() < 4) return std::nullopt;
  try {
    det.pose = solve_pnp(p3, p2, intr);
  } catch (const Error&) {
    return std::nullopt;
  }
  det.valid = det.pose.translation.z() > 0 && validate_detection(det.pose, p3, p2, intr, cfg);
  return det;
}

CorrespondenceFrame synth_correspondences(const std::vector<CorrespondenceObject>& objects,
                                          const Intrinsics& intr, const CorrespondenceNoise& noise,
                                          const MaskImage* hidden,
                                          const std::vector<SceneObject>& occluders) {
  if (objects.empty()) throw Error("no objects to synthesize");
  const std::size_t k = objects.front().keys->size();
  std::vector<SceneObject> scene;
  int max_class = 0;
  for (const auto& o : objects) {
    if (o.keys->size() != k) throw Error("objects disagree on keypoint count");
    if (o.class_id == 0) throw Error("class id 0 is reserved for background");
    scene.push_back(SceneObject{o.mesh, o.pose, o.class_id});
    max_class = std::max<int>(max_class, o.class_id);
  }
  const auto first_occluder = static_cast<std::uint16_t>(max_class + 1);
  for (std::size_t i = 0; i < occluders.size(); ++i) {
    SceneObject occ = occluders[i];
    occ.id = static_cast<std::uint16_t>(first_occluder + i);
    scene.push_back(occ);
  }
  const RenderOutput rendered = render(scene, intr);

  // Keypoint projections per class.
  std::vector<std::vector<Eigen::Vector2d>> kp2d(static_cast<std::size_t>(max_class) + 1);
  for (const auto& o : objects) {
    auto& list = kp2d[o.class_id];
    list.clear();
    for (const auto& p : o.keys->points) list.push_back(project<double>(o.pose * p, intr));
  }

  CorrespondenceFrame f = CorrespondenceFrame::Empty(intr.width, intr.height, static_cast<int>(k),
                                                     max_class + 1);
  Rng rng(noise.seed);
  const double sigma = deg2rad(noise.noise_deg);
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const std::uint16_t id = rendered.object_id(y, x);
      if (id == 0 || id >= first_occluder) continue;
      if (hidden && (*hidden)(y, x)) continue;
      f.class_mask(y, x) = id;
      for (std::size_t j = 0; j < k; ++j) {
        const Eigen::Vector2d d = kp2d[id][j] - Eigen::Vector2d(x, y);
        double angle = d.norm() > 1e-9 ? std::atan2(d.y(), d.x()) : 0.0;
        // Draw both variates unconditionally so the stream layout does not depend on the rates.
        const double jitter = rng.normal();
        const double u_out = rng.uniform();
        const double u_dir = rng.uniform();
        angle += sigma * jitter;
        if (u_out < noise.outlier_rate) angle = 2.0 * std::numbers::pi * u_dir;
        f.vx[j](y, x) = static_cast<float>(std::cos(angle));
        f.vy[j](y, x) = static_cast<float>(std::sin(angle));
      }
    }
  }
  return f;
}

CorrespondenceFrame synth_correspondences(const Mesh& mesh, const KeypointSet& keys, const Pose& gt,
                                          const Intrinsics& intr, double noise_deg,
                                          double outlier_rate, std::uint64_t seed) {
  CorrespondenceFrame f = synth_correspondences({CorrespondenceObject{&mesh, &keys, gt, 1}}, intr,
                                                CorrespondenceNoise{noise_deg, outlier_rate, seed});
  if (!(f.class_mask != 0).any()) throw Error("object not visible");
  return f;
}

}  // namespace edgetrack
