#include "edgetrack/dataset.hpp"

#include <chrono>
#include <cstdio>

#include "edgetrack/metrics.hpp"

namespace edgetrack {

Dataset load_dataset(const fs::path& root) {
  Dataset d;
  d.root = root;
  d.info = parse_dataset_info(read_file(root / "scene.json"));
  d.info.intrinsics.Validate();
  if (d.info.frames < 1) throw Error("scene.json: frames must be >= 1");
  for (const auto& o : d.info.objects) d.meshes.push_back(load_mesh(root / o.mesh));
  return d;
}

std::map<int, Mesh> meshes_by_id(const Dataset& dataset) {
  std::map<int, Mesh> out;
  for (std::size_t i = 0; i < dataset.info.objects.size(); ++i)
    out.emplace(dataset.info.objects[i].id, dataset.meshes[i]);
  return out;
}

std::vector<PoseLogRow> track_dataset(const Dataset& dataset, const PipelineConfig& cfg, TrackTimings* timings) {
  cfg.tracker.Validate();
  const Intrinsics& intr = dataset.info.intrinsics;
  std::vector<ObjectTrack> tracks;
  for (std::size_t i = 0; i < dataset.info.objects.size(); ++i) {
    const DatasetObject& o = dataset.info.objects[i];
    if (o.keypoints.size() != cfg.keypoint_count)
      throw Error("object " + std::to_string(o.id) + " has " + std::to_string(o.keypoints.size()) +
                  " keypoints, config expects " + std::to_string(cfg.keypoint_count));
    ObjectTrack t;
    t.object_id = o.id;
    t.mesh = &dataset.meshes[i];
    t.keys = &o.keypoints;
    tracks.push_back(t);
  }

  std::vector<PoseLogRow> rows;
  for (int f = 0; f < dataset.info.frames; ++f) {
    const GrayImage img = read_pgm(frame_path(dataset.root, f));
    if (img.cols() != intr.width || img.rows() != intr.height)
      throw Error(frame_path(dataset.root, f).string() + ": size does not match the intrinsics");
    std::optional<CorrespondenceFrame> corr;
    if (dataset.info.correspondences) corr = read_vff(vff_path(dataset.root, f));
    const auto t0 = std::chrono::steady_clock::now();
    const FrameReport rep = process_frame(img, corr ? &*corr : nullptr, tracks, intr, cfg.tracker);
    if (timings)
      timings->frame_ms.push_back(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    for (const auto& o : rep.objects)
      rows.push_back(PoseLogRow{f, o.object_id, o.pose, o.score, o.state_after, o.detection_used});
  }
  return rows;
}

EvalSummary evaluate_logs(const std::vector<PoseLogRow>& est, const std::vector<PoseLogRow>& gt,
                          const std::map<int, Mesh>& meshes, const Intrinsics& intr,
                          const std::vector<PoseLogRow>* init) {
  using Key = std::pair<int, int>;
  const auto index = [](const std::vector<PoseLogRow>& rows) {
    std::map<Key, const PoseLogRow*> m;
    for (const auto& r : rows)
      if (!m.emplace(Key{r.frame, r.object_id}, &r).second)
        throw Error("duplicate row for frame " + std::to_string(r.frame) + ", object " +
                    std::to_string(r.object_id));
    return m;
  };
  const auto est_by_key = index(est);
  std::map<Key, const PoseLogRow*> init_by_key;
  if (init) init_by_key = index(*init);

  EvalSummary s;
  std::size_t pass = 0, below1 = 0, add_pass = 0, with_init = 0, improved = 0;
  double sum_px = 0.0, sum_rot = 0.0;
  for (const auto& g : gt) {
    if (!g.pose) continue;
    const auto mesh_it = meshes.find(g.object_id);
    if (mesh_it == meshes.end()) throw Error("no mesh for object " + std::to_string(g.object_id));
    const Mesh& mesh = mesh_it->second;
    ++s.rows;
    const auto e = est_by_key.find(Key{g.frame, g.object_id});
    const bool have = e != est_by_key.end() && e->second->pose.has_value();
    double err = 0.0;
    if (have) {
      ++s.estimated;
      const ProjectionMetric pm = projection_metric(*e->second->pose, *g.pose, mesh, intr);
      err = pm.mean_px;
      sum_px += err;
      if (pm.pass) ++pass;
      if (err < 1.0) ++below1;
      if (add_metric(*e->second->pose, *g.pose, mesh).pass) ++add_pass;
      sum_rot += rotation_error(*e->second->pose, *g.pose);
    }
    if (init) {
      const auto i = init_by_key.find(Key{g.frame, g.object_id});
      if (i != init_by_key.end() && i->second->pose) {
        ++with_init;
        if (have && err < projection_metric(*i->second->pose, *g.pose, mesh, intr).mean_px) ++improved;
      }
    }
  }
  if (s.rows > 0) {
    const auto n = static_cast<double>(s.rows);
    s.proj_pass_rate = static_cast<double>(pass) / n;
    s.proj_below_1px = static_cast<double>(below1) / n;
    s.add_pass_rate = static_cast<double>(add_pass) / n;
  }
  if (s.estimated > 0) {
    s.mean_proj_px = sum_px / static_cast<double>(s.estimated);
    s.mean_rot_deg = sum_rot / static_cast<double>(s.estimated);
  }
  if (init && with_init > 0) s.improvement_rate = static_cast<double>(improved) / static_cast<double>(with_init);
  return s;
}

std::string format_eval_summary(const EvalSummary& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "rows %zu\nestimated %zu\nproj_below_5px %.6f\nproj_below_1px %.6f\nmean_proj_px %.6f\n"
                "add_below_0.1d %.6f\nmean_rot_deg %.6f\n",
                s.rows, s.estimated, s.proj_pass_rate, s.proj_below_1px, s.mean_proj_px, s.add_pass_rate,
                s.mean_rot_deg);
  std::string out = buf;
  if (s.improvement_rate) {
    std::snprintf(buf, sizeof buf, "improvement_rate %.6f\n", *s.improvement_rate);
    out += buf;
  }
  return out;
}

}  // namespace edgetrack
