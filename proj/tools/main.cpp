// edgetrack command-line tool: gen, detect, refine, track, eval, render-debug.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "edgetrack/dataset.hpp"
#include "edgetrack/metrics.hpp"
#include "edgetrack/rasterizer.hpp"

using namespace edgetrack;

namespace {

int run_gen(const std::string& script_path, const std::string& out_dir) {
  const fs::path script_file(script_path);
  const SceneScript script = parse_scene_script(read_file(script_file), script_file.parent_path());
  const RenderedSequence seq = render_sequence(script);
  write_dataset(out_dir, script, seq);
  std::fprintf(stderr, "wrote %d frames, %zu objects to %s\n", script.frames, script.objects.size(), out_dir.c_str());
  return 0;
}

int run_detect(const std::string& frame_path_s, const std::string& vff_path_s, const std::string& config_path,
               const std::string& scene_path) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  const fs::path scene_file(scene_path);
  const DatasetInfo info = parse_dataset_info(read_file(scene_file));
  const GrayImage img = read_pgm(frame_path_s);
  const CorrespondenceFrame corr = read_vff(vff_path_s);
  const Intrinsics& intr = info.intrinsics;
  if (img.cols() != intr.width || img.rows() != intr.height) throw Error("frame size does not match the intrinsics");

  std::cout << pose_log_header() << "\n";
  for (const auto& o : info.objects) {
    PoseLogRow row{0, o.id, std::nullopt, std::nullopt, "NotDetected", true};
    if (const auto det = detect(corr, o.id, o.keypoints, intr, cfg.tracker.detection)) {
      row.pose = det->pose;
      row.state = det->valid ? "Detected" : "Rejected";
      try {
        const Mesh mesh = load_mesh(scene_file.parent_path() / o.mesh);
        row.score = edge_score(score_pose(img, mesh, det->pose, intr, cfg.tracker.refine));
      } catch (const Error& e) {
        std::fprintf(stderr, "object %d: no edge score (%s)\n", o.id, e.what());
      }
    }
    std::cout << format_pose_log_row(row) << "\n";
  }
  return 0;
}

int run_refine(const std::string& frame, const std::string& mesh_path, const std::string& init_path,
               const std::string& config_path, const std::string& intrinsics_path, int object_id) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  const Intrinsics intr = parse_intrinsics_json(read_file(intrinsics_path));
  intr.Validate();
  const GrayImage img = read_pgm(frame);
  const Mesh mesh = load_mesh(mesh_path);
  const Pose init = parse_pose_json(read_file(init_path));
  const RefineResult r = refine_pose(img, mesh, init, intr, cfg.tracker.refine);
  const EdgeScore score = edge_score(r.stats);
  const bool accepted = score.e_edge < cfg.tracker.validation.e_init_threshold;
  std::cout << pose_log_header() << "\n"
            << format_pose_log_row(PoseLogRow{0, object_id, r.pose, score, accepted ? "Accepted" : "Rejected", false})
            << "\n";
  std::printf("# e_irls=%.9g e_dist=%.9g e_valid=%.9g e_edge=%.9g converged=%d\n", score.e_irls, score.e_dist,
              score.e_valid, score.e_edge, r.stats.converged ? 1 : 0);
  return 0;
}

int run_track(const std::string& dataset_dir, const std::string& config_path, const std::string& out_csv,
              const std::string& timings_csv) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  const Dataset ds = load_dataset(dataset_dir);
  TrackTimings timings;
  const std::vector<PoseLogRow> rows = track_dataset(ds, cfg, &timings);
  write_pose_log(out_csv, rows);
  if (!timings_csv.empty()) {
    std::string text = "frame,ms\n";
    for (std::size_t f = 0; f < timings.frame_ms.size(); ++f) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%zu,%.3f\n", f, timings.frame_ms[f]);
      text += buf;
    }
    write_file_atomic(timings_csv, text);
  }
  std::vector<double> sorted = timings.frame_ms;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  std::fprintf(stderr, "tracked %d frames, median %.1f ms per frame\n", ds.info.frames, median);
  return 0;
}

// Meshes named obj_<id>.obj or obj_<id>.msh.
std::map<int, Mesh> load_mesh_dir(const fs::path& dir) {
  std::map<int, Mesh> out;
  if (!fs::is_directory(dir)) throw Error(dir.string() + ": not a directory");
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string stem = entry.path().stem().string();
    const std::string ext = entry.path().extension().string();
    if (stem.rfind("obj_", 0) != 0 || (ext != ".obj" && ext != ".msh")) continue;
    try {
      out.emplace(std::stoi(stem.substr(4)), load_mesh(entry.path()));
    } catch (const std::invalid_argument&) {
      continue;
    }
  }
  if (out.empty()) throw Error(dir.string() + ": no obj_<id>.obj meshes");
  return out;
}

int run_eval(const std::string& est_csv, const std::string& gt_csv, const std::string& mesh_dir,
             const std::string& init_csv, std::string intrinsics_path) {
  if (intrinsics_path.empty()) intrinsics_path = (fs::path(mesh_dir).parent_path() / "scene.json").string();
  const Intrinsics intr = parse_intrinsics_json(read_file(intrinsics_path));
  const auto meshes = load_mesh_dir(mesh_dir);
  const auto est = read_pose_log(est_csv);
  const auto gt = read_pose_log(gt_csv);
  std::vector<PoseLogRow> init;
  if (!init_csv.empty()) init = read_pose_log(init_csv);
  const EvalSummary s = evaluate_logs(est, gt, meshes, intr, init_csv.empty() ? nullptr : &init);
  std::cout << format_eval_summary(s);
  return 0;
}

int run_render_debug(const std::string& dataset_dir, const std::string& poses_csv, const std::string& out_dir,
                     int max_frames) {
  const Dataset ds = load_dataset(dataset_dir);
  const auto meshes = meshes_by_id(ds);
  const auto rows = read_pose_log(poses_csv);
  const Intrinsics& intr = ds.info.intrinsics;
  fs::create_directories(out_dir);
  const int frames = max_frames > 0 ? std::min(max_frames, ds.info.frames) : ds.info.frames;
  for (int f = 0; f < frames; ++f) {
    GrayImage img = read_pgm(frame_path(ds.root, f));
    for (const auto& r : rows) {
      if (r.frame != f || !r.pose) continue;
      const auto m = meshes.find(r.object_id);
      if (m == meshes.end()) continue;
      const RenderOutput rendered = render(m->second, *r.pose, intr);
      // Valid poses in white, everything else in black.
      const float ink = r.state == "Valid" ? 1.0f : 0.0f;
      for (const auto& boundary : trace_boundaries(rendered.object_id == r.object_id))
        for (const auto& p : boundary) img(p.y(), p.x()) = ink;
    }
    char name[32];
    std::snprintf(name, sizeof name, "%06d.pgm", f);
    write_pgm(fs::path(out_dir) / name, img);
  }
  std::fprintf(stderr, "wrote %d overlay images to %s\n", frames, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-based 6D object pose refinement and tracking"};
  app.require_subcommand(1);
  std::string a, b, c, d, opt1, opt2;
  int id = 1, max_frames = 0;

  auto* gen = app.add_subcommand("gen", "Render a scripted synthetic dataset");
  gen->add_option("script", a, "Scene script (JSON)")->required();
  gen->add_option("out_dir", b, "Output dataset directory")->required();

  auto* det = app.add_subcommand("detect", "One-shot detection from a correspondence frame");
  det->add_option("frame", a, "Camera frame (PGM)")->required();
  det->add_option("vff", b, "Correspondence frame (VFF)")->required();
  det->add_option("config", c, "Pipeline config (JSON)")->required();
  det->add_option("--scene", opt1, "scene.json with intrinsics, objects and keypoints")->required();

  auto* ref = app.add_subcommand("refine", "Refine one pose on one frame");
  ref->add_option("frame", a, "Camera frame (PGM)")->required();
  ref->add_option("mesh", b, "Mesh (OBJ or MSH)")->required();
  ref->add_option("init_pose", c, "Initial pose (JSON)")->required();
  ref->add_option("config", d, "Pipeline config (JSON)")->required();
  ref->add_option("--intrinsics", opt1, "scene.json or intrinsics JSON")->required();
  ref->add_option("--id", id, "Object id written to the row");

  auto* trk = app.add_subcommand("track", "Track all objects of a dataset");
  trk->add_option("dataset", a, "Dataset directory")->required();
  trk->add_option("config", b, "Pipeline config (JSON)")->required();
  trk->add_option("out", c, "Pose log (CSV)")->required();
  trk->add_option("--timings", opt1, "Per-frame timing CSV");

  auto* ev = app.add_subcommand("eval", "Compare a pose log against ground truth");
  ev->add_option("est", a, "Estimated pose log")->required();
  ev->add_option("gt", b, "Ground-truth pose log")->required();
  ev->add_option("meshes", c, "Directory with obj_<id>.obj meshes")->required();
  ev->add_option("--init", opt1, "Initial pose log for the improvement rate");
  ev->add_option("--intrinsics", opt2, "scene.json or intrinsics JSON (default: <meshes>/../scene.json)");

  auto* dbg = app.add_subcommand("render-debug", "Draw projected contours over the camera frames");
  dbg->add_option("dataset", a, "Dataset directory")->required();
  dbg->add_option("poses", b, "Pose log")->required();
  dbg->add_option("out_dir", c, "Output directory for PGM overlays")->required();
  dbg->add_option("--frames", max_frames, "Limit the number of frames");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_gen(a, b);
    if (*det) return run_detect(a, b, c, opt1);
    if (*ref) return run_refine(a, b, c, d, opt1, id);
    if (*trk) return run_track(a, b, c, opt1);
    if (*ev) return run_eval(a, b, c, opt1, opt2);
    if (*dbg) return run_render_debug(a, b, c, max_frames);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
