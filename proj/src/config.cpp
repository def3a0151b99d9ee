#include "edgetrack/config.hpp"

#include "edgetrack/dataset.hpp"

#include <cstdio>
#include <set>

#include "json.hpp"

namespace edgetrack {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw Error(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(where + "." + key + ": wrong type");
  }
}

Eigen::Vector3d vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw Error(where + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector2d vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw Error(where + ": expected 2 numbers");
  return {j[0].get<double>(), j[1].get<double>()};
}

Intrinsics parse_intrinsics(const json& j, const std::string& where) {
  check_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, where);
  for (const char* k : {"fx", "fy", "cx", "cy", "width", "height"})
    if (!j.contains(k)) throw Error(where + ": missing '" + k + "'");
  Intrinsics intr{j["fx"].get<double>(), j["fy"].get<double>(), j["cx"].get<double>(),
                  j["cy"].get<double>(), j["width"].get<int>(), j["height"].get<int>()};
  intr.Validate();
  return intr;
}

json dump_intrinsics(const Intrinsics& i) {
  return json{{"fx", i.fx}, {"fy", i.fy}, {"cx", i.cx}, {"cy", i.cy}, {"width", i.width}, {"height", i.height}};
}

Pose parse_pose(const json& j, const std::string& where) {
  check_keys(j, {"rotation", "axis_angle_deg", "translation"}, where);
  if (!j.contains("translation")) throw Error(where + ": missing 'translation'");
  if (j.contains("rotation") == j.contains("axis_angle_deg"))
    throw Error(where + ": give exactly one of 'rotation' and 'axis_angle_deg'");
  Pose p;
  p.translation = vec3(j["translation"], where + ".translation");
  if (j.contains("rotation")) {
    const json& r = j["rotation"];
    if (!r.is_array() || r.size() != 9) throw Error(where + ".rotation: expected 9 numbers");
    for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = r[static_cast<std::size_t>(i)].get<double>();
    if ((p.rotation * p.rotation.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-6 ||
        p.rotation.determinant() < 0)
      throw Error(where + ".rotation: not a rotation matrix");
    p.rotation = Orthonormalize<double>(p.rotation);
  } else {
    const Eigen::Vector3d aa = vec3(j["axis_angle_deg"], where + ".axis_angle_deg");
    p.rotation = ExpSO3<double>(aa * std::numbers::pi / 180.0);
  }
  return p;
}

std::vector<Pose> parse_trajectory(const json& j, int frames, const std::string& where) {
  check_keys(j, {"pose", "oscillate"}, where);
  if (!j.contains("pose")) throw Error(where + ": missing 'pose'");
  const Pose base = parse_pose(j["pose"], where + ".pose");
  if (!j.contains("oscillate")) return std::vector<Pose>(static_cast<std::size_t>(frames), base);
  const json& o = j["oscillate"];
  check_keys(o, {"rot_amplitude_deg", "trans_amplitude", "period"}, where + ".oscillate");
  double rot = 0, trans = 0, period = 60;
  read_opt(o, "rot_amplitude_deg", rot, where);
  read_opt(o, "trans_amplitude", trans, where);
  read_opt(o, "period", period, where);
  return oscillating_trajectory(base, frames, rot, trans, period);
}

}  // namespace

static PipelineConfig parse_pipeline_config_unchecked(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  check_keys(j, {"refine", "validation", "detection", "tracker", "keypoints"}, "config");
  PipelineConfig cfg;

  if (j.contains("tracker")) {
    const json& t = j["tracker"];
    check_keys(t, {"mode", "start_anchor", "patch_side", "parallel_objects"}, "config.tracker");
    std::string mode = "close";
    read_opt(t, "mode", mode, "config.tracker");
    if (mode == "far") {
      Eigen::Vector2d anchor = Eigen::Vector2d::Zero();
      if (t.contains("start_anchor")) anchor = vec2(t["start_anchor"], "config.tracker.start_anchor");
      int side = 0;
      read_opt(t, "patch_side", side, "config.tracker");
      cfg.tracker = TrackerConfig::FarRangeDefaults(anchor, side);
    } else if (mode == "close") {
      if (t.contains("start_anchor") || t.contains("patch_side"))
        throw Error("config.tracker: start_anchor/patch_side require mode 'far'");
    } else {
      throw Error("config.tracker.mode: expected 'close' or 'far'");
    }
    read_opt(t, "parallel_objects", cfg.tracker.parallel_objects, "config.tracker");
  }

  if (j.contains("refine")) {
    const json& r = j["refine"];
    const std::string w = "config.refine";
    check_keys(r, {"pyramid_levels", "iterations", "mode", "scanline_length", "t_e", "t_r", "t_min", "reps_s1",
                   "reps_s2", "reweights", "grid_cells", "box_radius", "contour_points", "kernel_orientations"},
               w);
    RefineConfig& c = cfg.tracker.refine;
    read_opt(r, "pyramid_levels", c.pyramid_levels, w);
    read_opt(r, "iterations", c.iterations, w);
    if (r.contains("mode")) c.mode = refine_mode_from_string(r["mode"].get<std::string>());
    read_opt(r, "scanline_length", c.scanline_length, w);
    read_opt(r, "t_e", c.t_e, w);
    read_opt(r, "t_r", c.t_r, w);
    read_opt(r, "t_min", c.t_min, w);
    read_opt(r, "reps_s1", c.reps_s1, w);
    read_opt(r, "reps_s2", c.reps_s2, w);
    read_opt(r, "reweights", c.reweights, w);
    read_opt(r, "grid_cells", c.grid_cells, w);
    read_opt(r, "box_radius", c.box_radius, w);
    read_opt(r, "contour_points", c.contour_points, w);
    read_opt(r, "kernel_orientations", c.kernel_orientations, w);
  }
  if (j.contains("validation")) {
    const json& v = j["validation"];
    const std::string w = "config.validation";
    check_keys(v, {"e_init", "e_max", "mean_factor_f", "ema_alpha", "candidate_max_frames"}, w);
    ValidationConfig& c = cfg.tracker.validation;
    read_opt(v, "e_init", c.e_init_threshold, w);
    read_opt(v, "e_max", c.e_max, w);
    read_opt(v, "mean_factor_f", c.mean_factor_f, w);
    read_opt(v, "ema_alpha", c.ema_alpha, w);
    read_opt(v, "candidate_max_frames", c.candidate_max_frames, w);
  }
  if (j.contains("detection")) {
    const json& d = j["detection"];
    const std::string w = "config.detection";
    check_keys(d, {"min_votes", "max_reproj_px", "min_valid_points", "ransac_hypotheses", "inlier_cos_threshold",
                   "seed"},
               w);
    DetectionConfig& c = cfg.tracker.detection;
    read_opt(d, "min_votes", c.min_votes, w);
    read_opt(d, "max_reproj_px", c.max_reproj_px, w);
    read_opt(d, "min_valid_points", c.min_valid_points, w);
    read_opt(d, "ransac_hypotheses", c.ransac_hypotheses, w);
    read_opt(d, "inlier_cos_threshold", c.inlier_cos_threshold, w);
    read_opt(d, "seed", c.seed, w);
  }
  read_opt(j, "keypoints", cfg.keypoint_count, "config");
  if (cfg.keypoint_count < 4) throw Error("config.keypoints must be >= 4");
  cfg.tracker.Validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  try {
    return parse_pipeline_config(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string dump_pipeline_config(const PipelineConfig& cfg) {
  const RefineConfig& r = cfg.tracker.refine;
  const ValidationConfig& v = cfg.tracker.validation;
  const DetectionConfig& d = cfg.tracker.detection;
  json j;
  j["refine"] = {{"pyramid_levels", r.pyramid_levels}, {"iterations", r.iterations},
                 {"mode", to_string(r.mode)}, {"scanline_length", r.scanline_length},
                 {"t_e", r.t_e}, {"t_r", r.t_r}, {"t_min", r.t_min}, {"reps_s1", r.reps_s1},
                 {"reps_s2", r.reps_s2}, {"reweights", r.reweights}, {"grid_cells", r.grid_cells},
                 {"box_radius", r.box_radius}, {"contour_points", r.contour_points},
                 {"kernel_orientations", r.kernel_orientations}};
  j["validation"] = {{"e_init", v.e_init_threshold}, {"e_max", v.e_max}, {"mean_factor_f", v.mean_factor_f},
                     {"ema_alpha", v.ema_alpha}, {"candidate_max_frames", v.candidate_max_frames}};
  j["detection"] = {{"min_votes", d.min_votes}, {"max_reproj_px", d.max_reproj_px},
                    {"min_valid_points", d.min_valid_points}, {"ransac_hypotheses", d.ransac_hypotheses},
                    {"inlier_cos_threshold", d.inlier_cos_threshold}, {"seed", d.seed}};
  json t = {{"parallel_objects", cfg.tracker.parallel_objects}};
  if (const auto* far = std::get_if<FarRange>(&cfg.tracker.mode)) {
    t["mode"] = "far";
    t["start_anchor"] = {far->start_anchor.x(), far->start_anchor.y()};
    t["patch_side"] = far->patch_side;
  } else {
    t["mode"] = "close";
  }
  j["tracker"] = t;
  j["keypoints"] = cfg.keypoint_count;
  return j.dump(2) + "\n";
}

static DatasetInfo parse_dataset_info_unchecked(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("scene.json: ") + e.what());
  }
  check_keys(j, {"intrinsics", "frames", "correspondences", "objects"}, "scene");
  DatasetInfo info;
  if (!j.contains("intrinsics") || !j.contains("frames") || !j.contains("objects"))
    throw Error("scene: missing intrinsics, frames or objects");
  info.intrinsics = parse_intrinsics(j["intrinsics"], "scene.intrinsics");
  info.frames = j["frames"].get<int>();
  read_opt(j, "correspondences", info.correspondences, "scene");
  for (std::size_t i = 0; i < j["objects"].size(); ++i) {
    const json& o = j["objects"][i];
    const std::string w = "scene.objects[" + std::to_string(i) + "]";
    check_keys(o, {"id", "mesh", "keypoints"}, w);
    DatasetObject obj;
    obj.id = o.at("id").get<std::uint16_t>();
    obj.mesh = o.at("mesh").get<std::string>();
    for (const auto& p : o.at("keypoints")) obj.keypoints.points.push_back(vec3(p, w + ".keypoints"));
    if (obj.keypoints.size() < 4) throw Error(w + ": need at least 4 keypoints");
    info.objects.push_back(std::move(obj));
  }
  return info;
}

std::string dump_dataset_info(const DatasetInfo& info) {
  json j;
  j["intrinsics"] = dump_intrinsics(info.intrinsics);
  j["frames"] = info.frames;
  j["correspondences"] = info.correspondences;
  j["objects"] = json::array();
  for (const auto& o : info.objects) {
    json kp = json::array();
    for (const auto& p : o.keypoints.points) kp.push_back({p.x(), p.y(), p.z()});
    j["objects"].push_back({{"id", o.id}, {"mesh", o.mesh}, {"keypoints", kp}});
  }
  return j.dump(2) + "\n";
}

fs::path frame_path(const fs::path& root, int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.pgm", frame);
  return root / "frames" / buf;
}

fs::path vff_path(const fs::path& root, int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.vff", frame);
  return root / "vff" / buf;
}

static SceneScript parse_scene_script_unchecked(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("script: ") + e.what());
  }
  check_keys(j, {"seed", "frames", "intrinsics", "noise_sigma", "background", "gain", "offset", "family",
                 "meshes", "objects", "distractors", "overlays", "correspondences", "keypoints"},
             "script");
  SceneScript s;
  read_opt(j, "seed", s.seed, "script");
  read_opt(j, "frames", s.frames, "script");
  if (!j.contains("intrinsics")) throw Error("script: missing intrinsics");
  s.intrinsics = parse_intrinsics(j["intrinsics"], "script.intrinsics");
  read_opt(j, "noise_sigma", s.noise_sigma, "script");
  read_opt(j, "gain", s.gain, "script");
  read_opt(j, "offset", s.offset, "script");

  if (j.contains("background")) {
    const json& b = j["background"];
    check_keys(b, {"mode", "level", "contrast", "noise_cell"}, "script.background");
    std::string mode = "value_noise";
    read_opt(b, "mode", mode, "script.background");
    if (mode == "constant") s.background.mode = Background::Constant;
    else if (mode == "gradient") s.background.mode = Background::Gradient;
    else if (mode == "value_noise") s.background.mode = Background::ValueNoise;
    else throw Error("script.background.mode: expected constant, gradient or value_noise");
    read_opt(b, "level", s.background.level, "script.background");
    read_opt(b, "contrast", s.background.contrast, "script.background");
    read_opt(b, "noise_cell", s.background.noise_cell, "script.background");
  }

  if (j.contains("family")) {
    const json& f = j["family"];
    const std::string w = "script.family";
    check_keys(f, {"n", "seed", "body_size", "stub_width", "stub_length", "stub_sites"}, w);
    FamilyParams fp;
    int n = 4;
    std::uint64_t seed = 0;
    read_opt(f, "n", n, w);
    read_opt(f, "seed", seed, w);
    if (f.contains("body_size")) fp.body_size = vec3(f["body_size"], w + ".body_size");
    read_opt(f, "stub_width", fp.stub_width, w);
    read_opt(f, "stub_length", fp.stub_length, w);
    read_opt(f, "stub_sites", fp.stub_sites, w);
    for (auto& m : generate_family(fp, n, seed)) s.meshes.push_back(std::move(m));
  }
  if (j.contains("meshes")) {
    for (std::size_t i = 0; i < j["meshes"].size(); ++i) {
      const json& m = j["meshes"][i];
      const std::string w = "script.meshes[" + std::to_string(i) + "]";
      check_keys(m, {"box", "obj"}, w);
      if (m.contains("box") == m.contains("obj")) throw Error(w + ": give exactly one of 'box' and 'obj'");
      if (m.contains("box"))
        s.meshes.push_back(make_box(vec3(m["box"], w + ".box"), 2));
      else
        s.meshes.push_back(load_mesh(base_dir / m["obj"].get<std::string>()));
    }
  }

  std::size_t k = 9;
  read_opt(j, "keypoints", k, "script");
  for (const auto& m : s.meshes) s.keypoints.push_back(farthest_point_sample(m, k));

  const auto mesh_index = [&](const json& o, const std::string& w) {
    const auto idx = o.at("mesh").get<std::size_t>();
    if (idx >= s.meshes.size()) throw Error(w + ": mesh index out of range");
    return idx;
  };
  if (j.contains("objects")) {
    for (std::size_t i = 0; i < j["objects"].size(); ++i) {
      const json& o = j["objects"][i];
      const std::string w = "script.objects[" + std::to_string(i) + "]";
      check_keys(o, {"id", "mesh", "trajectory"}, w);
      ScriptedObject so;
      so.id = o.at("id").get<std::uint16_t>();
      so.mesh_index = mesh_index(o, w);
      so.trajectory = parse_trajectory(o.at("trajectory"), s.frames, w + ".trajectory");
      s.objects.push_back(std::move(so));
    }
  }
  if (j.contains("distractors")) {
    for (std::size_t i = 0; i < j["distractors"].size(); ++i) {
      const json& o = j["distractors"][i];
      const std::string w = "script.distractors[" + std::to_string(i) + "]";
      check_keys(o, {"mesh", "trajectory"}, w);
      DistractorObject d;
      d.mesh_index = mesh_index(o, w);
      d.trajectory = parse_trajectory(o.at("trajectory"), s.frames, w + ".trajectory");
      s.distractors.push_back(std::move(d));
    }
  }
  if (j.contains("overlays")) {
    for (std::size_t i = 0; i < j["overlays"].size(); ++i) {
      const json& o = j["overlays"][i];
      const std::string w = "script.overlays[" + std::to_string(i) + "]";
      check_keys(o, {"first_frame", "last_frame", "min", "max", "intensity"}, w);
      OverlayOccluder ov;
      ov.first_frame = o.at("first_frame").get<int>();
      ov.last_frame = o.at("last_frame").get<int>();
      ov.min_corner = vec2(o.at("min"), w + ".min").cast<int>();
      ov.max_corner = vec2(o.at("max"), w + ".max").cast<int>();
      read_opt(o, "intensity", ov.intensity, w);
      s.overlays.push_back(ov);
    }
  }
  if (j.contains("correspondences")) {
    const json& c = j["correspondences"];
    check_keys(c, {"enabled", "noise_deg", "outlier_rate", "seed"}, "script.correspondences");
    s.correspondences = true;
    read_opt(c, "enabled", s.correspondences, "script.correspondences");
    read_opt(c, "noise_deg", s.correspondence_noise.noise_deg, "script.correspondences");
    read_opt(c, "outlier_rate", s.correspondence_noise.outlier_rate, "script.correspondences");
    read_opt(c, "seed", s.correspondence_noise.seed, "script.correspondences");
  }
  s.Validate();
  return s;
}

void write_dataset(const fs::path& out_dir, const SceneScript& script, const RenderedSequence& seq) {
  fs::create_directories(out_dir / "frames");
  fs::create_directories(out_dir / "meshes");
  if (!seq.correspondences.empty()) fs::create_directories(out_dir / "vff");
  DatasetInfo info;
  info.intrinsics = script.intrinsics;
  info.frames = script.frames;
  info.correspondences = !seq.correspondences.empty();
  for (const auto& o : script.objects) {
    const std::string rel = "meshes/obj_" + std::to_string(o.id) + ".obj";
    save_mesh(out_dir / rel, script.meshes[o.mesh_index]);
    info.objects.push_back(DatasetObject{o.id, rel, script.keypoints[o.mesh_index]});
  }
  std::vector<PoseLogRow> gt;
  for (int f = 0; f < script.frames; ++f) {
    const auto fi = static_cast<std::size_t>(f);
    write_pgm(frame_path(out_dir, f), seq.frames[fi]);
    if (!seq.correspondences.empty()) write_vff(vff_path(out_dir, f), seq.correspondences[fi]);
    for (std::size_t i = 0; i < script.objects.size(); ++i)
      gt.push_back(PoseLogRow{f, script.objects[i].id, seq.gt[fi][i], std::nullopt, "GT", false});
  }
  write_pose_log(out_dir / "gt.csv", gt);
  write_file_atomic(out_dir / "scene.json", dump_dataset_info(info));
}

Pose parse_pose_json(const std::string& json_text) {
  try {
    return parse_pose(json::parse(json_text), "pose");
  } catch (const json::exception& e) {
    throw Error(std::string("pose: ") + e.what());
  }
}

// Type mismatches deep inside a document surface as json exceptions; report them uniformly.
PipelineConfig parse_pipeline_config(const std::string& json_text) {
  try {
    return parse_pipeline_config_unchecked(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
}

DatasetInfo parse_dataset_info(const std::string& json_text) {
  try {
    return parse_dataset_info_unchecked(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("scene.json: ") + e.what());
  }
}

SceneScript parse_scene_script(const std::string& json_text, const fs::path& base_dir) {
  try {
    return parse_scene_script_unchecked(json_text, base_dir);
  } catch (const json::exception& e) {
    throw Error(std::string("script: ") + e.what());
  }
}

Intrinsics parse_intrinsics_json(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    if (j.is_object() && j.contains("intrinsics")) return parse_intrinsics(j["intrinsics"], "intrinsics");
    return parse_intrinsics(j, "intrinsics");
  } catch (const json::exception& e) {
    throw Error(std::string("intrinsics: ") + e.what());
  }
}

}  // namespace edgetrack
