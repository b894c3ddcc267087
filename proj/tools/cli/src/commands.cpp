#include "rtk/cli/commands.hpp"

#include "rtk/cli/plot.hpp"
#include "rtk/error.hpp"
#include "rtk/image.hpp"
#include "rtk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>
#include <set>
#include <sstream>

namespace rtk::cli {

namespace fs = std::filesystem;

namespace {

class Inputs {
 public:
  fs::path use(const fs::path& p) {
    if (std::find(paths_.begin(), paths_.end(), p) == paths_.end()) {
      paths_.push_back(p);
    }
    return p;
  }
  std::vector<fs::path> release() {
    return std::move(paths_);
  }

 private:
  std::vector<fs::path> paths_;
};

std::optional<std::string> opt_string(const Json& params, const char* key) {
  const auto it = params.find(key);
  if (it == params.end() || it->is_null()) {
    return std::nullopt;
  }
  if (!it->is_string()) {
    throw InputError(std::string("parameter '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::string req_string(const Json& params, const char* key) {
  auto v = opt_string(params, key);
  if (!v) {
    throw InputError(std::string("missing required input '") + key + "'");
  }
  return *v;
}

OutputFile json_file(std::string name, Json value) {
  return {std::move(name), [value = std::move(value)](const fs::path& p) { write_json(p, value); }};
}

OutputFile text_file(std::string name, std::string text) {
  return {std::move(name), [text = std::move(text)](const fs::path& p) { write_text(p, text); }};
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

Skeleton load_skeleton_ref(const std::string& ref, Inputs& inputs) {
  if (ref != "default") {
    inputs.use(ref);
  }
  return load_skeleton(ref);
}

MotionFile load_motion_input(const Json& params, const char* key, Inputs& inputs) {
  return load_motion(inputs.use(req_string(params, key)));
}

Skeleton skeleton_for(const Json& params, const MotionFile& motion, Inputs& inputs) {
  return load_skeleton_ref(opt_string(params, "skeleton").value_or(motion.skeleton_ref), inputs);
}

std::optional<Camera> load_camera(const Json& params, Inputs& inputs) {
  const auto path = opt_string(params, "camera");
  if (!path) {
    return std::nullopt;
  }
  const Json j = read_json(inputs.use(*path));
  try {
    return camera_from_json(j);
  } catch (const InputError& e) {
    throw InputError(*path + ": " + e.what());
  }
}

// A constraint file is either a bare list or {constraints: [...], camera?}.
ConstraintSet load_constraints(const Json& params, const Skeleton& skel, Inputs& inputs) {
  ConstraintSet set;
  if (const auto path = opt_string(params, "constraints")) {
    const Json j = read_json(inputs.use(*path));
    try {
      if (j.is_object()) {
        for (const auto& item : j.items()) {
          if (item.key() != "constraints" && item.key() != "camera") {
            throw InputError("unknown key '" + item.key() + "'");
          }
        }
        set.constraints = constraints_from_json(j.value("constraints", Json::array()), skel);
        if (j.contains("camera")) {
          set.camera = camera_from_json(j["camera"]);
        }
      } else {
        set.constraints = constraints_from_json(j, skel);
      }
    } catch (const InputError& e) {
      throw InputError(*path + ": " + e.what());
    }
  }
  if (auto cam = load_camera(params, inputs)) {
    set.camera = std::move(cam);
  }
  return set;
}

Json constraint_file_json(const ConstraintSet& set, const Skeleton& skel) {
  Json j = {{"constraints", constraints_to_json(set.constraints, skel)}};
  if (set.camera) {
    j["camera"] = to_json(*set.camera);
  }
  return j;
}

std::vector<Frame> load_frames(const fs::path& dir, Inputs& inputs) {
  if (!fs::is_directory(dir)) {
    throw InputError(dir.string() + ": not a directory of frames");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".ppm")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw InputError(dir.string() + ": no .png/.pgm/.ppm frames found");
  }
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const fs::path& f : files) {
    frames.push_back(read_frame(inputs.use(f)));
  }
  return frames;
}

Json residual_summary(const Skeleton& skel, const ShapeParams& beta, const Motion& motion,
                      const ConstraintSet& set) {
  Json entries = Json::array();
  double max3d = 0.0;
  double max2d = 0.0;
  for (const ConstraintResidual& r : constraint_residuals(skel, beta, motion, set)) {
    const bool p3d = r.kind == ConstraintKind::Position3D;
    (p3d ? max3d : max2d) = std::max(p3d ? max3d : max2d, r.residual);
    entries.push_back({{"frame", r.frame},
                       {"joint", skel.joint_label(r.joint)},
                       {"kind", p3d ? "p3d" : "p2d"},
                       {"residual", r.residual},
                       {"unit", p3d ? "m" : "px"}});
  }
  Json out = {{"max_3d_m", max3d}, {"max_2d_px", max2d}, {"constraints", entries}};
  out["mean_end_effector_px"] = set.camera ? Json(end_effector_error(motion, skel, beta, set)) : Json();
  return out;
}

ShapeParams target_beta(const Json& params, Inputs& inputs) {
  if (const auto it = params.find("target_beta"); it != params.end() && !it->is_null()) {
    return shape_from_json(*it, "target_beta");
  }
  const auto path = opt_string(params, "target");
  if (!path) {
    throw InputError("retarget needs a target shape (--target-beta or --target)");
  }
  const Json j = read_json(inputs.use(*path));
  if (j.is_array()) {
    return shape_from_json(j, *path);
  }
  if (j.is_object() && j.contains("header")) {
    return motion_from_json(j).beta;
  }
  if (j.is_object() && j.contains("beta")) {
    return shape_from_json(j["beta"], *path + ".beta");
  }
  throw InputError(*path + ": expected a beta list, {beta: [...]} or a motion file");
}

RunResult run_reconstruct(const Request& req) {
  Inputs inputs;
  const MotionFile in = load_motion_input(req.params, "motion", inputs);
  const Skeleton skel = skeleton_for(req.params, in, inputs);
  const ReconstructConfig cfg = reconstruct_config_from_json(req.config);
  const ReconstructResult res = reconstruct_motion(in.motion, skel, in.frame_betas, in.beta, cfg);

  Json outliers = Json::array();
  for (const OutlierEntry& o : res.outliers) {
    outliers.push_back({{"frame", o.frame}, {"joint", skel.joint_label(o.joint)}, {"residual_m", o.residual}});
  }
  const double cost_change =
      res.cost_before > 0.0 ? std::abs(res.cost_after - res.cost_before) / res.cost_before : 0.0;
  Json report = {
      {"frames", in.motion.size()},
      {"fps", in.motion.fps},
      {"spline_lambda", cfg.spline.resolve_lambda(in.motion.fps)},
      {"outlier_count", res.outliers.size()},
      {"outliers", outliers},
      {"robust_rounds", res.robust_rounds},
      {"cost_before", res.cost_before},
      {"cost_after", res.cost_after},
      {"relative_cost_change", cost_change},
      {"relative_motion_change", res.relative_motion_change},
      {"beta", to_json(res.beta)},
  };

  RunResult out;
  out.files.push_back(json_file("motion.json", to_json(MotionFile{res.motion, res.beta, in.skeleton_ref, {}})));
  out.files.push_back(json_file("report.json", report));
  out.summary = std::to_string(res.outliers.size()) + " outliers, relative motion change " +
                fmt("%.3g", res.relative_motion_change);
  out.inputs = inputs.release();
  return out;
}

RunResult run_retarget(const Request& req) {
  Inputs inputs;
  const MotionFile in = load_motion_input(req.params, "motion", inputs);
  const Skeleton skel = skeleton_for(req.params, in, inputs);
  const ShapeParams beta_t = target_beta(req.params, inputs);
  const ConstraintSet set = load_constraints(req.params, skel, inputs);
  set.validate(skel, in.motion.size());
  const RetargetConfig cfg = retarget_config_from_json(req.config);
  cfg.validate();

  const RetargetResult res = retarget_motion(skel, in.motion, in.beta, beta_t, set, cfg);
  const Motion direct = direct_transfer(in.motion);

  std::ostringstream trace;
  trace << "window,first_frame,last_frame,iteration,loss\n";
  Json windows = Json::array();
  for (std::size_t w = 0; w < res.windows.size(); ++w) {
    const WindowReport& r = res.windows[w];
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
      trace << w << ',' << r.range.first << ',' << r.range.last << ',' << i << ',' << fmt("%.12g", r.loss_trace[i])
            << '\n';
    }
    windows.push_back({{"first_frame", r.range.first},
                       {"last_frame", r.range.last},
                       {"initial_loss", r.initial_loss},
                       {"final_loss", r.final_loss}});
  }
  Json residuals = residual_summary(skel, beta_t, res.motion, set);
  Json direct_res = residual_summary(skel, beta_t, direct, set);
  Json summary = {
      {"retargeted", residuals},
      {"direct_transfer",
       {{"max_3d_m", direct_res["max_3d_m"]},
        {"max_2d_px", direct_res["max_2d_px"]},
        {"mean_end_effector_px", direct_res["mean_end_effector_px"]}}},
      {"windows", windows},
  };

  RunResult out;
  out.files.push_back(json_file("motion.json", to_json(MotionFile{res.motion, beta_t, in.skeleton_ref, {}})));
  out.files.push_back(json_file("direct.json", to_json(MotionFile{direct, beta_t, in.skeleton_ref, {}})));
  out.files.push_back(text_file("loss_trace.csv", trace.str()));
  out.files.push_back(json_file("residuals.json", summary));
  out.summary = std::to_string(set.constraints.size()) + " constraints, max residual " +
                fmt("%.3g", residuals["max_3d_m"].get<double>()) + " m / " +
                fmt("%.3g", residuals["max_2d_px"].get<double>()) + " px";
  out.inputs = inputs.release();
  return out;
}

RunResult run_deform(const Request& req) {
  Inputs inputs;
  const fs::path mesh_path = inputs.use(req_string(req.params, "mesh"));
  const fs::path labels_path = inputs.use(req_string(req.params, "labels"));
  const LabeledMesh mesh = read_labeled_mesh(mesh_path, labels_path);
  const LabelImage image = load_label_image(inputs.use(req_string(req.params, "label_image")));
  const auto camera = load_camera(req.params, inputs);
  if (!camera) {
    throw InputError("deform needs --camera");
  }
  const DeformOptions opts = deform_options_from_json(req.config);
  opts.arap.validate();

  const auto contours = extract_contours(image, opts.contour_stride);
  const ControlMatch match = match_control_points(mesh, *camera, contours);
  ArapResult res = arap_solve(mesh, match.controls, opts.arap);

  double max_disp = 0.0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    max_disp = std::max(max_disp, (res.mesh.vertices[i] - mesh.vertices[i]).norm());
  }
  std::ostringstream energy;
  energy << "iteration,energy,arap_energy\n";
  for (std::size_t i = 0; i < res.energy_trace.size(); ++i) {
    energy << i << ',' << fmt("%.12g", res.energy_trace[i]) << ',' << fmt("%.12g", res.arap_trace[i]) << '\n';
  }
  Json report = {
      {"vertices", mesh.vertices.size()},
      {"triangles", mesh.triangles.size()},
      {"contour_points", contours.size()},
      {"controls", match.controls.size()},
      {"skipped_contour_points", match.skipped},
      {"iterations", res.iterations},
      {"initial_energy", res.energy_trace.empty() ? 0.0 : res.energy_trace.front()},
      {"final_energy", res.energy_trace.empty() ? 0.0 : res.energy_trace.back()},
      {"max_displacement_m", max_disp},
  };

  RunResult out;
  auto deformed = std::make_shared<LabeledMesh>(std::move(res.mesh));
  out.files.push_back({"mesh.obj", [deformed](const fs::path& p) { write_obj(*deformed, p); }});
  out.files.push_back({"labels.txt", [deformed](const fs::path& p) { write_labels(*deformed, p); }});
  out.files.push_back(text_file("energy.csv", energy.str()));
  out.files.push_back(json_file("report.json", report));
  out.summary = std::to_string(match.controls.size()) + " control points, " + std::to_string(res.iterations) +
                " iterations, max displacement " + fmt("%.3g", max_disp) + " m";
  out.inputs = inputs.release();
  return out;
}

RunResult run_eval(const Request& req) {
  Inputs inputs;
  const EvalOptions opts = eval_options_from_json(req.config);
  EvalReport report;
  const auto pred_dir = opt_string(req.params, "pred_frames");
  const auto ref_dir = opt_string(req.params, "ref_frames");
  const auto motion_path = opt_string(req.params, "motion");
  if (pred_dir.has_value() != ref_dir.has_value()) {
    throw InputError("eval needs both --pred-frames and --ref-frames");
  }
  if (!pred_dir && !motion_path) {
    throw InputError("eval needs frames (--pred-frames/--ref-frames) or a motion with constraints");
  }
  if (pred_dir) {
    const std::vector<Frame> pred = load_frames(*pred_dir, inputs);
    const std::vector<Frame> ref = load_frames(*ref_dir, inputs);
    report.window = opts.window.value_or(acceptance_window(pred.size(), ref.size()));
    const auto m = windowed_score(pred, ref, FrameMetric::Mse, report.window, opts.per_channel);
    const auto s = windowed_score(pred, ref, FrameMetric::Ssim, report.window, opts.per_channel);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      report.frames.push_back({k, m[k], s[k]});
    }
    report.metadata["pred_frames"] = std::to_string(pred.size());
    report.metadata["ref_frames"] = std::to_string(ref.size());
    report.metadata["ssim_mode"] = opts.per_channel ? "per_channel" : "luma";
  }
  if (motion_path) {
    const MotionFile mf = load_motion_input(req.params, "motion", inputs);
    const Skeleton skel = skeleton_for(req.params, mf, inputs);
    const ConstraintSet set = load_constraints(req.params, skel, inputs);
    if (set.constraints.empty()) {
      throw InputError("end-effector evaluation needs --constraints");
    }
    if (!set.camera) {
      throw InputError("end-effector evaluation needs a camera");
    }
    set.validate(skel, mf.motion.size());
    report.end_effector = end_effector_errors(mf.motion, skel, mf.beta, set);
  }

  RunResult out;
  out.files.push_back(json_file("report.json", report.to_json()));
  if (!report.frames.empty()) {
    out.files.push_back(text_file("frames.csv", report.frames_csv()));
  }
  std::ostringstream summary;
  if (const auto v = report.mean_mse()) {
    summary << "MSE " << fmt("%.4g", *v) << " SSIM " << fmt("%.4f", *report.mean_ssim()) << " (window "
            << report.window << ")";
  }
  if (const auto v = report.mean_end_effector_error()) {
    summary << (summary.tellp() > 0 ? ", " : "") << "end-effector error " << fmt("%.3f", *v) << " px";
  }
  out.summary = summary.str();
  out.inputs = inputs.release();
  return out;
}

int joint_from_param(const std::string& text, const Skeleton& skel) {
  if (auto idx = skel.find_joint(text)) {
    return *idx;
  }
  if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const int v = std::stoi(text);
    if (v < kJointCount) {
      return v;
    }
  }
  throw InputError("unknown joint '" + text + "'");
}

RunResult run_plot(const Request& req) {
  Inputs inputs;
  const MotionFile source = load_motion_input(req.params, "source", inputs);
  const Skeleton skel = skeleton_for(req.params, source, inputs);
  std::vector<MotionFile> extra;
  std::vector<std::string> names;
  for (const char* key : {"naive", "constrained"}) {
    if (opt_string(req.params, key)) {
      extra.push_back(load_motion_input(req.params, key, inputs));
      names.emplace_back(key);
    }
  }
  std::vector<PlotInput> series{{"source", &source.motion, source.beta}};
  for (std::size_t i = 0; i < extra.size(); ++i) {
    series.push_back({names[i], &extra[i].motion, extra[i].beta});
  }
  const ConstraintSet set = load_constraints(req.params, skel, inputs);
  const int joint = joint_from_param(req_string(req.params, "joint"), skel);
  const int axis = parse_axis(opt_string(req.params, "axis").value_or("y"));
  const TrajectoryPlot plot = trajectory_plot(skel, series, joint, axis, set);

  RunResult out;
  out.files.push_back(text_file("trajectory.csv", plot_csv(plot)));
  out.files.push_back(text_file("trajectory.svg", plot_svg(plot)));
  out.summary = std::to_string(plot.series.size()) + " trajectories of " + plot.joint_name;
  out.inputs = inputs.release();
  return out;
}

Json motion_json(const Motion& m, const ShapeParams& beta) {
  return to_json(MotionFile{m, beta, "default", {}});
}

RunResult run_synth(const Request& req) {
  ScenarioSpec spec = scenario_from_json(req.config);
  spec.seed = req.seed;
  spec.validate();
  const Skeleton skel = default_skeleton();
  const Scenario sc = generate(skel, spec);

  Json spikes = Json::array();
  for (const InjectedSpike& s : sc.spikes) {
    spikes.push_back({{"frame", s.frame},
                      {"angle_joint", skel.joint_label(s.angle_joint)},
                      {"leaf_joint", skel.joint_label(s.leaf_joint)}});
  }
  RunResult out;
  out.files.push_back(json_file("source.json", motion_json(sc.source, spec.source)));
  out.files.push_back(json_file("clean_source.json", motion_json(sc.clean_source, spec.source)));
  out.files.push_back(json_file("target.json", motion_json(sc.target, spec.target)));
  out.files.push_back(json_file("constraints.json", constraint_file_json(sc.constraints, skel)));
  out.files.push_back(json_file("camera.json", to_json(*sc.constraints.camera)));
  out.files.push_back(json_file("spikes.json", spikes));
  out.summary = spec.motion + ": " + std::to_string(sc.source.size()) + " frames, " +
                std::to_string(sc.constraints.constraints.size()) + " constraints, " +
                std::to_string(sc.spikes.size()) + " spikes";
  return out;
}

const std::set<std::string>& configured_commands() {
  static const std::set<std::string> names{"reconstruct", "retarget", "deform", "eval", "synth"};
  return names;
}

} // namespace

std::vector<std::string> command_names() {
  return {"reconstruct", "retarget", "deform", "eval", "plot", "synth"};
}

Json resolve_config(const std::string& command, const Json& file_section, const Json& overrides) {
  const Json& base = file_section.is_null() ? Json::object() : file_section;
  if (command == "reconstruct") {
    return to_json(reconstruct_config_from_json(overrides, reconstruct_config_from_json(base)));
  }
  if (command == "retarget") {
    const RetargetConfig c = retarget_config_from_json(overrides, retarget_config_from_json(base));
    c.validate();
    return to_json(c);
  }
  if (command == "deform") {
    const DeformOptions c = deform_options_from_json(overrides, deform_options_from_json(base));
    c.arap.validate();
    return to_json(c);
  }
  if (command == "eval") {
    return to_json(eval_options_from_json(overrides, eval_options_from_json(base)));
  }
  if (command == "synth") {
    return to_json(scenario_from_json(overrides, scenario_from_json(base)));
  }
  const auto names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw InputError("unknown command '" + command + "'");
  }
  if (!base.empty() || !overrides.empty()) {
    throw InputError("command '" + command + "' takes no configuration");
  }
  return Json::object();
}

RunResult execute(const Request& req) {
  if (configured_commands().count(req.command) == 0 && req.command != "plot") {
    throw InputError("unknown command '" + req.command + "'");
  }
  if (req.command == "reconstruct") {
    return run_reconstruct(req);
  }
  if (req.command == "retarget") {
    return run_retarget(req);
  }
  if (req.command == "deform") {
    return run_deform(req);
  }
  if (req.command == "eval") {
    return run_eval(req);
  }
  if (req.command == "plot") {
    return run_plot(req);
  }
  return run_synth(req);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json write_run(const Request& request, const RunResult& result, const fs::path& out_dir, const RunRecord& record) {
  Json inputs = Json::array();
  for (const fs::path& p : result.inputs) {
    inputs.push_back({{"path", p.string()}, {"digest", file_digest(p)}});
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw InputError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  }
  Json outputs = Json::array();
  for (const OutputFile& f : result.files) {
    const fs::path p = out_dir / f.name;
    f.write(p);
    outputs.push_back({{"file", f.name}, {"digest", file_digest(p)}});
  }
  Json manifest = {
      {"tool", "rtk"},
      {"version", RTK_VERSION},
      {"command", request.command},
      {"argv", record.argv},
      {"params", request.params},
      {"config", request.config},
      {"seed", request.seed},
      {"inputs", inputs},
      {"outputs", outputs},
      {"started_at", record.started_at},
      {"finished_at", utc_timestamp()},
  };
  if (!record.replay_of.empty()) {
    manifest["replay_of"] = record.replay_of;
  }
  write_json(out_dir / "manifest.json", manifest);
  return manifest;
}

ReplayOutcome replay(const fs::path& manifest_path, const fs::path& out_dir, const RunRecord& record) {
  const Json m = read_json(manifest_path);
  const std::string w = manifest_path.string();
  if (!m.is_object() || m.value("tool", "") != "rtk") {
    throw InputError(w + ": not an rtk run manifest");
  }
  for (const char* key : {"command", "params", "config", "seed", "inputs", "outputs"}) {
    if (!m.contains(key)) {
      throw InputError(w + ": missing '" + key + "'");
    }
  }
  std::error_code ec;
  if (fs::exists(out_dir) && fs::equivalent(out_dir, fs::absolute(manifest_path).parent_path(), ec)) {
    throw InputError("replay output directory must differ from the recorded run's directory");
  }
  for (const Json& in : m["inputs"]) {
    const std::string path = in.at("path").get<std::string>();
    if (!fs::exists(path)) {
      throw InputError("recorded input " + path + " no longer exists");
    }
    if (file_digest(path) != in.at("digest").get<std::string>()) {
      throw InputError("recorded input " + path + " has changed since the run");
    }
  }
  Request req;
  req.command = m["command"].get<std::string>();
  req.params = m["params"];
  req.config = m["config"];
  req.seed = m["seed"].get<std::uint64_t>();
  if (m.value("version", "") != RTK_VERSION) {
    throw InputError(w + ": recorded with rtk " + m.value("version", "?") + ", this is " + RTK_VERSION);
  }
  const RunResult result = execute(req);
  ReplayOutcome outcome;
  outcome.manifest = write_run(req, result, out_dir, record);

  std::map<std::string, std::string> before;
  for (const Json& o : m["outputs"]) {
    before[o.at("file").get<std::string>()] = o.at("digest").get<std::string>();
  }
  std::map<std::string, std::string> after;
  for (const Json& o : outcome.manifest["outputs"]) {
    after[o.at("file").get<std::string>()] = o.at("digest").get<std::string>();
  }
  for (const auto& [file, digest] : before) {
    const auto it = after.find(file);
    if (it == after.end() || it->second != digest) {
      outcome.mismatched.push_back(file);
    }
  }
  for (const auto& [file, digest] : after) {
    if (before.count(file) == 0) {
      outcome.mismatched.push_back(file);
    }
  }
  return outcome;
}

} // namespace rtk::cli
