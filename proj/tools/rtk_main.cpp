#include "rtk/cli/commands.hpp"
#include "rtk/error.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using rtk::Json;

namespace {

enum class LogLevel { Error, Warn, Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("RTK_LOG_LEVEL");
  const std::string v = env ? env : "info";
  if (v == "error" || v == "quiet") {
    return LogLevel::Error;
  }
  if (v == "warn") {
    return LogLevel::Warn;
  }
  if (v == "debug") {
    return LogLevel::Debug;
  }
  return LogLevel::Info;
}

void log(LogLevel level, const std::string& msg) {
  if (level <= log_level()) {
    std::cerr << "rtk: " << msg << '\n';
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file with per-command sections")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--out-dir", c.out_dir, "Directory for outputs and the run manifest")->capture_default_str();
}

std::string absolute(const std::string& path) {
  return fs::absolute(path).lexically_normal().string();
}

// Keys whose value is a path are stored absolute so manifests replay from
// any working directory.
void set_path(Json& params, const char* key, const std::string& value) {
  if (!value.empty()) {
    params[key] = absolute(value);
  }
}

template <typename T>
void set_override(Json& overrides, const char* key, const std::optional<T>& value) {
  if (value) {
    overrides[key] = *value;
  }
}

Json config_section(const Common& c, const std::string& command) {
  if (c.config.empty()) {
    return Json::object();
  }
  const Json file = rtk::read_json(c.config);
  if (!file.is_object()) {
    throw rtk::InputError(c.config + ": expected an object of command sections");
  }
  const auto names = rtk::cli::command_names();
  for (const auto& item : file.items()) {
    if (std::find(names.begin(), names.end(), item.key()) == names.end()) {
      throw rtk::InputError(c.config + ": unknown section '" + item.key() + "'");
    }
  }
  try {
    return rtk::cli::resolve_config(command, file.value(command, Json::object()), Json::object());
  } catch (const rtk::InputError& e) {
    throw rtk::InputError(c.config + ": " + e.what());
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"rtk: constraint-aware motion retargeting toolkit"};
  app.set_version_flag("--version", RTK_VERSION);
  app.require_subcommand(1);

  Common common;
  Json params = Json::object();
  Json overrides = Json::object();

  // reconstruct
  std::string r_motion, r_skeleton;
  std::optional<double> r_cutoff, r_lambda, r_k, r_gamma;
  std::optional<int> r_iters;
  auto* rec = app.add_subcommand("reconstruct", "Smooth a motion, reject outliers and regularize it");
  add_common(rec, common);
  rec->add_option("--motion", r_motion, "Input motion JSON")->required();
  rec->add_option("--skeleton", r_skeleton, "Skeleton JSON or 'default' (defaults to the motion's reference)");
  rec->add_option("--cutoff-hz", r_cutoff, "Spline cutoff frequency");
  rec->add_option("--lambda", r_lambda, "Spline smoothing weight (overrides the cutoff)");
  rec->add_option("--outlier-k", r_k, "Outlier threshold in robust standard deviations");
  rec->add_option("--gamma", r_gamma, "Weight of the original angles in regularization");
  rec->add_option("--iterations", r_iters, "Regularization iterations");

  // retarget
  std::string t_motion, t_skeleton, t_target, t_constraints, t_camera;
  std::vector<double> t_beta;
  std::optional<double> t_l1, t_l2, t_l3, t_window, t_lr;
  std::optional<int> t_iters;
  bool t_root = false;
  bool t_no_warm = false;
  auto* ret = app.add_subcommand("retarget", "Retarget a motion to a new shape under end-effector constraints");
  add_common(ret, common);
  ret->add_option("--motion", t_motion, "Source motion JSON")->required();
  ret->add_option("--skeleton", t_skeleton, "Skeleton JSON or 'default'");
  ret->add_option("--target-beta", t_beta, "Target shape coefficients, comma separated")->delimiter(',');
  ret->add_option("--target", t_target, "Target shape file: beta list, {beta} or a motion file");
  ret->add_option("--constraints", t_constraints, "Constraint JSON");
  ret->add_option("--camera", t_camera, "Camera JSON (overrides one embedded in the constraints)");
  ret->add_option("--lambda1", t_l1, "Style weight");
  ret->add_option("--lambda2", t_l2, "3D constraint weight");
  ret->add_option("--lambda3", t_l3, "2D constraint weight");
  ret->add_option("--window-seconds", t_window, "Optimization window length");
  ret->add_option("--iterations", t_iters, "Optimizer iterations per window");
  ret->add_option("--learning-rate", t_lr, "Optimizer step size");
  ret->add_flag("--optimize-root", t_root, "Also optimize a per-frame root translation offset");
  ret->add_flag("--no-warm-start", t_no_warm, "Start the optimizer from zero offsets");

  // deform
  std::string d_mesh, d_labels, d_image, d_camera, d_weights;
  std::optional<int> d_iters, d_stride;
  std::optional<double> d_penalty;
  auto* def = app.add_subcommand("deform", "Fit a labeled mesh to a part-label image with ARAP");
  add_common(def, common);
  def->add_option("--mesh", d_mesh, "Mesh OBJ")->required();
  def->add_option("--labels", d_labels, "Per-vertex part labels, one integer per line")->required();
  def->add_option("--label-image", d_image, "Part-label image (JSON matrix, PGM or PNG)")->required();
  def->add_option("--camera", d_camera, "Camera JSON")->required();
  def->add_option("--iterations", d_iters, "ARAP iterations");
  def->add_option("--penalty", d_penalty, "Control point penalty weight");
  def->add_option("--weights", d_weights, "Laplacian weights")->check(CLI::IsMember({"cotangent", "uniform"}));
  def->add_option("--contour-stride", d_stride, "Keep every n-th contour pixel");

  // eval
  std::string e_pred, e_ref, e_motion, e_constraints, e_camera, e_skeleton;
  std::optional<std::size_t> e_window;
  bool e_per_channel = false;
  auto* ev = app.add_subcommand("eval", "Score frames and end-effector accuracy");
  add_common(ev, common);
  ev->add_option("--pred-frames", e_pred, "Directory of predicted frames");
  ev->add_option("--ref-frames", e_ref, "Directory of reference frames");
  ev->add_option("--motion", e_motion, "Motion JSON for end-effector error");
  ev->add_option("--constraints", e_constraints, "Constraint JSON");
  ev->add_option("--camera", e_camera, "Camera JSON");
  ev->add_option("--skeleton", e_skeleton, "Skeleton JSON or 'default'");
  ev->add_option("--window", e_window, "Acceptance window (frames); derived from the lengths when absent");
  ev->add_flag("--per-channel", e_per_channel, "Average SSIM over color channels instead of luma");

  // plot
  std::string p_source, p_naive, p_constrained, p_constraints, p_camera, p_joint, p_axis = "y", p_skeleton;
  auto* plt = app.add_subcommand("plot", "Plot one joint coordinate over time as SVG and CSV");
  add_common(plt, common);
  plt->add_option("--source", p_source, "Source motion JSON")->required();
  plt->add_option("--naive", p_naive, "Direct-transfer motion JSON");
  plt->add_option("--constrained", p_constrained, "Retargeted motion JSON");
  plt->add_option("--constraints", p_constraints, "Constraint JSON; constrained spans are shaded");
  plt->add_option("--camera", p_camera, "Camera JSON");
  plt->add_option("--joint", p_joint, "Joint name or index")->required();
  plt->add_option("--axis", p_axis, "Coordinate axis")->check(CLI::IsMember({"x", "y", "z"}))->capture_default_str();
  plt->add_option("--skeleton", p_skeleton, "Skeleton JSON or 'default'");

  // synth
  std::optional<std::string> s_template;
  std::optional<double> s_duration, s_fps, s_noise, s_spike_angle;
  std::optional<int> s_spikes, s_stride;
  std::vector<double> s_source, s_target;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic paired scenario");
  add_common(syn, common);
  syn->add_option("--template", s_template, "Motion template")->check(CLI::IsMember(rtk::synth_templates()));
  syn->add_option("--duration", s_duration, "Duration in seconds");
  syn->add_option("--fps", s_fps, "Frame rate");
  syn->add_option("--source-beta", s_source, "Source shape coefficients, comma separated")->delimiter(',');
  syn->add_option("--target-beta", s_target, "Target shape coefficients, comma separated")->delimiter(',');
  syn->add_option("--noise", s_noise, "Gaussian angle noise (radians)");
  syn->add_option("--spikes", s_spikes, "Number of injected spike outliers");
  syn->add_option("--spike-angle", s_spike_angle, "Spike magnitude (radians)");
  syn->add_option("--constraint-stride", s_stride, "Constrain every n-th frame of each contact span");

  // replay
  std::string m_path, m_out;
  auto* rep = app.add_subcommand("replay", "Re-run a recorded manifest and verify identical outputs");
  rep->add_option("manifest", m_path, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  rep->add_option("--out-dir", m_out, "Output directory (default: <run dir>/replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  rtk::cli::RunRecord record;
  record.argv.assign(argv, argv + argc);
  record.started_at = rtk::cli::utc_timestamp();

  try {
    if (rep->parsed()) {
      const fs::path out = m_out.empty() ? fs::absolute(m_path).parent_path() / "replay" : fs::path(m_out);
      record.replay_of = absolute(m_path);
      const auto outcome = rtk::cli::replay(m_path, out, record);
      if (!outcome.identical()) {
        for (const auto& f : outcome.mismatched) {
          log(LogLevel::Error, "replay output differs: " + f);
        }
        return 3;
      }
      log(LogLevel::Info, "replay identical: " + std::to_string(outcome.manifest["outputs"].size()) +
                              " outputs in " + out.string());
      return 0;
    }

    rtk::cli::Request req;
    req.command = app.get_subcommands().front()->get_name();
    if (rec->parsed()) {
      set_path(params, "motion", r_motion);
      if (!r_skeleton.empty()) {
        params["skeleton"] = r_skeleton == "default" ? r_skeleton : absolute(r_skeleton);
      }
      set_override(overrides, "cutoff_hz", r_cutoff);
      set_override(overrides, "lambda", r_lambda);
      set_override(overrides, "outlier_k", r_k);
      set_override(overrides, "gamma", r_gamma);
      set_override(overrides, "iterations", r_iters);
    } else if (ret->parsed()) {
      set_path(params, "motion", t_motion);
      if (!t_skeleton.empty()) {
        params["skeleton"] = t_skeleton == "default" ? t_skeleton : absolute(t_skeleton);
      }
      if (!t_beta.empty()) {
        params["target_beta"] = t_beta;
      }
      set_path(params, "target", t_target);
      set_path(params, "constraints", t_constraints);
      set_path(params, "camera", t_camera);
      set_override(overrides, "lambda1", t_l1);
      set_override(overrides, "lambda2", t_l2);
      set_override(overrides, "lambda3", t_l3);
      set_override(overrides, "window_seconds", t_window);
      set_override(overrides, "iterations", t_iters);
      set_override(overrides, "learning_rate", t_lr);
      if (t_root) {
        overrides["optimize_root_translation"] = true;
      }
      if (t_no_warm) {
        overrides["warm_start"] = false;
      }
    } else if (def->parsed()) {
      set_path(params, "mesh", d_mesh);
      set_path(params, "labels", d_labels);
      set_path(params, "label_image", d_image);
      set_path(params, "camera", d_camera);
      set_override(overrides, "iterations", d_iters);
      set_override(overrides, "penalty", d_penalty);
      set_override(overrides, "contour_stride", d_stride);
      if (!d_weights.empty()) {
        overrides["weights"] = d_weights;
      }
    } else if (ev->parsed()) {
      set_path(params, "pred_frames", e_pred);
      set_path(params, "ref_frames", e_ref);
      set_path(params, "motion", e_motion);
      set_path(params, "constraints", e_constraints);
      set_path(params, "camera", e_camera);
      if (!e_skeleton.empty()) {
        params["skeleton"] = e_skeleton == "default" ? e_skeleton : absolute(e_skeleton);
      }
      set_override(overrides, "window", e_window);
      if (e_per_channel) {
        overrides["per_channel"] = true;
      }
    } else if (plt->parsed()) {
      set_path(params, "source", p_source);
      set_path(params, "naive", p_naive);
      set_path(params, "constrained", p_constrained);
      set_path(params, "constraints", p_constraints);
      set_path(params, "camera", p_camera);
      params["joint"] = p_joint;
      params["axis"] = p_axis;
      if (!p_skeleton.empty()) {
        params["skeleton"] = p_skeleton == "default" ? p_skeleton : absolute(p_skeleton);
      }
    } else if (syn->parsed()) {
      set_override(overrides, "motion", s_template);
      set_override(overrides, "duration", s_duration);
      set_override(overrides, "fps", s_fps);
      set_override(overrides, "noise_sigma", s_noise);
      set_override(overrides, "spike_count", s_spikes);
      set_override(overrides, "spike_angle", s_spike_angle);
      set_override(overrides, "constraint_stride", s_stride);
      if (!s_source.empty()) {
        overrides["source_beta"] = s_source;
      }
      if (!s_target.empty()) {
        overrides["target_beta"] = s_target;
      }
      set_override(overrides, "seed", common.seed);
    }

    req.params = params;
    req.config = rtk::cli::resolve_config(req.command, config_section(common, req.command), overrides);
    req.seed = req.command == "synth" ? req.config["seed"].get<std::uint64_t>() : common.seed.value_or(0);

    const auto result = rtk::cli::execute(req);
    rtk::cli::write_run(req, result, common.out_dir, record);
    if (!result.summary.empty()) {
      log(LogLevel::Info, req.command + ": " + result.summary);
    }
    log(LogLevel::Debug, "wrote " + std::to_string(result.files.size()) + " files and manifest.json to " +
                             common.out_dir);
    return 0;
  } catch (const rtk::InputError& e) {
    log(LogLevel::Error, std::string("error: ") + e.what());
    return 2;
  } catch (const Json::exception& e) {
    log(LogLevel::Error, std::string("error: ") + e.what());
    return 2;
  } catch (const rtk::NumericalError& e) {
    log(LogLevel::Error, std::string("numerical failure: ") + e.what());
    return 3;
  } catch (const std::exception& e) {
    log(LogLevel::Error, std::string("internal error: ") + e.what());
    return 1;
  }
}
