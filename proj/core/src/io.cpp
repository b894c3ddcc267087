#include "rtk/io.hpp"

#include "rtk/error.hpp"
#include "rtk/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace rtk {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InputError(where + ": " + what);
}

void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) {
    fail(where, "expected an object");
  }
}

void check_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  require_object(j, where);
  for (const auto& item : j.items()) {
    if (allowed.count(item.key()) == 0) {
      fail(where, "unknown key '" + item.key() + "'");
    }
  }
}

const Json& field(const Json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    fail(where, "missing '" + key + "'");
  }
  return *it;
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) {
    fail(where, "expected a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    fail(where, "expected a finite number");
  }
  return v;
}

long long integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) {
    fail(where, "expected an integer");
  }
  return j.get<long long>();
}

bool boolean(const Json& j, const std::string& where) {
  if (!j.is_boolean()) {
    fail(where, "expected true or false");
  }
  return j.get<bool>();
}

std::string string(const Json& j, const std::string& where) {
  if (!j.is_string()) {
    fail(where, "expected a string");
  }
  return j.get<std::string>();
}

std::vector<double> numbers(const Json& j, const std::string& where, std::size_t expected) {
  if (!j.is_array() || j.size() != expected) {
    fail(where, "expected " + std::to_string(expected) + " numbers" +
                    (j.is_array() ? ", got " + std::to_string(j.size()) : std::string()));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Vec3 vec3(const Json& j, const std::string& where) {
  const auto v = numbers(j, where, 3);
  return {v[0], v[1], v[2]};
}

Vec2 vec2(const Json& j, const std::string& where) {
  const auto v = numbers(j, where, 2);
  return {v[0], v[1]};
}

Json to_json(const Vec3& v) {
  return Json::array({v.x(), v.y(), v.z()});
}

template <typename T, typename Read>
void maybe(const Json& j, const char* key, const std::string& where, T& out, Read read) {
  const auto it = j.find(key);
  if (it != j.end()) {
    out = read(*it, where + "." + key);
  }
}

const auto kNumber = [](const Json& j, const std::string& w) { return number(j, w); };
const auto kBool = [](const Json& j, const std::string& w) { return boolean(j, w); };
const auto kInt = [](const Json& j, const std::string& w) {
  const long long v = integer(j, w);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    fail(w, "integer out of range");
  }
  return static_cast<int>(v);
};

int joint_ref(const Json& j, const std::string& where, const Skeleton& skel) {
  if (j.is_string()) {
    const auto idx = skel.find_joint(j.get<std::string>());
    if (!idx) {
      fail(where, "unknown joint name '" + j.get<std::string>() + "'");
    }
    return *idx;
  }
  const long long v = integer(j, where);
  if (v < 0 || v >= kJointCount) {
    fail(where, "joint index " + std::to_string(v) + " out of range");
  }
  return static_cast<int>(v);
}

} // namespace

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(origin + ": malformed JSON: " + e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  return parse_json(read_text(path), path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw InputError("failed writing " + path.string());
  }
}

void write_json(const std::filesystem::path& path, const Json& value) {
  write_text(path, value.dump(2) + "\n");
}

ShapeParams shape_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() > kShapeCount) {
    fail(where, "expected up to " + std::to_string(kShapeCount) + " shape coefficients");
  }
  ShapeParams beta;
  for (std::size_t i = 0; i < j.size(); ++i) {
    beta.beta[i] = number(j[i], where + "[" + std::to_string(i) + "]");
  }
  try {
    beta.validate();
  } catch (const InputError& e) {
    fail(where, e.what());
  }
  return beta;
}

Json to_json(const ShapeParams& beta) {
  return Json(std::vector<double>(beta.beta.begin(), beta.beta.end()));
}

Skeleton skeleton_from_json(const Json& j) {
  const std::string w = "skeleton";
  check_keys(j, w, {"parents", "rest_offsets", "shape_basis", "end_effectors", "joint_names"});
  std::array<int, kJointCount> parents{};
  const Json& jp = field(j, "parents", w);
  if (!jp.is_array() || jp.size() != kJointCount) {
    fail(w + ".parents", "expected " + std::to_string(kJointCount) + " entries");
  }
  for (int i = 0; i < kJointCount; ++i) {
    parents[i] = kInt(jp[i], w + ".parents[" + std::to_string(i) + "]");
  }
  BoneOffsets rest{};
  const Json& jr = field(j, "rest_offsets", w);
  if (!jr.is_array() || jr.size() != kJointCount) {
    fail(w + ".rest_offsets", "expected " + std::to_string(kJointCount) + " offsets");
  }
  for (int i = 0; i < kJointCount; ++i) {
    rest[i] = vec3(jr[i], w + ".rest_offsets[" + std::to_string(i) + "]");
  }
  ShapeBasis basis;
  for (auto& dir : basis) {
    dir.fill(Vec3::Zero());
  }
  if (const auto it = j.find("shape_basis"); it != j.end()) {
    if (!it->is_array() || it->size() > kShapeCount) {
      fail(w + ".shape_basis", "expected up to " + std::to_string(kShapeCount) + " directions");
    }
    for (std::size_t b = 0; b < it->size(); ++b) {
      const Json& dir = (*it)[b];
      const std::string wb = w + ".shape_basis[" + std::to_string(b) + "]";
      if (!dir.is_array() || dir.size() != kJointCount) {
        fail(wb, "expected " + std::to_string(kJointCount) + " offsets");
      }
      for (int i = 0; i < kJointCount; ++i) {
        basis[b][i] = vec3(dir[i], wb + "[" + std::to_string(i) + "]");
      }
    }
  }
  std::vector<int> ee;
  const Json& je = field(j, "end_effectors", w);
  if (!je.is_array()) {
    fail(w + ".end_effectors", "expected a list");
  }
  std::vector<std::string> names;
  if (const auto it = j.find("joint_names"); it != j.end()) {
    if (!it->is_array()) {
      fail(w + ".joint_names", "expected a list of strings");
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      names.push_back(string((*it)[i], w + ".joint_names[" + std::to_string(i) + "]"));
    }
  }
  for (std::size_t i = 0; i < je.size(); ++i) {
    const std::string wi = w + ".end_effectors[" + std::to_string(i) + "]";
    if (je[i].is_string()) {
      const auto pos = std::find(names.begin(), names.end(), je[i].get<std::string>());
      if (pos == names.end()) {
        fail(wi, "unknown joint name '" + je[i].get<std::string>() + "'");
      }
      ee.push_back(static_cast<int>(pos - names.begin()));
    } else {
      ee.push_back(kInt(je[i], wi));
    }
  }
  return Skeleton::create(parents, rest, basis, std::move(ee), std::move(names));
}

Json to_json(const Skeleton& skel) {
  Json rest = Json::array();
  for (const Vec3& v : skel.rest_offsets()) {
    rest.push_back(to_json(v));
  }
  Json basis = Json::array();
  for (const BoneOffsets& dir : skel.shape_basis()) {
    Json d = Json::array();
    for (const Vec3& v : dir) {
      d.push_back(to_json(v));
    }
    basis.push_back(d);
  }
  Json out = {
      {"parents", std::vector<int>(skel.parents().begin(), skel.parents().end())},
      {"rest_offsets", rest},
      {"shape_basis", basis},
      {"end_effectors", skel.end_effectors()},
  };
  if (!skel.joint_names().empty()) {
    out["joint_names"] = skel.joint_names();
  }
  return out;
}

Skeleton load_skeleton(const std::string& ref) {
  if (ref == "default") {
    return default_skeleton();
  }
  return skeleton_from_json(read_json(ref));
}

MotionFile motion_from_json(const Json& j) {
  check_keys(j, "motion", {"header", "frames"});
  const Json& h = field(j, "header", "motion");
  check_keys(h, "header", {"fps", "frame_count", "skeleton_ref", "beta"});
  MotionFile out;
  out.motion.fps = number(field(h, "fps", "header"), "header.fps");
  const long long count = integer(field(h, "frame_count", "header"), "header.frame_count");
  maybe(h, "skeleton_ref", "header", out.skeleton_ref, [](const Json& v, const std::string& w) {
    return string(v, w);
  });
  maybe(h, "beta", "header", out.beta, [](const Json& v, const std::string& w) { return shape_from_json(v, w); });
  const Json& frames = field(j, "frames", "motion");
  if (!frames.is_array()) {
    fail("frames", "expected a list");
  }
  if (count < 0 || static_cast<std::size_t>(count) != frames.size()) {
    fail("header.frame_count", std::to_string(count) + " does not match the " + std::to_string(frames.size()) +
                                   " frames listed");
  }
  out.motion.frames.reserve(frames.size());
  std::size_t with_beta = 0;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const std::string w = "frames[" + std::to_string(k) + "]";
    const Json& f = frames[k];
    check_keys(f, w, {"theta", "root_t", "beta"});
    Pose p;
    const auto theta = numbers(field(f, "theta", w), w + ".theta", 3 * kJointCount);
    for (int jn = 0; jn < kJointCount; ++jn) {
      p.theta[jn] = Vec3(theta[3 * jn], theta[3 * jn + 1], theta[3 * jn + 2]);
    }
    p.root_t = vec3(field(f, "root_t", w), w + ".root_t");
    out.motion.frames.push_back(p);
    if (const auto it = f.find("beta"); it != f.end()) {
      out.frame_betas.push_back(shape_from_json(*it, w + ".beta"));
      ++with_beta;
    }
  }
  if (with_beta != 0 && with_beta != frames.size()) {
    fail("frames", "per-frame beta must be given for every frame or none");
  }
  try {
    out.motion.validate();
  } catch (const InputError& e) {
    fail("motion", e.what());
  }
  return out;
}

Json to_json(const MotionFile& file) {
  Json frames = Json::array();
  for (std::size_t k = 0; k < file.motion.size(); ++k) {
    const Pose& p = file.motion.frames[k];
    std::vector<double> theta;
    theta.reserve(3 * kJointCount);
    for (const Vec3& t : p.theta) {
      theta.insert(theta.end(), {t.x(), t.y(), t.z()});
    }
    Json f = {{"theta", theta}, {"root_t", to_json(p.root_t)}};
    if (!file.frame_betas.empty()) {
      f["beta"] = to_json(file.frame_betas[k]);
    }
    frames.push_back(std::move(f));
  }
  return {
      {"header",
       {{"fps", file.motion.fps},
        {"frame_count", file.motion.size()},
        {"skeleton_ref", file.skeleton_ref},
        {"beta", to_json(file.beta)}}},
      {"frames", frames},
  };
}

MotionFile load_motion(const std::filesystem::path& path) {
  try {
    return motion_from_json(read_json(path));
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) {
      throw;
    }
    throw InputError(path.string() + ": " + msg);
  }
}

void save_motion(const std::filesystem::path& path, const MotionFile& file) {
  write_json(path, to_json(file));
}

Camera camera_from_json(const Json& j) {
  const std::string w = "camera";
  check_keys(j, w, {"fx", "fy", "cx", "cy", "width", "height", "pose"});
  Camera cam;
  cam.intrinsics.fx = number(field(j, "fx", w), w + ".fx");
  cam.intrinsics.fy = number(field(j, "fy", w), w + ".fy");
  cam.intrinsics.cx = number(field(j, "cx", w), w + ".cx");
  cam.intrinsics.cy = number(field(j, "cy", w), w + ".cy");
  cam.intrinsics.width = kInt(field(j, "width", w), w + ".width");
  cam.intrinsics.height = kInt(field(j, "height", w), w + ".height");
  if (const auto it = j.find("pose"); it != j.end()) {
    check_keys(*it, w + ".pose", {"R", "t"});
    const Json& r = field(*it, "R", w + ".pose");
    if (!r.is_array() || r.size() != 3) {
      fail(w + ".pose.R", "expected 3 rows");
    }
    for (int row = 0; row < 3; ++row) {
      cam.world_to_camera.rotation.row(row) = vec3(r[row], w + ".pose.R[" + std::to_string(row) + "]").transpose();
    }
    cam.world_to_camera.translation = vec3(field(*it, "t", w + ".pose"), w + ".pose.t");
  }
  try {
    cam.validate();
  } catch (const InputError& e) {
    fail(w, e.what());
  }
  return cam;
}

Json to_json(const Camera& camera) {
  const auto& k = camera.intrinsics;
  const Mat3& r = camera.world_to_camera.rotation;
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i) {
    rows.push_back(to_json(Vec3(r.row(i).transpose())));
  }
  return {
      {"fx", k.fx},
      {"fy", k.fy},
      {"cx", k.cx},
      {"cy", k.cy},
      {"width", k.width},
      {"height", k.height},
      {"pose", {{"R", rows}, {"t", to_json(camera.world_to_camera.translation)}}},
  };
}

std::vector<Constraint> constraints_from_json(const Json& j, const Skeleton& skel) {
  if (!j.is_array()) {
    fail("constraints", "expected a list");
  }
  std::vector<Constraint> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = "constraints[" + std::to_string(i) + "]";
    const Json& c = j[i];
    check_keys(c, w, {"frame", "joint", "kind", "target", "label"});
    Constraint con;
    const long long frame = integer(field(c, "frame", w), w + ".frame");
    if (frame < 0) {
      fail(w + ".frame", "must be non-negative");
    }
    con.frame = static_cast<std::size_t>(frame);
    con.joint = joint_ref(field(c, "joint", w), w + ".joint", skel);
    const std::string kind = string(field(c, "kind", w), w + ".kind");
    if (kind == "p3d") {
      con.kind = ConstraintKind::Position3D;
      con.position = vec3(field(c, "target", w), w + ".target");
    } else if (kind == "p2d") {
      con.kind = ConstraintKind::Pixel2D;
      con.pixel = vec2(field(c, "target", w), w + ".target");
    } else {
      fail(w + ".kind", "expected \"p3d\" or \"p2d\", got \"" + kind + "\"");
    }
    maybe(c, "label", w, con.label, [](const Json& v, const std::string& wl) { return string(v, wl); });
    out.push_back(std::move(con));
  }
  return out;
}

Json constraints_to_json(const std::vector<Constraint>& constraints, const Skeleton& skel) {
  Json out = Json::array();
  for (const Constraint& c : constraints) {
    Json joint = skel.joint_names().empty() ? Json(c.joint) : Json(skel.joint_names()[c.joint]);
    const bool p3d = c.kind == ConstraintKind::Position3D;
    out.push_back({
        {"frame", c.frame},
        {"joint", joint},
        {"kind", p3d ? "p3d" : "p2d"},
        {"target", p3d ? to_json(c.position) : Json::array({c.pixel.x(), c.pixel.y()})},
        {"label", c.label},
    });
  }
  return out;
}

LabelImage load_label_image(const std::filesystem::path& path) {
  LabelImage img;
  if (path.extension() == ".json") {
    const Json j = read_json(path);
    const std::string w = path.string();
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
      fail(w, "expected a non-empty matrix of part ids");
    }
    img.height = static_cast<int>(j.size());
    img.width = static_cast<int>(j[0].size());
    img.ids.reserve(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
      const std::string wy = w + "[" + std::to_string(y) + "]";
      if (!j[y].is_array() || static_cast<int>(j[y].size()) != img.width) {
        fail(wy, "rows must all have " + std::to_string(img.width) + " entries");
      }
      for (int x = 0; x < img.width; ++x) {
        img.ids.push_back(kInt(j[y][x], wy + "[" + std::to_string(x) + "]"));
      }
    }
  } else {
    const Frame f = read_frame(path);
    if (f.channels != 1) {
      fail(path.string(), "label images must be single-channel");
    }
    img.width = f.width;
    img.height = f.height;
    img.ids.assign(f.data.begin(), f.data.end());
  }
  try {
    img.validate();
  } catch (const InputError& e) {
    fail(path.string(), e.what());
  }
  return img;
}

ReconstructConfig reconstruct_config_from_json(const Json& j, ReconstructConfig c) {
  const std::string w = "reconstruct";
  check_keys(j, w,
             {"cutoff_hz", "lambda", "outlier_k", "outlier_floor", "outlier_rounds", "gamma", "iterations",
              "learning_rate", "beta1", "beta2", "monotone"});
  maybe(j, "cutoff_hz", w, c.spline.cutoff_hz, kNumber);
  maybe(j, "lambda", w, c.spline.lambda, kNumber);
  maybe(j, "outlier_k", w, c.outliers.k, kNumber);
  maybe(j, "outlier_floor", w, c.outliers.floor, kNumber);
  maybe(j, "outlier_rounds", w, c.outliers.max_rounds, kInt);
  maybe(j, "gamma", w, c.regularize.gamma, kNumber);
  maybe(j, "iterations", w, c.regularize.optimizer.iterations, kInt);
  maybe(j, "learning_rate", w, c.regularize.optimizer.learning_rate, kNumber);
  maybe(j, "beta1", w, c.regularize.optimizer.beta1, kNumber);
  maybe(j, "beta2", w, c.regularize.optimizer.beta2, kNumber);
  maybe(j, "monotone", w, c.regularize.optimizer.monotone, kBool);
  return c;
}

Json to_json(const ReconstructConfig& c) {
  return {
      {"cutoff_hz", c.spline.cutoff_hz},
      {"lambda", c.spline.lambda},
      {"outlier_k", c.outliers.k},
      {"outlier_floor", c.outliers.floor},
      {"outlier_rounds", c.outliers.max_rounds},
      {"gamma", c.regularize.gamma},
      {"iterations", c.regularize.optimizer.iterations},
      {"learning_rate", c.regularize.optimizer.learning_rate},
      {"beta1", c.regularize.optimizer.beta1},
      {"beta2", c.regularize.optimizer.beta2},
      {"monotone", c.regularize.optimizer.monotone},
  };
}

RetargetConfig retarget_config_from_json(const Json& j, RetargetConfig c) {
  const std::string w = "retarget";
  check_keys(j, w,
             {"lambda1", "lambda2", "lambda3", "window_seconds", "iterations", "learning_rate", "beta1", "beta2",
              "optimize_root_translation", "warm_start", "joint_weights"});
  maybe(j, "lambda1", w, c.lambda1, kNumber);
  maybe(j, "lambda2", w, c.lambda2, kNumber);
  maybe(j, "lambda3", w, c.lambda3, kNumber);
  maybe(j, "window_seconds", w, c.window_seconds, kNumber);
  maybe(j, "iterations", w, c.iterations, kInt);
  maybe(j, "learning_rate", w, c.learning_rate, kNumber);
  maybe(j, "beta1", w, c.beta1, kNumber);
  maybe(j, "beta2", w, c.beta2, kNumber);
  maybe(j, "optimize_root_translation", w, c.optimize_root_translation, kBool);
  maybe(j, "warm_start", w, c.warm_start, kBool);
  if (const auto it = j.find("joint_weights"); it != j.end()) {
    if (it->is_null()) {
      c.weights.reset();
    } else {
      const auto v = numbers(*it, w + ".joint_weights", kJointCount);
      JointWeights jw;
      std::copy(v.begin(), v.end(), jw.w.begin());
      c.weights = jw;
    }
  }
  return c;
}

Json to_json(const RetargetConfig& c) {
  Json out = {
      {"lambda1", c.lambda1},
      {"lambda2", c.lambda2},
      {"lambda3", c.lambda3},
      {"window_seconds", c.window_seconds},
      {"iterations", c.iterations},
      {"learning_rate", c.learning_rate},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"optimize_root_translation", c.optimize_root_translation},
      {"warm_start", c.warm_start},
  };
  out["joint_weights"] = c.weights ? Json(std::vector<double>(c.weights->w.begin(), c.weights->w.end())) : Json();
  return out;
}

DeformOptions deform_options_from_json(const Json& j, DeformOptions c) {
  const std::string w = "deform";
  check_keys(j, w, {"iterations", "tolerance", "penalty", "weights", "min_weight", "rigid_init", "contour_stride"});
  maybe(j, "iterations", w, c.arap.iterations, kInt);
  maybe(j, "tolerance", w, c.arap.tolerance, kNumber);
  maybe(j, "penalty", w, c.arap.penalty, kNumber);
  maybe(j, "min_weight", w, c.arap.min_weight, kNumber);
  maybe(j, "rigid_init", w, c.arap.rigid_init, kBool);
  maybe(j, "contour_stride", w, c.contour_stride, kInt);
  if (const auto it = j.find("weights"); it != j.end()) {
    const std::string kind = string(*it, w + ".weights");
    if (kind == "cotangent") {
      c.arap.weights = LaplacianWeights::Cotangent;
    } else if (kind == "uniform") {
      c.arap.weights = LaplacianWeights::Uniform;
    } else {
      fail(w + ".weights", "expected \"cotangent\" or \"uniform\"");
    }
  }
  if (c.contour_stride < 1) {
    fail(w + ".contour_stride", "must be at least 1");
  }
  return c;
}

Json to_json(const DeformOptions& c) {
  return {
      {"iterations", c.arap.iterations},
      {"tolerance", c.arap.tolerance},
      {"penalty", c.arap.penalty},
      {"weights", c.arap.weights == LaplacianWeights::Cotangent ? "cotangent" : "uniform"},
      {"min_weight", c.arap.min_weight},
      {"rigid_init", c.arap.rigid_init},
      {"contour_stride", c.contour_stride},
  };
}

EvalOptions eval_options_from_json(const Json& j, EvalOptions c) {
  const std::string w = "eval";
  check_keys(j, w, {"window", "per_channel"});
  if (const auto it = j.find("window"); it != j.end()) {
    if (it->is_null()) {
      c.window.reset();
    } else {
      const long long v = integer(*it, w + ".window");
      if (v < 0) {
        fail(w + ".window", "must be non-negative");
      }
      c.window = static_cast<std::size_t>(v);
    }
  }
  maybe(j, "per_channel", w, c.per_channel, kBool);
  return c;
}

Json to_json(const EvalOptions& c) {
  return {{"window", c.window ? Json(*c.window) : Json()}, {"per_channel", c.per_channel}};
}

ScenarioSpec scenario_from_json(const Json& j, ScenarioSpec s) {
  const std::string w = "synth";
  check_keys(j, w,
             {"motion", "duration", "fps", "source_beta", "target_beta", "noise_sigma", "spike_count", "spike_angle",
              "constraint_stride", "seed"});
  maybe(j, "motion", w, s.motion, [](const Json& v, const std::string& wm) { return string(v, wm); });
  maybe(j, "duration", w, s.duration, kNumber);
  maybe(j, "fps", w, s.fps, kNumber);
  maybe(j, "source_beta", w, s.source, [](const Json& v, const std::string& wb) { return shape_from_json(v, wb); });
  maybe(j, "target_beta", w, s.target, [](const Json& v, const std::string& wb) { return shape_from_json(v, wb); });
  maybe(j, "noise_sigma", w, s.noise_sigma, kNumber);
  maybe(j, "spike_count", w, s.spike_count, kInt);
  maybe(j, "spike_angle", w, s.spike_angle, kNumber);
  maybe(j, "constraint_stride", w, s.constraint_stride, kInt);
  if (const auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
      fail(w + ".seed", "expected a non-negative integer");
    }
    s.seed = it->get<std::uint64_t>();
  }
  return s;
}

Json to_json(const ScenarioSpec& s) {
  return {
      {"motion", s.motion},
      {"duration", s.duration},
      {"fps", s.fps},
      {"source_beta", to_json(s.source)},
      {"target_beta", to_json(s.target)},
      {"noise_sigma", s.noise_sigma},
      {"spike_count", s.spike_count},
      {"spike_angle", s.spike_angle},
      {"constraint_stride", s.constraint_stride},
      {"seed", s.seed},
  };
}

std::string file_digest(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace rtk
