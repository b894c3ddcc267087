#include "rtk/metrics.hpp"

#include "rtk/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rtk {

std::size_t acceptance_window(std::size_t len1, std::size_t len2) {
  if (len1 == 0 || len2 == 0) {
    throw InputError("acceptance window needs non-empty sequences");
  }
  const std::size_t diff = len1 > len2 ? len1 - len2 : len2 - len1;
  return std::max<std::size_t>(15, 2 * diff);
}

namespace {

void require_same_shape(const Frame& a, const Frame& b) {
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw InputError("frame dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                     std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                     "x" + std::to_string(b.channels));
  }
}

using Plane = std::vector<double>;

Plane channel_plane(const Frame& f, int c) {
  Plane p(f.pixel_count());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = f.data[i * static_cast<std::size_t>(f.channels) + static_cast<std::size_t>(c)];
  }
  return p;
}

Plane luma_plane(const Frame& f) {
  if (f.channels == 1) {
    return channel_plane(f, 0);
  }
  Plane p(f.pixel_count());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = 0.299 * f.data[3 * i] + 0.587 * f.data[3 * i + 1] + 0.114 * f.data[3 * i + 2];
  }
  return p;
}

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) {
    v /= sum;
  }
  return g;
}

// Separable valid-mode filtering: output is (w - 10) x (h - 10).
Plane filter_valid(const Plane& in, int w, int h) {
  static const auto g = gaussian_taps();
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  Plane rows(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) {
        s += g[t] * in[static_cast<std::size_t>(y) * w + x + t];
      }
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  Plane out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) {
        s += g[t] * rows[static_cast<std::size_t>(y + t) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

double ssim_plane(const Plane& a, const Plane& b, int w, int h) {
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  Plane aa(a.size());
  Plane bb(a.size());
  Plane ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const Plane mu_a = filter_valid(a, w, h);
  const Plane mu_b = filter_valid(b, w, h);
  const Plane e_aa = filter_valid(aa, w, h);
  const Plane e_bb = filter_valid(bb, w, h);
  const Plane e_ab = filter_valid(ab, w, h);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

} // namespace

double mse(const Frame& a, const Frame& b) {
  require_same_shape(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double ssim(const Frame& a, const Frame& b, bool per_channel) {
  require_same_shape(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow) {
    throw InputError("SSIM needs frames of at least 11x11 pixels, got " + std::to_string(a.width) + "x" +
                     std::to_string(a.height));
  }
  if (!per_channel || a.channels == 1) {
    return ssim_plane(luma_plane(a), luma_plane(b), a.width, a.height);
  }
  double sum = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    sum += ssim_plane(channel_plane(a, c), channel_plane(b, c), a.width, a.height);
  }
  return sum / a.channels;
}

bool metric_prefers_lower(FrameMetric metric) {
  return metric == FrameMetric::Mse;
}

std::vector<double> windowed_score(
    std::size_t len_a,
    std::size_t len_b,
    std::size_t w,
    bool lower_is_better,
    const std::function<double(std::size_t, std::size_t)>& score) {
  if (len_a == 0 || len_b == 0) {
    throw InputError("windowed score needs non-empty sequences");
  }
  std::vector<double> out(len_a);
  for (std::size_t k = 0; k < len_a; ++k) {
    const std::size_t lo = std::min(k > w ? k - w : 0, len_b - 1);
    const std::size_t hi = std::min(k + w, len_b - 1);
    double best = score(k, lo);
    for (std::size_t j = lo + 1; j <= hi; ++j) {
      const double s = score(k, j);
      if (lower_is_better ? s < best : s > best) {
        best = s;
      }
    }
    out[k] = best;
  }
  return out;
}

std::vector<double> windowed_score(
    std::span<const Frame> a,
    std::span<const Frame> b,
    FrameMetric metric,
    std::size_t w,
    bool per_channel) {
  return windowed_score(a.size(), b.size(), w, metric_prefers_lower(metric), [&](std::size_t k, std::size_t j) {
    return metric == FrameMetric::Mse ? mse(a[k], b[j]) : ssim(a[k], b[j], per_channel);
  });
}

std::vector<EndEffectorEntry> end_effector_errors(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const ConstraintSet& constraints) {
  if (constraints.constraints.empty()) {
    return {};
  }
  if (!constraints.camera) {
    throw InputError("end-effector error is measured in pixels and needs a camera");
  }
  constraints.validate(skel, motion.size());
  const Camera& cam = *constraints.camera;
  const BoneOffsets offsets = bone_offsets(skel, beta);
  std::vector<EndEffectorEntry> out;
  out.reserve(constraints.constraints.size());
  for (const Constraint& c : constraints.constraints) {
    const JointPoses poses = forward_kinematics(skel, offsets, motion.frames[c.frame]);
    const Vec3 p = poses[c.joint].translation;
    Vec2 target = c.pixel;
    Vec2 actual;
    try {
      actual = cam.project_world(p);
      if (c.kind == ConstraintKind::Position3D) {
        target = cam.project_world(c.position);
      }
    } catch (const BehindCameraError&) {
      throw BehindCameraError("joint " + skel.joint_label(c.joint) + " or its target is behind the camera at frame " +
                              std::to_string(c.frame));
    }
    out.push_back({c.frame, c.joint, c.kind, c.label, (actual - target).norm()});
  }
  return out;
}

double end_effector_error(
    const Motion& motion,
    const Skeleton& skel,
    const ShapeParams& beta,
    const ConstraintSet& constraints) {
  const auto entries = end_effector_errors(motion, skel, beta, constraints);
  if (entries.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& e : entries) {
    sum += e.pixels;
  }
  return sum / static_cast<double>(entries.size());
}

namespace {

template <typename Get>
std::optional<double> mean_of(const std::vector<EvalFrameScore>& frames, Get get) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (const std::optional<double> v = get(f)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) {
    return std::nullopt;
  }
  return sum / static_cast<double>(n);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string csv_cell(const std::optional<double>& v) {
  if (!v) {
    return "";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

} // namespace

std::optional<double> EvalReport::mean_mse() const {
  return mean_of(frames, [](const EvalFrameScore& f) { return f.mse; });
}

std::optional<double> EvalReport::mean_ssim() const {
  return mean_of(frames, [](const EvalFrameScore& f) { return f.ssim; });
}

std::optional<double> EvalReport::mean_end_effector_error() const {
  if (end_effector.empty()) {
    return std::nullopt;
  }
  double sum = 0.0;
  for (const auto& e : end_effector) {
    sum += e.pixels;
  }
  return sum / static_cast<double>(end_effector.size());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_frame = nlohmann::json::array();
  for (const auto& f : frames) {
    per_frame.push_back({{"index", f.index}, {"mse", optional_json(f.mse)}, {"ssim", optional_json(f.ssim)}});
  }
  nlohmann::json ee = nlohmann::json::array();
  for (const auto& e : end_effector) {
    ee.push_back({{"frame", e.frame},
                  {"joint", e.joint},
                  {"kind", e.kind == ConstraintKind::Position3D ? "p3d" : "p2d"},
                  {"label", e.label},
                  {"pixels", e.pixels}});
  }
  return {
      {"window", window},
      {"aggregate",
       {{"mse", optional_json(mean_mse())},
        {"ssim", optional_json(mean_ssim())},
        {"end_effector_px", optional_json(mean_end_effector_error())},
        {"lpips", optional_json(lpips)},
        {"fvd", optional_json(fvd)},
        {"forgery", optional_json(forgery)}}},
      {"frames", per_frame},
      {"end_effector", ee},
      {"metadata", metadata},
  };
}

std::string EvalReport::frames_csv() const {
  std::ostringstream out;
  out << "index,mse,ssim\n";
  for (const auto& f : frames) {
    out << f.index << ',' << csv_cell(f.mse) << ',' << csv_cell(f.ssim) << '\n';
  }
  return out.str();
}

} // namespace rtk
