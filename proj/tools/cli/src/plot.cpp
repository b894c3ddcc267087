#include "rtk/cli/plot.hpp"

#include "rtk/camera.hpp"
#include "rtk/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rtk::cli {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

constexpr const char* kAxisNames = "xyz";

const char* series_color(std::size_t i) {
  static constexpr const char* kColors[] = {"#7f7f7f", "#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
  return kColors[i % 5];
}

} // namespace

const PlotSeries* TrajectoryPlot::find(const std::string& name) const {
  for (const PlotSeries& s : series) {
    if (s.name == name) {
      return &s;
    }
  }
  return nullptr;
}

int parse_axis(const std::string& axis) {
  if (axis == "x") {
    return 0;
  }
  if (axis == "y") {
    return 1;
  }
  if (axis == "z") {
    return 2;
  }
  throw InputError("axis must be x, y or z, got '" + axis + "'");
}

TrajectoryPlot trajectory_plot(const Skeleton& skel, const std::vector<PlotInput>& inputs, int joint, int axis,
                               const ConstraintSet& constraints) {
  if (inputs.empty()) {
    throw InputError("plot needs at least one motion");
  }
  if (joint < 0 || joint >= kJointCount) {
    throw InputError("joint index " + std::to_string(joint) + " out of range");
  }
  if (axis < 0 || axis > 2) {
    throw InputError("axis index out of range");
  }
  const std::size_t n = inputs.front().motion->size();
  for (const PlotInput& in : inputs) {
    if (in.motion->size() != n) {
      throw InputError("motion '" + in.name + "' has " + std::to_string(in.motion->size()) + " frames, expected " +
                       std::to_string(n));
    }
  }
  constraints.validate(skel, n);

  TrajectoryPlot plot;
  plot.joint = joint;
  plot.joint_name = skel.joint_label(joint);
  plot.axis = axis;
  plot.fps = inputs.front().motion->fps;
  std::vector<JointPositions> last;
  for (const PlotInput& in : inputs) {
    last = motion_positions(skel, in.beta, *in.motion);
    PlotSeries s{in.name, {}};
    s.values.reserve(n);
    for (const JointPositions& p : last) {
      s.values.push_back(p[joint][axis]);
    }
    plot.series.push_back(std::move(s));
  }
  plot.target.assign(n, std::nullopt);
  for (const Constraint& c : constraints.constraints) {
    if (c.joint != joint) {
      continue;
    }
    if (c.kind == ConstraintKind::Position3D) {
      plot.target[c.frame] = c.position[axis];
    } else {
      const double depth = constraints.camera->to_camera(last[c.frame][joint]).z();
      if (depth <= kMinDepth) {
        throw BehindCameraError("cannot lift 2D target at frame " + std::to_string(c.frame));
      }
      plot.target[c.frame] = constraints.camera->back_project(c.pixel, depth)[axis];
    }
  }
  return plot;
}

std::string plot_csv(const TrajectoryPlot& plot) {
  std::ostringstream out;
  out << "frame,time";
  for (const PlotSeries& s : plot.series) {
    out << ',' << s.name;
  }
  out << ",constrained_span,target\n";
  for (std::size_t f = 0; f < plot.frames(); ++f) {
    out << f << ',' << fmt("%.6f", static_cast<double>(f) / plot.fps);
    for (const PlotSeries& s : plot.series) {
      out << ',' << fmt("%.9g", s.values[f]);
    }
    out << ',' << (plot.target[f] ? 1 : 0) << ',';
    if (plot.target[f]) {
      out << fmt("%.9g", *plot.target[f]);
    }
    out << '\n';
  }
  return out.str();
}

std::string plot_svg(const TrajectoryPlot& plot) {
  constexpr double kWidth = 900.0;
  constexpr double kHeight = 420.0;
  constexpr double kLeft = 70.0;
  constexpr double kRight = 150.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 50.0;
  const std::size_t n = plot.frames();
  const double duration = n > 1 ? static_cast<double>(n - 1) / plot.fps : 1.0;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const PlotSeries& s : plot.series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  for (const auto& t : plot.target) {
    if (t) {
      lo = std::min(lo, *t);
      hi = std::max(hi, *t);
    }
  }
  if (!(hi - lo > 1e-6)) {
    lo -= 0.05;
    hi += 0.05;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto sx = [&](double t) { return kLeft + pw * t / duration; };
  auto sy = [&](double v) { return kTop + ph * (hi - v) / (hi - lo); };
  auto frame_time = [&](double f) { return std::clamp(f / plot.fps, 0.0, duration); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\">" << plot.joint_name << " trajectory ("
      << kAxisNames[plot.axis] << " axis)</text>\n";

  for (std::size_t f = 0; f < n;) {
    if (!plot.target[f]) {
      ++f;
      continue;
    }
    std::size_t e = f;
    while (e + 1 < n && plot.target[e + 1]) {
      ++e;
    }
    const double x0 = sx(frame_time(static_cast<double>(f) - 0.5));
    const double x1 = sx(frame_time(static_cast<double>(e) + 0.5));
    svg << "<rect class=\"constrained-span\" x=\"" << fmt("%.2f", x0) << "\" y=\"" << kTop << "\" width=\""
        << fmt("%.2f", x1 - x0) << "\" height=\"" << ph << "\" fill=\"#f5e6c4\"/>\n";
    f = e + 1;
  }

  svg << "<g stroke=\"#444\" fill=\"none\">\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph << "\"/>\n";
  svg << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt("%.2f", sy(v) + 4) << "\" text-anchor=\"end\">"
        << fmt("%.3f", v) << "</text>\n";
  }
  const double step = duration > 10.0 ? 2.0 : (duration > 2.0 ? 1.0 : 0.25);
  for (double t = 0.0; t <= duration + 1e-9; t += step) {
    svg << "<text x=\"" << fmt("%.2f", sx(t)) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
        << fmt("%g", t) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">time (s)</text>\n";
  svg << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 16 " << kTop + ph / 2
      << ")\" text-anchor=\"middle\">" << kAxisNames[plot.axis] << " (m)</text>\n";

  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const PlotSeries& s = plot.series[i];
    svg << "<polyline class=\"" << s.name << "\" fill=\"none\" stroke=\"" << series_color(i)
        << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t f = 0; f < n; ++f) {
      svg << (f ? " " : "") << fmt("%.2f", sx(static_cast<double>(f) / plot.fps)) << ','
          << fmt("%.2f", sy(s.values[f]));
    }
    svg << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(i) + 8.0;
    svg << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 36 << "\" y2=\"" << ly
        << "\" stroke=\"" << series_color(i) << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + pw + 42 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
  }
  for (std::size_t f = 0; f < n; ++f) {
    if (plot.target[f]) {
      svg << "<circle class=\"target\" cx=\"" << fmt("%.2f", sx(static_cast<double>(f) / plot.fps)) << "\" cy=\""
          << fmt("%.2f", sy(*plot.target[f])) << "\" r=\"1.6\" fill=\"black\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

} // namespace rtk::cli
