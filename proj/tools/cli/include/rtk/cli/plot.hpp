#pragma once

#include "rtk/retarget.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rtk::cli {

struct PlotSeries {
  std::string name;
  std::vector<double> values;
};

// One world-space coordinate of one joint over time, for several motions.
struct TrajectoryPlot {
  std::string joint_name;
  int joint = 0;
  int axis = 1;
  double fps = 30.0;
  std::vector<PlotSeries> series;
  // Constraint target on the plotted axis where the joint is constrained.
  std::vector<std::optional<double>> target;

  std::size_t frames() const {
    return target.size();
  }
  const PlotSeries* find(const std::string& name) const;
};

struct PlotInput {
  std::string name;
  const Motion* motion;
  ShapeParams beta;
};

int parse_axis(const std::string& axis);

// 3D targets contribute their coordinate directly. 2D targets are lifted to
// the depth of the last series' joint so the marker sits on the image ray.
TrajectoryPlot trajectory_plot(const Skeleton& skel, const std::vector<PlotInput>& inputs, int joint, int axis,
                               const ConstraintSet& constraints);

std::string plot_csv(const TrajectoryPlot& plot);
std::string plot_svg(const TrajectoryPlot& plot);

} // namespace rtk::cli
