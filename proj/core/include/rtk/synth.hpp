#pragma once

#include "rtk/camera.hpp"
#include "rtk/retarget.hpp"
#include "rtk/skeleton.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rtk {

// Scripted motion templates: "walk", "jump", "pickup-box", "touch-cone".
std::vector<std::string> synth_templates();

struct ScenarioSpec {
  std::string motion = "walk";
  double duration = 4.0;
  double fps = 30.0;
  ShapeParams source;
  ShapeParams target;
  // Standard deviation (radians) of Gaussian noise added to every source angle.
  double noise_sigma = 0.0;
  // Rotation spikes on joints that only drive a leaf (ankles, wrists, neck).
  int spike_count = 0;
  double spike_angle = 0.8;
  // Emit a contact constraint on every n-th contact frame.
  int constraint_stride = 1;
  std::uint64_t seed = 0;

  std::size_t frame_count() const;
  void validate() const;
};

struct InjectedSpike {
  std::size_t frame;
  // Joint whose angle was perturbed and the leaf joint it displaces.
  int angle_joint;
  int leaf_joint;
};

struct Scenario {
  Motion source;
  // Source before noise and spikes.
  Motion clean_source;
  // The same script performed by the target shape; satisfies every constraint.
  Motion target;
  ConstraintSet constraints;
  std::vector<InjectedSpike> spikes;
};

// Camera at (0, 1, 4) looking down -z with 1000 px focal length
// on a 1920x1080 image.
Camera synth_camera();

// Requires the default joint layout. Throws InputError for unknown templates,
// invalid specs, or shapes that cannot reach the scripted contacts.
Scenario generate(const Skeleton& skel, const ScenarioSpec& spec);

} // namespace rtk
