#pragma once

#include "rtk/contours.hpp"
#include "rtk/mesh.hpp"

#include <span>
#include <vector>

namespace rtk {

enum class LaplacianWeights { Cotangent, Uniform };

struct ArapConfig {
  int iterations = 10;
  // Stop once the relative energy change falls below this.
  double tolerance = 1e-6;
  // Soft-constraint weight on control vertices.
  double penalty = 1e4;
  LaplacianWeights weights = LaplacianWeights::Cotangent;
  // Cotangent weights are clamped to at least this value.
  double min_weight = 1e-8;
  // Start from the best rigid fit of the controls instead of the input pose.
  bool rigid_init = true;

  void validate() const;
};

struct MeshEdge {
  int i;
  int j;
  double w;
};

// Undirected edges with their Laplacian weights.
std::vector<MeshEdge> laplacian_edges(const LabeledMesh& mesh, LaplacianWeights kind, double min_weight = 1e-8);

struct ArapResult {
  LabeledMesh mesh;
  // Objective (ARAP term plus control penalty) with optimal rotations,
  // evaluated at the initial guess and after every global step.
  std::vector<double> energy_trace;
  // ARAP term alone, same sampling as energy_trace.
  std::vector<double> arap_trace;
  std::vector<Mat3> rotations;
  int iterations = 0;
};

// Local-global as-rigid-as-possible deformation with soft control targets.
// Connected components without a control are anchored at their first vertex.
// Throws NumericalError on a singular global system or non-finite energy.
ArapResult arap_solve(const LabeledMesh& mesh, std::span<const ControlPoint> controls, const ArapConfig& config);

} // namespace rtk
