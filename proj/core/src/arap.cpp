#include "rtk/arap.hpp"

#include "rtk/error.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace rtk {

void ArapConfig::validate() const {
  if (iterations < 0 || !(tolerance >= 0.0) || !(penalty > 0.0) || !(min_weight > 0.0)) {
    throw InputError("invalid ARAP settings: iterations >= 0, tolerance >= 0, penalty and min_weight > 0");
  }
}

std::vector<MeshEdge> laplacian_edges(const LabeledMesh& mesh, LaplacianWeights kind, double min_weight) {
  std::map<std::pair<int, int>, double> acc;
  for (const auto& f : mesh.triangles) {
    for (int c = 0; c < 3; ++c) {
      const int a = f[(c + 1) % 3];
      const int b = f[(c + 2) % 3];
      const auto key = std::minmax(a, b);
      double w = 1.0;
      if (kind == LaplacianWeights::Cotangent) {
        // Half the cotangent of the angle opposite edge (a, b).
        const Vec3 u = mesh.vertices[a] - mesh.vertices[f[c]];
        const Vec3 v = mesh.vertices[b] - mesh.vertices[f[c]];
        w = 0.5 * u.dot(v) / u.cross(v).norm();
      }
      auto [it, inserted] = acc.try_emplace(key, 0.0);
      it->second = kind == LaplacianWeights::Uniform ? 1.0 : it->second + w;
    }
  }
  std::vector<MeshEdge> out;
  out.reserve(acc.size());
  for (const auto& [key, w] : acc) {
    out.push_back({key.first, key.second, std::max(w, min_weight)});
  }
  return out;
}

namespace {

struct Penalty {
  int vertex;
  Vec3 target;
  double weight;
};

Mat3 fit_rotation(const Mat3& covariance) {
  const Eigen::JacobiSVD<Mat3> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 r = v * u.transpose();
  if (r.determinant() < 0.0) {
    u.col(2) *= -1.0;
    r = v * u.transpose();
  }
  return r;
}

class ArapSystem {
 public:
  ArapSystem(const LabeledMesh& mesh, std::vector<MeshEdge> edges, std::vector<Penalty> penalties)
      : rest_(mesh.vertices), edges_(std::move(edges)), penalties_(std::move(penalties)) {
    const auto n = static_cast<Eigen::Index>(rest_.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(edges_.size() * 4 + penalties_.size());
    for (const MeshEdge& e : edges_) {
      trips.emplace_back(e.i, e.i, e.w);
      trips.emplace_back(e.j, e.j, e.w);
      trips.emplace_back(e.i, e.j, -e.w);
      trips.emplace_back(e.j, e.i, -e.w);
    }
    for (const Penalty& p : penalties_) {
      trips.emplace_back(p.vertex, p.vertex, 0.5 * p.weight);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    solver_.compute(a);
    if (solver_.info() != Eigen::Success) {
      throw NumericalError("ARAP global system is singular");
    }
  }

  std::vector<Mat3> local_step(const std::vector<Vec3>& current) const {
    std::vector<Mat3> cov(rest_.size(), Mat3::Zero());
    for (const MeshEdge& e : edges_) {
      const Vec3 r = rest_[e.i] - rest_[e.j];
      const Vec3 d = current[e.i] - current[e.j];
      const Mat3 outer = e.w * r * d.transpose();
      cov[e.i] += outer;
      cov[e.j] += outer;
    }
    std::vector<Mat3> rot(rest_.size());
    for (std::size_t i = 0; i < rest_.size(); ++i) {
      rot[i] = fit_rotation(cov[i]);
    }
    return rot;
  }

  std::vector<Vec3> global_step(const std::vector<Mat3>& rot) const {
    const auto n = static_cast<Eigen::Index>(rest_.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, 3);
    for (const MeshEdge& e : edges_) {
      const Vec3 r = 0.5 * e.w * (rot[e.i] + rot[e.j]) * (rest_[e.i] - rest_[e.j]);
      b.row(e.i) += r.transpose();
      b.row(e.j) -= r.transpose();
    }
    for (const Penalty& p : penalties_) {
      b.row(p.vertex) += 0.5 * p.weight * p.target.transpose();
    }
    const Eigen::MatrixXd x = solver_.solve(b);
    if (solver_.info() != Eigen::Success || !x.allFinite()) {
      throw NumericalError("ARAP global solve failed");
    }
    std::vector<Vec3> out(rest_.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = x.row(i).transpose();
    }
    return out;
  }

  // Both directed half-edges of every edge contribute.
  double arap_energy(const std::vector<Vec3>& current, const std::vector<Mat3>& rot) const {
    double e = 0.0;
    for (const MeshEdge& edge : edges_) {
      const Vec3 r = rest_[edge.i] - rest_[edge.j];
      const Vec3 d = current[edge.i] - current[edge.j];
      e += edge.w * ((d - rot[edge.i] * r).squaredNorm() + (d - rot[edge.j] * r).squaredNorm());
    }
    return e;
  }

  double penalty_energy(const std::vector<Vec3>& current) const {
    double e = 0.0;
    for (const Penalty& p : penalties_) {
      e += p.weight * (current[p.vertex] - p.target).squaredNorm();
    }
    return e;
  }

 private:
  std::vector<Vec3> rest_;
  std::vector<MeshEdge> edges_;
  std::vector<Penalty> penalties_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

// Best rigid map of the control vertices onto their targets; a translation
// when the controls do not span a plane.
RigidTransform rigid_fit(const LabeledMesh& mesh, std::span<const ControlPoint> controls) {
  RigidTransform t;
  if (controls.empty()) {
    return t;
  }
  Vec3 src_mean = Vec3::Zero();
  Vec3 dst_mean = Vec3::Zero();
  for (const ControlPoint& c : controls) {
    src_mean += mesh.vertices[c.vertex];
    dst_mean += c.target;
  }
  src_mean /= static_cast<double>(controls.size());
  dst_mean /= static_cast<double>(controls.size());
  Mat3 cov = Mat3::Zero();
  for (const ControlPoint& c : controls) {
    cov += (mesh.vertices[c.vertex] - src_mean) * (c.target - dst_mean).transpose();
  }
  const Eigen::JacobiSVD<Mat3> svd(cov);
  const auto& s = svd.singularValues();
  if (controls.size() >= 3 && s[0] > 0.0 && s[1] > 1e-9 * s[0]) {
    t.rotation = fit_rotation(cov);
  }
  t.translation = dst_mean - t.rotation * src_mean;
  return t;
}

std::vector<int> component_ids(std::size_t n, const std::vector<MeshEdge>& edges) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const MeshEdge& e : edges) {
    const int a = find(e.i);
    const int b = find(e.j);
    if (a != b) {
      parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = find(static_cast<int>(i));
  }
  return out;
}

} // namespace

ArapResult arap_solve(const LabeledMesh& mesh, std::span<const ControlPoint> controls, const ArapConfig& config) {
  mesh.validate();
  config.validate();
  for (const ControlPoint& c : controls) {
    if (c.vertex < 0 || c.vertex >= static_cast<int>(mesh.vertices.size())) {
      throw InputError("control point references vertex " + std::to_string(c.vertex) + " out of range");
    }
    if (!c.target.allFinite()) {
      throw InputError("control point target for vertex " + std::to_string(c.vertex) + " is not finite");
    }
  }

  const auto edges = laplacian_edges(mesh, config.weights, config.min_weight);
  const RigidTransform init = config.rigid_init ? rigid_fit(mesh, controls) : RigidTransform{};
  std::vector<Vec3> current(mesh.vertices.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    current[i] = init.apply(mesh.vertices[i]);
  }

  std::vector<Penalty> penalties;
  penalties.reserve(controls.size());
  for (const ControlPoint& c : controls) {
    penalties.push_back({c.vertex, c.target, config.penalty});
  }
  const auto comp = component_ids(mesh.vertices.size(), edges);
  std::vector<bool> held(mesh.vertices.size(), false);
  for (const ControlPoint& c : controls) {
    held[comp[c.vertex]] = true;
  }
  for (std::size_t i = 0; i < comp.size(); ++i) {
    if (comp[i] == static_cast<int>(i) && !held[i]) {
      penalties.push_back({static_cast<int>(i), current[i], config.penalty});
    }
  }

  const ArapSystem system(mesh, edges, std::move(penalties));
  ArapResult out;
  std::vector<Mat3> rot = system.local_step(current);
  const auto record = [&]() {
    const double arap = system.arap_energy(current, rot);
    const double total = arap + system.penalty_energy(current);
    if (!std::isfinite(total)) {
      throw NumericalError("ARAP energy is not finite at iteration " + std::to_string(out.iterations));
    }
    out.arap_trace.push_back(arap);
    out.energy_trace.push_back(total);
    return total;
  };
  double energy = record();
  for (int it = 1; it <= config.iterations; ++it) {
    if (energy == 0.0) {
      break;
    }
    current = system.global_step(rot);
    rot = system.local_step(current);
    out.iterations = it;
    const double next = record();
    const double change = std::abs(energy - next) / std::max(energy, std::numeric_limits<double>::min());
    energy = next;
    if (change < config.tolerance) {
      break;
    }
  }

  out.mesh = mesh;
  out.mesh.vertices = std::move(current);
  out.rotations = std::move(rot);
  return out;
}

} // namespace rtk
