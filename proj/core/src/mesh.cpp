#include "rtk/mesh.hpp"

#include "rtk/error.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace rtk {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

void LabeledMesh::validate() const {
  const auto n = static_cast<int>(vertices.size());
  if (n == 0) {
    throw InputError("mesh has no vertices");
  }
  for (int i = 0; i < n; ++i) {
    if (!vertices[i].allFinite()) {
      throw InputError("mesh vertex " + std::to_string(i) + " is not finite");
    }
  }
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int v : triangles[t]) {
      if (v < 0 || v >= n) {
        throw InputError("triangle " + std::to_string(t) + " references vertex " + std::to_string(v) +
                         " out of range");
      }
    }
    const auto& f = triangles[t];
    if (!(triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]) > 1e-12)) {
      throw InputError("triangle " + std::to_string(t) + " is degenerate");
    }
  }
  if (labels.size() != vertices.size()) {
    throw InputError("mesh has " + std::to_string(vertices.size()) + " vertices but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > kPartCount) {
      throw InputError("vertex " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                       "; expected a part id in 1.." + std::to_string(kPartCount));
    }
  }
}

LabeledMesh read_labeled_mesh(const std::filesystem::path& obj, const std::filesystem::path& labels) {
  std::ifstream in(obj);
  if (!in) {
    throw InputError("cannot open mesh file " + obj.string());
  }
  LabeledMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') {
      continue;
    }
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z())) {
        throw InputError(obj.string() + ":" + std::to_string(line_no) + ": malformed vertex");
      }
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ss >> tok) {
        int idx = 0;
        try {
          idx = std::stoi(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw InputError(obj.string() + ":" + std::to_string(line_no) + ": malformed face index '" + tok + "'");
        }
        const int resolved = idx > 0 ? idx - 1 : static_cast<int>(mesh.vertices.size()) + idx;
        poly.push_back(resolved);
      }
      if (poly.size() < 3) {
        throw InputError(obj.string() + ":" + std::to_string(line_no) + ": face with fewer than 3 vertices");
      }
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
        mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
      }
    }
  }

  std::ifstream lab(labels);
  if (!lab) {
    throw InputError("cannot open label file " + labels.string());
  }
  int v;
  while (lab >> v) {
    mesh.labels.push_back(v);
  }
  if (!lab.eof()) {
    throw InputError("label file " + labels.string() + " contains a non-integer entry");
  }
  mesh.validate();
  return mesh;
}

void write_obj(const LabeledMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const Vec3& p : mesh.vertices) {
    out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  for (const auto& f : mesh.triangles) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

void write_labels(const LabeledMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  for (int l : mesh.labels) {
    out << l << '\n';
  }
}

} // namespace rtk
