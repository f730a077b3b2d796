#include "clothfit/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace clothfit {

Aabb Mesh::bounds() const {
  Aabb box;
  if (vertices.empty()) return box;
  box.lo = box.hi = vertices[0];
  for (const Vec3& v : vertices) box.expand(v);
  return box;
}

void Mesh::validate() const {
  for (const Vec3& v : vertices) {
    if (!v.allFinite()) throw std::invalid_argument("mesh vertex not finite");
  }
  for (const Tri& f : faces) {
    for (std::uint32_t i : f) {
      if (i >= vertices.size())
        throw std::invalid_argument("mesh face index out of range");
    }
  }
  if (!attachment.empty() && attachment.size() != vertices.size())
    throw std::invalid_argument("attachment size mismatch");
}

double point_triangle_sq_dist(const Vec3& p, const Vec3& a, const Vec3& b,
                              const Vec3& c) {
  // Ericson, Real-Time Collision Detection, closest point on triangle.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return ap.squaredNorm();

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return bp.squaredNorm();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (ap - v * ab).squaredNorm();
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return cp.squaredNorm();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (ap - w * ac).squaredNorm();
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (bp - w * (c - b)).squaredNorm();
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (ap - v * ab - w * ac).squaredNorm();
}

double point_triangle_dist(const Vec3& p, const Vec3& a, const Vec3& b,
                           const Vec3& c) {
  return std::sqrt(point_triangle_sq_dist(p, a, b, c));
}

MeshDistanceQuery::MeshDistanceQuery(const Mesh& mesh) {
  tris_.reserve(mesh.faces.size());
  for (const Tri& f : mesh.faces) {
    tris_.push_back({mesh.vertices[f[0]], mesh.vertices[f[1]],
                     mesh.vertices[f[2]]});
  }
  if (!tris_.empty()) {
    nodes_.reserve(2 * tris_.size());
    root_ = build(0, static_cast<std::uint32_t>(tris_.size()));
  }
}

std::int32_t MeshDistanceQuery::build(std::uint32_t first,
                                      std::uint32_t count) {
  Node node;
  node.box.lo = node.box.hi = tris_[first].a;
  for (std::uint32_t i = first; i < first + count; ++i) {
    node.box.expand(tris_[i].a);
    node.box.expand(tris_[i].b);
    node.box.expand(tris_[i].c);
  }
  if (count <= 4) {
    node.first = first;
    node.count = count;
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }
  int axis = 0;
  Vec3 ext = node.box.extent();
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  std::uint32_t mid = first + count / 2;
  std::nth_element(tris_.begin() + first, tris_.begin() + mid,
                   tris_.begin() + first + count,
                   [axis](const TriData& x, const TriData& y) {
                     double cx = x.a[axis] + x.b[axis] + x.c[axis];
                     double cy = y.a[axis] + y.b[axis] + y.c[axis];
                     return cx < cy;
                   });
  std::int32_t self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  std::int32_t l = build(first, mid - first);
  std::int32_t r = build(mid, count - (mid - first));
  nodes_[self].left = l;
  nodes_[self].right = r;
  return self;
}

double MeshDistanceQuery::sq_distance(const Vec3& p) const {
  if (root_ < 0) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  // Explicit stack, nearer child first.
  std::int32_t stack[64];
  int top = 0;
  stack[top++] = root_;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (n.box.sq_dist(p) >= best) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
        best = std::min(best,
                        point_triangle_sq_dist(p, tris_[i].a, tris_[i].b,
                                               tris_[i].c));
      }
    } else {
      double dl = nodes_[n.left].box.sq_dist(p);
      double dr = nodes_[n.right].box.sq_dist(p);
      if (dl < dr) {
        if (dr < best) stack[top++] = n.right;
        if (dl < best) stack[top++] = n.left;
      } else {
        if (dl < best) stack[top++] = n.left;
        if (dr < best) stack[top++] = n.right;
      }
    }
  }
  return best;
}

double MeshDistanceQuery::distance(const Vec3& p) const {
  return std::sqrt(sq_distance(p));
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
  for (const Tri& f : mesh.faces) {
    const Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                       .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    normals[f[0]] += n;  // area-weighted
    normals[f[1]] += n;
    normals[f[2]] += n;
  }
  for (Vec3& n : normals) {
    double len = n.norm();
    if (len > 1e-30) n /= len;
  }
  return normals;
}

void save_obj(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (size_t i = 0; i < mesh.attachment.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "# attach %zu %u\n", i,
                  mesh.attachment[i]);
    out << buf;
  }
  for (const Tri& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %u %u %u\n", f[0] + 1, f[1] + 1,
                  f[2] + 1);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Mesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  Mesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) {
      Vec3 v;
      if (std::sscanf(line.c_str(), "v %lf %lf %lf", &v.x(), &v.y(), &v.z()) ==
          3)
        mesh.vertices.push_back(v);
    } else if (line.rfind("f ", 0) == 0) {
      unsigned a, b, c;
      if (std::sscanf(line.c_str(), "f %u %u %u", &a, &b, &c) == 3)
        mesh.faces.push_back({a - 1, b - 1, c - 1});
    } else if (line.rfind("# attach ", 0) == 0) {
      size_t i;
      unsigned j;
      if (std::sscanf(line.c_str(), "# attach %zu %u", &i, &j) == 2) {
        if (mesh.attachment.size() <= i) mesh.attachment.resize(i + 1, 0);
        mesh.attachment[i] = j;
      }
    }
  }
  mesh.validate();
  return mesh;
}

void write_blob(const std::string& path, const void* data, size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::uint8_t> read_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::uint8_t> data(static_cast<size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!in) throw std::runtime_error("read failed: " + path);
  return data;
}

}  // namespace clothfit
