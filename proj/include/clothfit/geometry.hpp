#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace clothfit {

using Vec3 = Eigen::Vector3d;
using Tri = std::array<std::uint32_t, 3>;

struct Aabb {
  Vec3 lo{0, 0, 0};
  Vec3 hi{0, 0, 0};

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void merge(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  // Squared distance from p to the box (0 inside).
  double sq_dist(const Vec3& p) const {
    Vec3 d = (lo - p).cwiseMax(0.0).cwiseMax(p - hi);
    return d.squaredNorm();
  }
  Vec3 extent() const { return hi - lo; }
};

// Indexed triangle mesh; the unit of reconstruction, deformation and
// evaluation. `attachment` optionally records the nearest body vertex per
// mesh vertex (filled by pose deformation).
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Tri> faces;
  std::vector<std::uint32_t> attachment;

  bool empty() const { return vertices.empty() || faces.empty(); }
  Aabb bounds() const;
  void validate() const;  // throws std::invalid_argument on bad indices / NaN
};

double point_triangle_sq_dist(const Vec3& p, const Vec3& a, const Vec3& b,
                              const Vec3& c);
double point_triangle_dist(const Vec3& p, const Vec3& a, const Vec3& b,
                           const Vec3& c);

// Exact nearest-surface queries against a triangle soup, accelerated with a
// median-split AABB tree.
class MeshDistanceQuery {
 public:
  MeshDistanceQuery() = default;
  explicit MeshDistanceQuery(const Mesh& mesh);

  bool valid() const { return !nodes_.empty(); }
  double distance(const Vec3& p) const;
  double sq_distance(const Vec3& p) const;

 private:
  struct Node {
    Aabb box;
    std::int32_t left = -1;   // -1 for leaves
    std::int32_t right = -1;
    std::uint32_t first = 0;  // leaf triangle range
    std::uint32_t count = 0;
  };
  struct TriData {
    Vec3 a, b, c;
  };

  std::int32_t build(std::uint32_t first, std::uint32_t count);

  std::vector<Node> nodes_;
  std::vector<TriData> tris_;
  std::int32_t root_ = -1;
};

std::vector<Vec3> vertex_normals(const Mesh& mesh);

// ASCII OBJ with optional "# attach i j" per-vertex attachment comments.
void save_obj(const Mesh& mesh, const std::string& path);
Mesh load_obj(const std::string& path);

// Little-endian raw blob helpers shared by the file formats.
void write_blob(const std::string& path, const void* data, size_t bytes);
std::vector<std::uint8_t> read_blob(const std::string& path);

}  // namespace clothfit
