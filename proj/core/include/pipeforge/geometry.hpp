#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pipeforge/vec3.hpp"

namespace pipeforge {

struct Pose {
  Vec3 position;
  Quat orientation;

  static Pose translation(const Vec3& p) { return {p, Quat::identity()}; }

  Vec3 apply(const Vec3& local) const { return orientation.rotate(local) + position; }
  Vec3 apply_inverse(const Vec3& world) const {
    return orientation.conjugate().rotate(world - position);
  }
  Vec3 rotate(const Vec3& v) const { return orientation.rotate(v); }
  Vec3 rotate_inverse(const Vec3& v) const { return orientation.conjugate().rotate(v); }
};

/// Throws InvalidArgument unless the orientation is unit within 1e-9.
void validate_pose(const Pose& pose);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Throws InvalidArgument on out-of-range indices or faces with area <= 1e-12 m^2.
void validate_mesh(const TriangleMesh& mesh);

struct Aabb {
  Vec3 min;
  Vec3 max;

  Aabb inflated(double margin) const {
    const Vec3 m{margin, margin, margin};
    return {min - m, max + m};
  }
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
};

struct ContactPoint {
  Vec3 pt;
  Vec3 n;  // unit, pointing away from B's surface toward A
};

struct ContactSet {
  std::vector<ContactPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Open tube of the given radius around the local x axis, centered at the origin.
/// Faces are wound so normals point away from the axis.
TriangleMesh make_cylinder_mesh(double radius, double length, int radial_segments,
                                int axial_segments);

/// Closed thick-walled pipe: bore, shell and the two annular end caps, with outward
/// normals of the wall solid (the bore faces the axis).
TriangleMesh make_pipe_mesh(double inner_radius, double outer_radius, double length,
                            int radial_segments, int axial_segments);

/// Flat disc in the local y-z plane, normal +x.
TriangleMesh make_disc_mesh(double radius, int radial_segments);

Aabb mesh_aabb(const TriangleMesh& mesh, const Pose& pose);

bool broad_phase(const Aabb& a, const Aabb& b);

/// Mesh plus the acceleration data the queries need: a triangle BVH, unique edges,
/// and per-face, per-vertex and per-edge normals. Immutable after construction.
class CollisionShape {
 public:
  explicit CollisionShape(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  std::span<const Vec3> face_normals() const { return face_normals_; }
  std::span<const Vec3> vertex_normals() const { return vertex_normals_; }

  struct Edge {
    std::uint32_t a;
    std::uint32_t b;
    Vec3 normal;
  };
  std::span<const Edge> edges() const { return edges_; }
  /// Indices into edges() for the three sides of each face.
  std::span<const std::array<std::uint32_t, 3>> face_edges() const { return face_edges_; }

  struct Node {
    Aabb box;
    std::uint32_t first;  // leaf: first entry in order(); inner: left child
    std::uint32_t count;  // 0 for inner nodes
    std::uint32_t right;
  };
  std::span<const Node> nodes() const { return nodes_; }
  std::span<const std::uint32_t> order() const { return order_; }
  const Aabb& face_box(std::uint32_t face) const { return face_boxes_[face]; }

  /// Calls visit(face) for every face whose local-frame box overlaps `box`.
  template <typename Visit>
  void query(const Aabb& box, Visit&& visit) const;

 private:
  std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Aabb>& boxes,
                      std::vector<Vec3>& centers);

  TriangleMesh mesh_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;
  std::vector<Edge> edges_;
  std::vector<std::array<std::uint32_t, 3>> face_edges_;
  std::vector<Aabb> face_boxes_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

template <typename Visit>
void CollisionShape::query(const Aabb& box, Visit&& visit) const {
  if (nodes_.empty()) return;
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!broad_phase(node.box, box)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = 0; i < node.count; ++i) visit(order_[node.first + i]);
    } else {
      stack[top++] = node.first;
      stack[top++] = node.right;
    }
  }
}

/// All points where the surfaces of A and B come within proximity_tol of each other,
/// from vertex-triangle, edge-edge and edge-triangle crossing pairs. Normals are B's
/// surface normal at the contact. Results are in the world frame.
ContactSet narrow_phase_contacts(const CollisionShape& a, const Pose& pose_a,
                                 const CollisionShape& b, const Pose& pose_b,
                                 double proximity_tol);
ContactSet narrow_phase_contacts(const TriangleMesh& a, const Pose& pose_a,
                                 const TriangleMesh& b, const Pose& pose_b,
                                 double proximity_tol);

/// Nearest contact to `handler_pos`; ties go to the lowest index. Throws EmptyContacts.
const ContactPoint& closest_contact(const ContactSet& contacts, const Vec3& handler_pos);

struct SceneObject {
  std::shared_ptr<const CollisionShape> shape;
  Pose pose;
  int id = 0;
};

struct RayHit {
  Vec3 point;
  double distance = 0.0;
  int object_id = 0;
};

/// Nearest hit with distance > 1e-9 over all objects. `dir` must be unit within 1e-9.
std::optional<RayHit> ray_cast(const Vec3& origin, const Vec3& dir,
                               std::span<const SceneObject> scene);

/// Möller-Trumbore; returns the ray parameter of the hit, if any.
std::optional<double> intersect_ray_triangle(const Vec3& origin, const Vec3& dir,
                                             const Vec3& v0, const Vec3& v1, const Vec3& v2);

/// Deterministic spiral of n_ray unit directions on the cap of half-angle max_half_angle
/// around (toward - origin). The first direction is the axis itself.
std::vector<Vec3> ray_fan(const Vec3& origin, const Vec3& toward, int n_ray,
                          double max_half_angle);

/// Orthonormal (u, v) completing `axis` (unit) to a right-handed frame.
std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& axis);

/// Least-squares plane normal of `points`: right-singular vector of the centered point
/// matrix with the smallest singular value, signed to face orient_toward.
/// Throws DegenerateGeometry for fewer than 3 points or collinear input.
Vec3 fit_plane_normal_svd(std::span<const Vec3> points, const Vec3& orient_toward);

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Eigenvalues ascending; eigenvectors are the columns of `vectors`.
struct SymmetricEigen3 {
  std::array<double, 3> values;
  std::array<Vec3, 3> vectors;
};
SymmetricEigen3 jacobi_eigen_symmetric(const std::array<std::array<double, 3>, 3>& m,
                                       double tolerance = 1e-12, int max_sweeps = 50);

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Closest points between segments p0-p1 and q0-q1.
std::pair<Vec3, Vec3> closest_points_segments(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                              const Vec3& q1);

}  // namespace pipeforge
