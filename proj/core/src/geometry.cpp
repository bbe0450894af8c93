#include "pipeforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

#include "pipeforge/errors.hpp"

namespace pipeforge {

namespace {

constexpr double kUnitTol = 1e-9;

void add_facing(TriangleMesh& mesh, std::uint32_t a, std::uint32_t b, std::uint32_t c,
                const Vec3& facing) {
  const auto& v = mesh.vertices;
  const Vec3 n = (v[b] - v[a]).cross(v[c] - v[a]);
  if (n.dot(facing) >= 0.0) {
    mesh.triangles.push_back({a, b, c});
  } else {
    mesh.triangles.push_back({a, c, b});
  }
}

void check_tube_args(double radius, double length, int radial_segments, int axial_segments) {
  if (!(radius > 0.0) || !(length > 0.0)) {
    throw InvalidArgument("cylinder radius and length must be positive");
  }
  if (radial_segments < 3 || axial_segments < 1) {
    throw InvalidArgument("cylinder needs >= 3 radial and >= 1 axial segments");
  }
}

// Appends a ring grid of (axial+1) x radial vertices; returns the first index.
std::uint32_t add_tube_vertices(TriangleMesh& mesh, double radius, double length,
                                int radial_segments, int axial_segments) {
  const auto first = static_cast<std::uint32_t>(mesh.vertices.size());
  for (int j = 0; j <= axial_segments; ++j) {
    const double x = -length / 2.0 + length * j / axial_segments;
    for (int i = 0; i < radial_segments; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / radial_segments;
      mesh.vertices.push_back({x, radius * std::cos(theta), radius * std::sin(theta)});
    }
  }
  return first;
}

// outward = +1 faces away from the axis, -1 toward it.
void add_tube_faces(TriangleMesh& mesh, std::uint32_t first, int radial_segments,
                    int axial_segments, double outward) {
  const auto r = static_cast<std::uint32_t>(radial_segments);
  for (std::uint32_t j = 0; j < static_cast<std::uint32_t>(axial_segments); ++j) {
    for (std::uint32_t i = 0; i < r; ++i) {
      const std::uint32_t i1 = (i + 1) % r;
      const std::uint32_t v00 = first + j * r + i;
      const std::uint32_t v01 = first + j * r + i1;
      const std::uint32_t v10 = first + (j + 1) * r + i;
      const std::uint32_t v11 = first + (j + 1) * r + i1;
      const Vec3 mid = (mesh.vertices[v00] + mesh.vertices[v11]) * 0.5;
      const Vec3 radial = Vec3{0.0, mid.y, mid.z} * outward;
      add_facing(mesh, v00, v01, v10, radial);
      add_facing(mesh, v01, v11, v10, radial);
    }
  }
}

Aabb triangle_box(const Vec3& a, const Vec3& b, const Vec3& c) {
  return {component_min(a, component_min(b, c)), component_max(a, component_max(b, c))};
}

double volume(const Aabb& box) {
  const Vec3 e = box.max - box.min;
  return e.x * e.y * e.z;
}

Aabb merge(const Aabb& a, const Aabb& b) {
  return {component_min(a.min, b.min), component_max(a.max, b.max)};
}

std::uint64_t pair_key(std::uint64_t kind, std::uint64_t a, std::uint64_t b) {
  return (kind << 60) | (a << 30) | b;
}

// Segment p0-p1 against triangle; returns the crossing point.
std::optional<Vec3> segment_triangle(const Vec3& p0, const Vec3& p1, const Vec3& a,
                                     const Vec3& b, const Vec3& c) {
  const Vec3 d = p1 - p0;
  const double len = d.norm();
  if (len < 1e-15) return std::nullopt;
  const Vec3 dir = d / len;
  const auto t = intersect_ray_triangle(p0, dir, a, b, c);
  if (!t || *t > len) return std::nullopt;
  return p0 + dir * *t;
}

bool ray_box(const Vec3& origin, const Vec3& inv_dir, const Aabb& box, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    double near = (box.min[k] - origin[k]) * inv_dir[k];
    double far = (box.max[k] - origin[k]) * inv_dir[k];
    if (std::isnan(near) || std::isnan(far)) {
      // Ray parallel to the slab and lying on its boundary plane.
      if (origin[k] < box.min[k] || origin[k] > box.max[k]) return false;
      continue;
    }
    if (near > far) std::swap(near, far);
    t0 = std::max(t0, near);
    t1 = std::min(t1, far);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

void validate_pose(const Pose& pose) {
  if (std::abs(pose.orientation.norm() - 1.0) > kUnitTol) {
    throw InvalidArgument("pose orientation is not a unit quaternion");
  }
  if (!pose.position.is_finite()) throw InvalidArgument("pose position is not finite");
}

void validate_mesh(const TriangleMesh& mesh) {
  const auto n = mesh.vertices.size();
  for (const auto& tri : mesh.triangles) {
    for (auto idx : tri) {
      if (idx >= n) throw InvalidArgument("triangle index out of range");
    }
    const Vec3& a = mesh.vertices[tri[0]];
    const double area = 0.5 * (mesh.vertices[tri[1]] - a).cross(mesh.vertices[tri[2]] - a).norm();
    if (!(area > 1e-12)) throw InvalidArgument("degenerate triangle (area <= 1e-12 m^2)");
  }
  for (const auto& v : mesh.vertices) {
    if (!v.is_finite()) throw InvalidArgument("non-finite vertex");
  }
}

TriangleMesh make_cylinder_mesh(double radius, double length, int radial_segments,
                                int axial_segments) {
  check_tube_args(radius, length, radial_segments, axial_segments);
  TriangleMesh mesh;
  const auto first = add_tube_vertices(mesh, radius, length, radial_segments, axial_segments);
  add_tube_faces(mesh, first, radial_segments, axial_segments, 1.0);
  return mesh;
}

TriangleMesh make_pipe_mesh(double inner_radius, double outer_radius, double length,
                            int radial_segments, int axial_segments) {
  check_tube_args(inner_radius, length, radial_segments, axial_segments);
  if (!(outer_radius > inner_radius)) {
    throw InvalidArgument("pipe outer radius must exceed inner radius");
  }
  TriangleMesh mesh;
  const auto bore = add_tube_vertices(mesh, inner_radius, length, radial_segments, axial_segments);
  const auto shell =
      add_tube_vertices(mesh, outer_radius, length, radial_segments, axial_segments);
  add_tube_faces(mesh, bore, radial_segments, axial_segments, -1.0);
  add_tube_faces(mesh, shell, radial_segments, axial_segments, 1.0);

  const auto r = static_cast<std::uint32_t>(radial_segments);
  const auto last_ring = static_cast<std::uint32_t>(axial_segments) * r;
  for (const auto& [ring, facing] :
       {std::pair{0u, Vec3{-1.0, 0.0, 0.0}}, std::pair{last_ring, Vec3{1.0, 0.0, 0.0}}}) {
    for (std::uint32_t i = 0; i < r; ++i) {
      const std::uint32_t i1 = (i + 1) % r;
      const std::uint32_t b0 = bore + ring + i;
      const std::uint32_t b1 = bore + ring + i1;
      const std::uint32_t s0 = shell + ring + i;
      const std::uint32_t s1 = shell + ring + i1;
      add_facing(mesh, b0, s0, b1, facing);
      add_facing(mesh, b1, s0, s1, facing);
    }
  }
  return mesh;
}

TriangleMesh make_disc_mesh(double radius, int radial_segments) {
  if (!(radius > 0.0) || radial_segments < 3) {
    throw InvalidArgument("disc needs positive radius and >= 3 segments");
  }
  TriangleMesh mesh;
  mesh.vertices.push_back({0.0, 0.0, 0.0});
  for (int i = 0; i < radial_segments; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / radial_segments;
    mesh.vertices.push_back({0.0, radius * std::cos(theta), radius * std::sin(theta)});
  }
  const auto r = static_cast<std::uint32_t>(radial_segments);
  for (std::uint32_t i = 0; i < r; ++i) {
    add_facing(mesh, 0, 1 + i, 1 + (i + 1) % r, {1.0, 0.0, 0.0});
  }
  return mesh;
}

Aabb mesh_aabb(const TriangleMesh& mesh, const Pose& pose) {
  if (mesh.vertices.empty()) return {pose.position, pose.position};
  Aabb box{pose.apply(mesh.vertices.front()), pose.apply(mesh.vertices.front())};
  for (const auto& v : mesh.vertices) {
    const Vec3 w = pose.apply(v);
    box.min = component_min(box.min, w);
    box.max = component_max(box.max, w);
  }
  return box;
}

bool broad_phase(const Aabb& a, const Aabb& b) {
  return a.min.x <= b.max.x && b.min.x <= a.max.x && a.min.y <= b.max.y && b.min.y <= a.max.y &&
         a.min.z <= b.max.z && b.min.z <= a.max.z;
}

CollisionShape::CollisionShape(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  validate_mesh(mesh_);
  const auto& verts = mesh_.vertices;
  const auto& tris = mesh_.triangles;

  face_normals_.reserve(tris.size());
  vertex_normals_.assign(verts.size(), Vec3{});
  for (const auto& t : tris) {
    const Vec3 cross = (verts[t[1]] - verts[t[0]]).cross(verts[t[2]] - verts[t[0]]);
    face_normals_.push_back(cross.normalized());
    for (auto idx : t) vertex_normals_[idx] += cross;  // area weighted
  }
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const double len = vertex_normals_[i].norm();
    vertex_normals_[i] = len > 0.0 ? vertex_normals_[i] / len : Vec3{1.0, 0.0, 0.0};
  }

  std::unordered_map<std::uint64_t, std::uint32_t> edge_ids;
  face_edges_.resize(tris.size());
  for (std::size_t f = 0; f < tris.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      std::uint32_t a = tris[f][k];
      std::uint32_t b = tris[f][(k + 1) % 3];
      if (a > b) std::swap(a, b);
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
      auto [it, inserted] = edge_ids.try_emplace(key, static_cast<std::uint32_t>(edges_.size()));
      if (inserted) edges_.push_back({a, b, Vec3{}});
      edges_[it->second].normal += face_normals_[f];
      face_edges_[f][k] = it->second;
    }
  }
  for (auto& e : edges_) {
    const double len = e.normal.norm();
    e.normal = len > 1e-12 ? e.normal / len : vertex_normals_[e.a];
  }

  std::vector<Aabb> boxes;
  std::vector<Vec3> centers;
  boxes.reserve(tris.size());
  centers.reserve(tris.size());
  for (const auto& t : tris) {
    boxes.push_back(triangle_box(verts[t[0]], verts[t[1]], verts[t[2]]));
    centers.push_back((verts[t[0]] + verts[t[1]] + verts[t[2]]) / 3.0);
  }
  order_.resize(tris.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!tris.empty()) build(0, static_cast<std::uint32_t>(tris.size()), boxes, centers);
  face_boxes_ = std::move(boxes);
}

std::uint32_t CollisionShape::build(std::uint32_t begin, std::uint32_t end,
                                    std::vector<Aabb>& boxes, std::vector<Vec3>& centers) {
  constexpr std::uint32_t kLeafSize = 4;
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Aabb box = boxes[order_[begin]];
  Aabb center_box{centers[order_[begin]], centers[order_[begin]]};
  for (std::uint32_t i = begin; i < end; ++i) {
    box = merge(box, boxes[order_[i]]);
    center_box.min = component_min(center_box.min, centers[order_[i]]);
    center_box.max = component_max(center_box.max, centers[order_[i]]);
  }
  if (end - begin <= kLeafSize) {
    nodes_[index] = {box, begin, end - begin, 0};
    return index;
  }
  const Vec3 extent = center_box.max - center_box.min;
  int axis = 0;
  if (extent.y > extent[axis]) axis = 1;
  if (extent.z > extent[axis]) axis = 2;
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centers[a][axis] != centers[b][axis]) {
                       return centers[a][axis] < centers[b][axis];
                     }
                     return a < b;
                   });
  const std::uint32_t left = build(begin, mid, boxes, centers);
  const std::uint32_t right = build(mid, end, boxes, centers);
  nodes_[index] = {box, left, 0, right};
  return index;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection, 5.1.5).
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

std::pair<Vec3, Vec3> closest_points_segments(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                              const Vec3& q1) {
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.dot(d1);
  const double e = d2.dot(d2);
  const double f = d2.dot(r);
  constexpr double kEps = 1e-18;
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) return {p0, q0};
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return {p0 + d1 * s, q0 + d2 * t};
}

std::optional<double> intersect_ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& v0,
                                             const Vec3& v1, const Vec3& v2) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - v0;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t < 0.0) return std::nullopt;
  return t;
}

namespace {

bool separated_by_plane(const Vec3& n, const Vec3& on_plane, const Vec3& p0, const Vec3& p1,
                        const Vec3& p2, double tol) {
  const double d0 = n.dot(p0 - on_plane);
  const double d1 = n.dot(p1 - on_plane);
  const double d2 = n.dot(p2 - on_plane);
  return (d0 > tol && d1 > tol && d2 > tol) || (d0 < -tol && d1 < -tol && d2 < -tol);
}

}  // namespace

ContactSet narrow_phase_contacts(const CollisionShape& a, const Pose& pose_a,
                                 const CollisionShape& b, const Pose& pose_b,
                                 double proximity_tol) {
  ContactSet out;
  const auto& mesh_a = a.mesh();
  const auto& mesh_b = b.mesh();
  if (mesh_a.triangles.empty() || mesh_b.triangles.empty()) return out;

  // Work in B's local frame.
  std::vector<Vec3> va(mesh_a.vertices.size());
  Aabb box_a{};
  for (std::size_t i = 0; i < va.size(); ++i) {
    va[i] = pose_b.apply_inverse(pose_a.apply(mesh_a.vertices[i]));
    if (i == 0) {
      box_a = {va[0], va[0]};
    } else {
      box_a.min = component_min(box_a.min, va[i]);
      box_a.max = component_max(box_a.max, va[i]);
    }
  }
  if (!broad_phase(box_a.inflated(proximity_tol), b.nodes()[0].box)) return out;

  const auto& vb = mesh_b.vertices;
  const auto b_normals = b.face_normals();
  const auto b_vertex_normals = b.vertex_normals();
  const auto a_edges = a.edges();
  const auto b_edges = b.edges();
  const auto a_face_edges = a.face_edges();
  const auto b_face_edges = b.face_edges();

  std::unordered_set<std::uint64_t> seen;
  auto emit = [&](std::uint64_t key, const Vec3& local_pt, const Vec3& local_n) {
    if (!seen.insert(key).second) return;
    out.points.push_back({pose_b.apply(local_pt), pose_b.rotate(local_n).normalized()});
  };
  const double tol2 = proximity_tol * proximity_tol;
  const auto a_normals = a.face_normals();

  // Refit A's hierarchy in B's frame; children always follow their parent.
  const auto a_nodes = a.nodes();
  const auto a_order = a.order();
  std::vector<Aabb> a_boxes(a_nodes.size());
  for (std::size_t i = a_nodes.size(); i-- > 0;) {
    const auto& node = a_nodes[i];
    if (node.count > 0) {
      const auto& t0 = mesh_a.triangles[a_order[node.first]];
      Aabb box = triangle_box(va[t0[0]], va[t0[1]], va[t0[2]]);
      for (std::uint32_t k = 1; k < node.count; ++k) {
        const auto& t = mesh_a.triangles[a_order[node.first + k]];
        box = merge(box, triangle_box(va[t[0]], va[t[1]], va[t[2]]));
      }
      a_boxes[i] = box.inflated(proximity_tol);
    } else {
      a_boxes[i] = merge(a_boxes[node.first], a_boxes[node.right]);
    }
  }

  auto test_pair = [&](std::uint32_t fa, std::uint32_t fb) {
    const auto& ta = mesh_a.triangles[fa];
    const Vec3& a0 = va[ta[0]];
    const Vec3& a1 = va[ta[1]];
    const Vec3& a2 = va[ta[2]];
    const Vec3 na = pose_b.rotate_inverse(pose_a.rotate(a_normals[fa]));
    const auto& tb = mesh_b.triangles[fb];
    const Vec3& b0 = vb[tb[0]];
    const Vec3& b1 = vb[tb[1]];
    const Vec3& b2 = vb[tb[2]];
    // Either triangle strictly beyond tol on one side of the other's plane rules out
    // every pair test below.
    if (separated_by_plane(b_normals[fb], b0, a0, a1, a2, proximity_tol) ||
        separated_by_plane(na, a0, b0, b1, b2, proximity_tol)) {
      return;
    }

    for (auto ia : ta) {
      const Vec3 q = closest_point_on_triangle(va[ia], b0, b1, b2);
      if ((q - va[ia]).squared_norm() <= tol2) emit(pair_key(0, ia, fb), q, b_normals[fb]);
    }
    for (auto ib : tb) {
      const Vec3 q = closest_point_on_triangle(vb[ib], a0, a1, a2);
      if ((q - vb[ib]).squared_norm() <= tol2) {
        emit(pair_key(4, ib, 0), vb[ib], b_vertex_normals[ib]);
      }
    }
    for (auto ea : a_face_edges[fa]) {
      const Vec3& p0 = va[a_edges[ea].a];
      const Vec3& p1 = va[a_edges[ea].b];
      for (auto eb : b_face_edges[fb]) {
        const auto [pa, pb] = closest_points_segments(p0, p1, vb[b_edges[eb].a], vb[b_edges[eb].b]);
        if ((pa - pb).squared_norm() <= tol2) emit(pair_key(1, ea, eb), pb, b_edges[eb].normal);
      }
      if (auto hit = segment_triangle(p0, p1, b0, b1, b2)) {
        emit(pair_key(2, ea, fb), *hit, b_normals[fb]);
      }
    }
    for (auto eb : b_face_edges[fb]) {
      if (auto hit = segment_triangle(vb[b_edges[eb].a], vb[b_edges[eb].b], a0, a1, a2)) {
        emit(pair_key(3, eb, fa), *hit, b_edges[eb].normal);
      }
    }
  };

  const auto b_nodes = b.nodes();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [ia, ib] = stack.back();
    stack.pop_back();
    const auto& na = a_nodes[ia];
    const auto& nb = b_nodes[ib];
    if (!broad_phase(a_boxes[ia], nb.box)) continue;
    if (na.count > 0 && nb.count > 0) {
      for (std::uint32_t i = 0; i < na.count; ++i) {
        const std::uint32_t fa = a_order[na.first + i];
        const auto& ta = mesh_a.triangles[fa];
        const Aabb box = triangle_box(va[ta[0]], va[ta[1]], va[ta[2]]).inflated(proximity_tol);
        for (std::uint32_t j = 0; j < nb.count; ++j) {
          const std::uint32_t fb = b.order()[nb.first + j];
          if (broad_phase(box, b.face_box(fb))) test_pair(fa, fb);
        }
      }
      continue;
    }
    // Descend the larger box; leaves never split.
    const bool split_a = nb.count > 0 || (na.count == 0 && volume(a_boxes[ia]) >= volume(nb.box));
    if (split_a) {
      stack.push_back({na.first, ib});
      stack.push_back({na.right, ib});
    } else {
      stack.push_back({ia, nb.first});
      stack.push_back({ia, nb.right});
    }
  }
  return out;
}

ContactSet narrow_phase_contacts(const TriangleMesh& a, const Pose& pose_a,
                                 const TriangleMesh& b, const Pose& pose_b,
                                 double proximity_tol) {
  return narrow_phase_contacts(CollisionShape(a), pose_a, CollisionShape(b), pose_b,
                               proximity_tol);
}

const ContactPoint& closest_contact(const ContactSet& contacts, const Vec3& handler_pos) {
  if (contacts.empty()) throw EmptyContacts("closest_contact on an empty contact set");
  std::size_t best = 0;
  double best_d2 = (contacts.points[0].pt - handler_pos).squared_norm();
  for (std::size_t i = 1; i < contacts.size(); ++i) {
    const double d2 = (contacts.points[i].pt - handler_pos).squared_norm();
    if (d2 < best_d2) {
      best = i;
      best_d2 = d2;
    }
  }
  return contacts.points[best];
}

std::optional<RayHit> ray_cast(const Vec3& origin, const Vec3& dir,
                               std::span<const SceneObject> scene) {
  if (std::abs(dir.norm() - 1.0) > kUnitTol) throw InvalidArgument("ray direction is not unit");
  constexpr double kMinDistance = 1e-9;
  std::optional<RayHit> best;
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto& object : scene) {
    const CollisionShape& shape = *object.shape;
    if (shape.nodes().empty()) continue;
    const Vec3 o = object.pose.apply_inverse(origin);
    const Vec3 d = object.pose.rotate_inverse(dir);
    const Vec3 inv{1.0 / d.x, 1.0 / d.y, 1.0 / d.z};
    const auto nodes = shape.nodes();
    const auto order = shape.order();
    const auto& mesh = shape.mesh();
    std::uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    bool hit_here = false;
    while (top > 0) {
      const auto& node = nodes[stack[--top]];
      if (!ray_box(o, inv, node.box, best_t)) continue;
      if (node.count == 0) {
        stack[top++] = node.first;
        stack[top++] = node.right;
        continue;
      }
      for (std::uint32_t i = 0; i < node.count; ++i) {
        const auto& t = mesh.triangles[order[node.first + i]];
        const auto hit = intersect_ray_triangle(o, d, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                                mesh.vertices[t[2]]);
        if (hit && *hit > kMinDistance && *hit < best_t) {
          best_t = *hit;
          hit_here = true;
        }
      }
    }
    if (hit_here) best = RayHit{origin + dir * best_t, best_t, object.id};
  }
  return best;
}

std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& axis) {
  const Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const Vec3 u = helper.cross(axis).normalized();
  const Vec3 v = axis.cross(u).normalized();
  return {u, v};
}

std::vector<Vec3> ray_fan(const Vec3& origin, const Vec3& toward, int n_ray,
                          double max_half_angle) {
  const Vec3 axis_raw = toward - origin;
  const double len = axis_raw.norm();
  if (!(len > 1e-12)) throw InvalidArgument("ray fan axis is zero");
  if (n_ray < 4) throw InvalidArgument("ray fan needs at least 4 rays");
  const Vec3 axis = axis_raw / len;
  const auto [u, v] = orthonormal_basis(axis);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));

  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(n_ray));
  dirs.push_back(axis);
  for (int i = 1; i < n_ray; ++i) {
    const double polar = max_half_angle * std::sqrt(static_cast<double>(i) / (n_ray - 1));
    const double azimuth = golden * i;
    const Vec3 d = axis * std::cos(polar) +
                   (u * std::cos(azimuth) + v * std::sin(azimuth)) * std::sin(polar);
    dirs.push_back(d.normalized());
  }
  return dirs;
}

SymmetricEigen3 jacobi_eigen_symmetric(const std::array<std::array<double, 3>, 3>& m,
                                       double tolerance, int max_sweeps) {
  auto a = m;
  std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  double frob2 = 0.0;
  for (const auto& row : a) {
    for (double x : row) frob2 += x * x;
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (off <= tolerance * tolerance * frob2 || off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // a <- J^T a J with J the (p, q) rotation.
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::array<int, 3> idx{0, 1, 2};
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return a[i][i] < a[j][j]; });
  SymmetricEigen3 out{};
  for (int k = 0; k < 3; ++k) {
    const int c = idx[k];
    out.values[k] = a[c][c];
    out.vectors[k] = Vec3{v[0][c], v[1][c], v[2][c]}.normalized();
  }
  return out;
}

Vec3 fit_plane_normal_svd(std::span<const Vec3> points, const Vec3& orient_toward) {
  if (points.size() < 3) throw DegenerateGeometry("plane fit needs at least 3 points");
  Vec3 centroid{};
  for (const auto& p : points) centroid += p;
  centroid = centroid / static_cast<double>(points.size());

  // A^T A of the centered point matrix A; its eigenvectors are A's right-singular vectors.
  std::array<std::array<double, 3>, 3> ata{};
  for (const auto& p : points) {
    const Vec3 c = p - centroid;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) ata[r][k] += c[r] * c[k];
    }
  }
  const auto eig = jacobi_eigen_symmetric(ata);
  const double largest = eig.values[2];
  if (!(largest > 0.0) || eig.values[1] <= 1e-12 * largest) {
    throw DegenerateGeometry("plane fit points are collinear or coincident");
  }
  Vec3 n = eig.vectors[0];
  if (n.dot(orient_toward - centroid) < 0.0) n = -n;
  return n.normalized();
}

}  // namespace pipeforge
