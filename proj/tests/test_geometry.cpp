#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "pipe_oracle.hpp"
#include "pipeforge/config.hpp"
#include "pipeforge/errors.hpp"
#include "pipeforge/geometry.hpp"

using namespace pipeforge;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = {g(rng), g(rng), g(rng)};
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Plane intersection plus signed-area inside test; shares no code with the library.
std::optional<double> brute_ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a,
                                         const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-14) return std::nullopt;
  const double t = n.dot(a - o) / denom;
  if (t <= 1e-9) return std::nullopt;
  const Vec3 p = o + d * t;
  const double s0 = (b - a).cross(p - a).dot(n);
  const double s1 = (c - b).cross(p - b).dot(n);
  const double s2 = (a - c).cross(p - c).dot(n);
  const double eps = -1e-12 * n.squared_norm();
  if (s0 >= eps && s1 >= eps && s2 >= eps) return t;
  return std::nullopt;
}

double angle_deg(const Vec3& a, const Vec3& b) { return angle_between(a, b) / kDeg; }

}  // namespace

TEST(Mesh, CylinderCountsAndRadius) {
  const TriangleMesh m = make_cylinder_mesh(0.05, 0.6, 48, 8);
  EXPECT_EQ(m.vertices.size(), 48u * 9u);
  EXPECT_EQ(m.triangles.size(), 2u * 48u * 8u);
  for (const auto& v : m.vertices) {
    EXPECT_NEAR(std::hypot(v.y, v.z), 0.05, 1e-12);
    EXPECT_LE(std::abs(v.x), 0.3 + 1e-12);
  }
}

TEST(Mesh, CylinderNormalsPointOutward) {
  const CollisionShape s(make_cylinder_mesh(0.05, 0.6, 24, 3));
  const auto& m = s.mesh();
  for (std::size_t f = 0; f < m.triangles.size(); ++f) {
    const auto& t = m.triangles[f];
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
    EXPECT_GT(s.face_normals()[f].dot(Vec3{0.0, c.y, c.z}), 0.0);
  }
}

TEST(Mesh, PipeIsClosedAndBoreNormalsPointInward) {
  const CollisionShape s(make_pipe_mesh(0.06, 0.07, 0.7, 32, 4));
  // Closed: every edge borders exactly two faces.
  std::vector<int> uses(s.edges().size(), 0);
  for (const auto& fe : s.face_edges()) {
    for (auto e : fe) ++uses[e];
  }
  for (int u : uses) EXPECT_EQ(u, 2);
  const auto& m = s.mesh();
  for (std::size_t f = 0; f < m.triangles.size(); ++f) {
    const auto& t = m.triangles[f];
    const Vec3 c = (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
    const double rho = std::hypot(c.y, c.z);
    const Vec3 n = s.face_normals()[f];
    const Vec3 radial = Vec3{0.0, c.y, c.z} / rho;
    if (std::abs(std::abs(c.x) - 0.35) < 1e-9) {
      EXPECT_NEAR(std::abs(n.x), 1.0, 1e-9);  // end cap
      EXPECT_GT(n.x * c.x, 0.0);
    } else if (rho < 0.065) {
      EXPECT_LT(n.dot(radial), 0.0);  // bore faces the axis
    } else {
      EXPECT_GT(n.dot(radial), 0.0);
    }
  }
}

TEST(Mesh, ValidationRejectsBadInput) {
  TriangleMesh m = make_cylinder_mesh(0.05, 0.6, 8, 1);
  m.triangles.push_back({0, 1, 9999});
  EXPECT_THROW(validate_mesh(m), InvalidArgument);
  TriangleMesh degenerate{{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}}};
  EXPECT_THROW(validate_mesh(degenerate), InvalidArgument);
  EXPECT_THROW(make_cylinder_mesh(-1.0, 0.6, 8, 1), InvalidArgument);
  EXPECT_THROW(validate_pose({{0, 0, 0}, {2.0, 0.0, 0.0, 0.0}}), InvalidArgument);
}

TEST(BroadPhase, TouchingAndSeparatedBoxes) {
  const Aabb a{{0, 0, 0}, {1, 1, 1}};
  EXPECT_TRUE(broad_phase(a, {{1, 0, 0}, {2, 1, 1}}));
  EXPECT_FALSE(broad_phase(a, {{1.0001, 0, 0}, {2, 1, 1}}));
  EXPECT_TRUE(broad_phase(a, {{0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}}));
}

TEST(NarrowPhase, AnalyticOracleOverRandomParallelPoses) {
  const SimConfig sim;
  const CollisionShape inner(make_cylinder_mesh(sim.inner_radius, sim.inner_length,
                                                sim.radial_segments, sim.axial_segments));
  const CollisionShape outer(make_pipe_mesh(sim.outer_inner_radius, sim.outer_outer_radius,
                                            sim.outer_length, sim.radial_segments,
                                            sim.axial_segments));
  const testing_oracle::PipePair pair{sim.inner_radius, sim.inner_length, sim.outer_inner_radius,
                                      sim.outer_outer_radius, sim.outer_length};
  std::mt19937_64 rng(7);
  int checked = 0;
  int contacts = 0;
  for (int i = 0; i < 200; ++i) {
    const Vec3 offset = testing_oracle::random_relative_offset(rng);
    const double clearance = pair.clearance(offset);
    const bool expected = clearance <= 0.0;
    const bool got =
        !narrow_phase_contacts(inner, Pose::translation(offset), outer, Pose{}, 1e-3).empty();
    if (std::abs(clearance) < 2e-3) continue;
    ++checked;
    contacts += expected ? 1 : 0;
    EXPECT_EQ(got, expected) << "offset " << offset.x << "," << offset.y << "," << offset.z
                             << " clearance " << clearance;
  }
  EXPECT_GT(checked, 150);
  EXPECT_GT(contacts, 20);
  EXPECT_LT(contacts, checked - 20);
}

TEST(NarrowPhase, OffsetInsideBoreGivesContactsAroundOffsetAzimuth) {
  const SimConfig sim;
  const CollisionShape inner(make_cylinder_mesh(sim.inner_radius, sim.inner_length, 48, 8));
  const CollisionShape outer(make_pipe_mesh(0.06, 0.07, 0.7, 48, 8));
  const double e = 0.011;
  const double azimuth = 0.7;
  const Vec3 offset{-0.1, e * std::cos(azimuth), e * std::sin(azimuth)};
  const ContactSet c = narrow_phase_contacts(inner, Pose::translation(offset), outer, Pose{}, 1e-3);
  ASSERT_FALSE(c.empty());
  const double band = testing_oracle::contact_band_half_angle(0.05, e, 0.06 - 1e-3);
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : c.points) {
    const double a = std::atan2(p.pt.z, p.pt.y);
    double d = std::remainder(a - azimuth, 2.0 * std::numbers::pi);
    EXPECT_LE(std::abs(d), band + 2.0 * std::numbers::pi / 48.0);
    sx += std::cos(a);
    sy += std::sin(a);
    EXPECT_NEAR(p.n.norm(), 1.0, 1e-9);
  }
  const double mean = std::atan2(sy, sx);
  EXPECT_LT(std::abs(std::remainder(mean - azimuth, 2.0 * std::numbers::pi)), 5.0 * kDeg);
}

TEST(NarrowPhase, CoaxialInsideBoreHasNoContact) {
  const CollisionShape inner(make_cylinder_mesh(0.05, 0.6, 48, 8));
  const CollisionShape outer(make_pipe_mesh(0.06, 0.07, 0.7, 48, 8));
  EXPECT_TRUE(narrow_phase_contacts(inner, Pose::translation({0.05, 0, 0}), outer, Pose{}, 1e-3)
                  .empty());
}

TEST(NarrowPhase, RigidMotionOfBothShapesMovesContactsRigidly) {
  const CollisionShape inner(make_cylinder_mesh(0.05, 0.6, 24, 4));
  const CollisionShape outer(make_pipe_mesh(0.06, 0.07, 0.7, 24, 4));
  const Vec3 offset{-0.2137, 0.0101, 0.0083};
  const ContactSet base = narrow_phase_contacts(inner, Pose::translation(offset), outer, Pose{}, 1e-3);
  const Pose g{{0.3, -0.2, 0.5}, Quat::from_axis_angle({0.3, 1.0, -0.4}, 0.9)};
  const Pose inner_moved{g.apply(offset), g.orientation};
  const ContactSet moved = narrow_phase_contacts(inner, inner_moved, outer, g, 1e-3);
  ASSERT_EQ(base.size(), moved.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_LT((g.apply(base.points[i].pt) - moved.points[i].pt).norm(), 1e-9);
    EXPECT_LT((g.rotate(base.points[i].n) - moved.points[i].n).norm(), 1e-9);
  }
}

TEST(ClosestContact, PicksNearestToHandlerAndThrowsOnEmpty) {
  ContactSet s;
  EXPECT_THROW(closest_contact(s, {0, 0, 0}), EmptyContacts);
  s.points = {{{1, 0, 0}, {1, 0, 0}}, {{0.2, 0, 0}, {0, 1, 0}}, {{0, 3, 0}, {0, 0, 1}}};
  EXPECT_EQ(closest_contact(s, {0, 0, 0}).pt.x, 0.2);
}

TEST(RayCast, MatchesBruteForceOverAllTriangles) {
  auto pipe = std::make_shared<const CollisionShape>(make_pipe_mesh(0.06, 0.07, 0.7, 24, 4));
  auto disc = std::make_shared<const CollisionShape>(make_disc_mesh(0.06, 24));
  const std::vector<SceneObject> scene{{pipe, Pose{{0.1, 0.0, 0.02}, Quat::from_axis_angle({0, 0, 1}, 0.2)}, 0},
                                       {disc, Pose::translation({0.25, 0.0, 0.0}), 1}};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  int hits = 0;
  for (int i = 0; i < 400; ++i) {
    const Vec3 o{-0.6 + 0.2 * u(rng), 0.1 * u(rng), 0.1 * u(rng)};
    Vec3 d = (Vec3{0.1, 0.0, 0.0} + Vec3{u(rng), 0.2 * u(rng), 0.2 * u(rng)} - o).normalized();
    if (i % 4 == 0) d = random_unit(rng);
    std::optional<double> best;
    int best_id = -1;
    for (const auto& obj : scene) {
      const auto& m = obj.shape->mesh();
      for (const auto& t : m.triangles) {
        const auto hit = brute_ray_triangle(o, d, obj.pose.apply(m.vertices[t[0]]),
                                            obj.pose.apply(m.vertices[t[1]]),
                                            obj.pose.apply(m.vertices[t[2]]));
        if (hit && (!best || *hit < *best)) {
          best = hit;
          best_id = obj.id;
        }
      }
    }
    const auto got = ray_cast(o, d, scene);
    ASSERT_EQ(got.has_value(), best.has_value()) << "ray " << i;
    if (got) {
      ++hits;
      EXPECT_NEAR(got->distance, *best, 1e-9);
      EXPECT_EQ(got->object_id, best_id);
      EXPECT_LT((got->point - (o + d * got->distance)).norm(), 1e-12);
    }
  }
  EXPECT_GT(hits, 100);
}

TEST(RayCast, RejectsNonUnitDirection) {
  EXPECT_THROW(ray_cast({0, 0, 0}, {2, 0, 0}, {}), InvalidArgument);
}

TEST(RayTriangle, HitMissAndParallel) {
  const Vec3 a{0, 0, 0}, b{1, 0, 0}, c{0, 1, 0};
  EXPECT_NEAR(*intersect_ray_triangle({0.2, 0.2, 1}, {0, 0, -1}, a, b, c), 1.0, 1e-15);
  EXPECT_FALSE(intersect_ray_triangle({0.8, 0.8, 1}, {0, 0, -1}, a, b, c));
  EXPECT_FALSE(intersect_ray_triangle({0.2, 0.2, 1}, {1, 0, 0}, a, b, c));
  EXPECT_FALSE(intersect_ray_triangle({0.2, 0.2, 1}, {0, 0, 1}, a, b, c));
}

TEST(RayFan, FirstRayOnAxisAllWithinConeAndUnit) {
  const Vec3 o{0.1, 0.2, 0.3};
  const Vec3 toward{1.1, 0.7, 0.3};
  const Vec3 axis = (toward - o).normalized();
  const auto fan = ray_fan(o, toward, 16, std::numbers::pi / 4);
  ASSERT_EQ(fan.size(), 16u);
  EXPECT_LT((fan.front() - axis).norm(), 1e-12);
  double widest = 0.0;
  for (const auto& d : fan) {
    EXPECT_NEAR(d.norm(), 1.0, 1e-12);
    widest = std::max(widest, angle_between(d, axis));
  }
  EXPECT_NEAR(widest, std::numbers::pi / 4, 1e-9);
  EXPECT_THROW(ray_fan(o, o, 16, 0.5), InvalidArgument);
  EXPECT_THROW(ray_fan(o, toward, 0, 0.5), InvalidArgument);
}

TEST(RayFan, RotatingTheAxisRotatesTheFanRigidly) {
  const Vec3 o{0, 0, 0};
  const auto a = ray_fan(o, {1, 0, 0}, 16, 0.6);
  const auto b = ray_fan(o, Vec3{0.3, -0.8, 0.5}.normalized(), 16, 0.6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      EXPECT_NEAR(angle_between(a[i], a[j]), angle_between(b[i], b[j]), 1e-9);
    }
  }
}

TEST(PlaneFit, SixPointsOnZPlane) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, -1, 0}, {-1, 3, 0}};
  const Vec3 n = fit_plane_normal_svd(pts, {0, 0, 1});
  EXPECT_LT(angle_between(n, {0, 0, 1}), 1e-6);
  EXPECT_LT(angle_between(fit_plane_normal_svd(pts, {0, 0, -5}), {0, 0, -1}), 1e-6);
}

TEST(PlaneFit, MatchesNormalEquationsOnTiltedPlane) {
  // Oracle: least-squares z = a x + b y + c from the normal equations.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 20; ++i) {
    const double x = u(rng), y = u(rng);
    pts.push_back({x, y, 1.0 - x - y});
  }
  Eigen::MatrixXd A(20, 3);
  Eigen::VectorXd z(20);
  for (int i = 0; i < 20; ++i) {
    A.row(i) << pts[i].x, pts[i].y, 1.0;
    z(i) = pts[i].z;
  }
  const Eigen::Vector3d coef = (A.transpose() * A).ldlt().solve(A.transpose() * z);
  const Vec3 oracle = Vec3{-coef(0), -coef(1), 1.0}.normalized();
  const Vec3 n = fit_plane_normal_svd(pts, {5, 5, 5});
  EXPECT_LT(angle_between(n, oracle), 1e-6);
  EXPECT_LT(angle_between(n, Vec3{1, 1, 1}.normalized()), 1e-6);
}

TEST(PlaneFit, NoisyPlanesWithinHalfDegree) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1e-3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 n = random_unit(rng);
    const auto [e1, e2] = orthonormal_basis(n);
    std::vector<Vec3> pts;
    for (int i = 0; i < 20; ++i) {
      pts.push_back(e1 * u(rng) + e2 * u(rng) + Vec3{noise(rng), noise(rng), noise(rng)});
    }
    EXPECT_LT(angle_deg(fit_plane_normal_svd(pts, n), n), 0.5);
  }
}

TEST(PlaneFit, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({u(rng), u(rng), 0.1 * u(rng)});
  const Vec3 toward{0.2, 0.1, 3.0};
  const Vec3 n = fit_plane_normal_svd(pts, toward);
  const Pose g{{1.0, -2.0, 0.5}, Quat::from_axis_angle({1.0, 2.0, 3.0}, 1.1)};
  std::vector<Vec3> moved;
  for (const auto& p : pts) moved.push_back(g.apply(p));
  EXPECT_LT((fit_plane_normal_svd(moved, g.apply(toward)) - g.rotate(n)).norm(), 1e-9);
}

TEST(PlaneFit, DegenerateInputsThrow) {
  EXPECT_THROW(fit_plane_normal_svd(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}}, {0, 0, 1}),
               DegenerateGeometry);
  const std::vector<Vec3> collinear{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  EXPECT_THROW(fit_plane_normal_svd(collinear, {0, 0, 1}), DegenerateGeometry);
}

TEST(Jacobi, MatchesEigenSolverOnRandomSymmetric) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) m(r, c) = m(c, r) = u(rng);
    std::array<std::array<double, 3>, 3> a{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a[r][c] = m(r, c);
    const auto got = jacobi_eigen_symmetric(a);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ref(m);
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(got.values[k], ref.eigenvalues()(k), 1e-10);
      const Eigen::Vector3d v(got.vectors[k].x, got.vectors[k].y, got.vectors[k].z);
      EXPECT_LT((m * v - got.values[k] * v).norm(), 1e-10);
    }
  }
}

TEST(ClosestPoint, TriangleAgreesWithDenseSampling) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)}, c{u(rng), u(rng), u(rng)};
    const Vec3 p{2 * u(rng), 2 * u(rng), 2 * u(rng)};
    const Vec3 q = closest_point_on_triangle(p, a, b, c);
    double best = 1e9;
    constexpr int kGrid = 120;
    for (int i = 0; i <= kGrid; ++i) {
      for (int j = 0; i + j <= kGrid; ++j) {
        const double s = double(i) / kGrid, t = double(j) / kGrid;
        best = std::min(best, (a + (b - a) * s + (c - a) * t - p).norm());
      }
    }
    EXPECT_LE((q - p).norm(), best + 1e-12);
    EXPECT_GE((q - p).norm(), best - 0.05);
  }
}

TEST(ClosestPoint, SegmentsAgreeWithDenseSampling) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3 p0{u(rng), u(rng), u(rng)}, p1{u(rng), u(rng), u(rng)};
    const Vec3 q0{u(rng), u(rng), u(rng)}, q1{u(rng), u(rng), u(rng)};
    const auto [pa, pb] = closest_points_segments(p0, p1, q0, q1);
    double best = 1e9;
    for (int i = 0; i <= 400; ++i) {
      for (int j = 0; j <= 400; ++j) {
        best = std::min(best, (p0 + (p1 - p0) * (i / 400.0) - q0 - (q1 - q0) * (j / 400.0)).norm());
      }
    }
    EXPECT_LE((pa - pb).norm(), best + 1e-12);
    EXPECT_GE((pa - pb).norm(), best - 1e-2);
  }
}
