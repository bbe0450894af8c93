#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pipeforge/geometry.hpp"

namespace testing_oracle {

// Analytic clearance between a thin tube (surface only) and a thick-walled pipe, both
// along +x, for a pure translation of the tube. The outer pipe sits at the origin.
struct PipePair {
  double r;        // tube radius
  double len;      // tube length
  double bore;     // pipe inner radius
  double shell;    // pipe outer radius
  double pipe_len;

  // Positive: gap between the tube surface and the pipe solid. Non-positive: the tube
  // surface crosses the pipe wall.
  double clearance(const pipeforge::Vec3& offset) const {
    const double e = std::hypot(offset.y, offset.z);
    const double axial = std::max(-pipe_len / 2 - (offset.x + len / 2),
                                  (offset.x - len / 2) - pipe_len / 2);
    // The tube cross-section spans radii [|e - r|, e + r] around the pipe axis.
    const double radial = std::max(bore - (e + r), std::abs(e - r) - shell);
    if (axial > 0.0 || radial > 0.0) {
      return std::hypot(std::max(axial, 0.0), std::max(radial, 0.0));
    }
    return std::max(axial, radial);
  }
};

inline pipeforge::Vec3 random_relative_offset(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ax(-0.8, 0.2);
  std::uniform_real_distribution<double> lat(0.0, 0.14);
  std::uniform_real_distribution<double> az(-std::numbers::pi, std::numbers::pi);
  const double e = lat(rng);
  const double a = az(rng);
  return {ax(rng), e * std::cos(a), e * std::sin(a)};
}

// Widest azimuth (about the pipe axis, measured from the offset direction) at which a
// tube of radius r offset by e reaches radius rho_min.
inline double contact_band_half_angle(double r, double e, double rho_min) {
  double widest = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double phi = std::numbers::pi * i / 20000.0;
    const double y = e + r * std::cos(phi);
    const double z = r * std::sin(phi);
    if (std::hypot(y, z) >= rho_min) widest = std::max(widest, std::atan2(z, y));
  }
  return widest;
}

}  // namespace testing_oracle
