#pragma once

// Reference computations used by the tests. They avoid the library's own
// polynomial machinery wherever a closed form exists.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "screwcert/geom.hpp"
#include "screwcert/relax.hpp"
#include "screwcert/screw.hpp"

namespace oracle {

using screwcert::Polytope;
using screwcert::Pose;
using screwcert::ScrewControl;

/// exp of the 4x4 twist matrix [S] theta.
inline Pose expm_pose(const ScrewControl& u, double theta) {
  Eigen::Matrix4d S = Eigen::Matrix4d::Zero();
  const Eigen::Vector3d& w = u.omega_hat;
  S(0, 1) = -w.z();
  S(0, 2) = w.y();
  S(1, 0) = w.z();
  S(1, 2) = -w.x();
  S(2, 0) = -w.y();
  S(2, 1) = w.x();
  S.block<3, 1>(0, 3) = u.v_hat;
  const Eigen::Matrix4d T = (S * theta).exp();
  Pose p;
  p.R = T.topLeftCorner<3, 3>();
  p.p = T.block<3, 1>(0, 3);
  return p;
}

/// Planar robot body: a convex polygon, or an axis-aligned ellipse.
struct Body {
  std::vector<Eigen::Vector2d> vertices;
  double a = 0.0, b = 0.0;  // ellipse semi-axes when vertices is empty

  static Body from_set(const screwcert::SemialgebraicSet& s, double a = 0.0, double b = 0.0) {
    Body r;
    r.vertices = s.polygon;
    r.a = a;
    r.b = b;
    return r;
  }
  /// max over the body of g'x.
  double support(const Eigen::Vector2d& g) const {
    if (vertices.empty()) return std::hypot(a * g.x(), b * g.y());
    double s = -std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) s = std::max(s, g.dot(v));
    return s;
  }
};

/// Smallest face value of B over the moved body, exactly.
inline double exact_margin(const Body& body, const Polytope& B, const Pose& motion) {
  const Eigen::Matrix2d R = motion.R.topLeftCorner<2, 2>();
  const Eigen::Vector2d p = motion.p.head<2>();
  double m = std::numeric_limits<double>::infinity();
  for (const auto& f : B.faces) {
    const Eigen::Vector2d n = f.normal.head<2>();
    m = std::min(m, f.offset - n.dot(p) - body.support(R.transpose() * n));
  }
  return m;
}

struct GridBest {
  double J = std::numeric_limits<double>::infinity();
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  int feasible = 0;
};

/// Brute force over w in {-1, 0, 1} and a 41 x 41 grid of v on the disc
/// |v| <= v_limit, keeping motions whose every face is non-negative on the
/// moved body. For affine faces on a polygon or ellipse this is exactly
/// feasibility of the order-1 certificate.
inline GridBest grid_oracle(const screwcert::Polynomial& J, const Body& body, const Polytope& B, double theta,
                            double v_limit, int n = 41) {
  GridBest best;
  for (double w : {-1.0, 0.0, 1.0}) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double vx = -v_limit + 2.0 * v_limit * i / (n - 1);
        const double vy = -v_limit + 2.0 * v_limit * j / (n - 1);
        if (std::hypot(vx, vy) > v_limit + 1e-12) continue;
        const ScrewControl c = ScrewControl::planar_control(w, vx, vy);
        if (exact_margin(body, B, screwcert::exp_map(c, theta)) < 0.0) continue;
        ++best.feasible;
        const Eigen::Vector3d u(w, vx, vy);
        const double v = J.evaluate(Eigen::VectorXd(u));
        if (v < best.J) {
          best.J = v;
          best.u = u;
        }
      }
    }
  }
  return best;
}

/// Random convex free region around a body at the origin: the sensor box
/// plus `faces` half-planes at random directions, each clearing the body by
/// a random margin.
inline Polytope random_region(const Body& body, std::mt19937_64& rng, int faces, double range = 1.0) {
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), gap(0.01, 0.25);
  Polytope B = Polytope::box(Eigen::Vector2d(-range, -range), Eigen::Vector2d(range, range));
  for (int k = 0; k < faces; ++k) {
    const double a = ang(rng);
    const Eigen::Vector2d n(std::cos(a), std::sin(a));
    B.add_face(n, body.support(n) + gap(rng));
  }
  return B;
}

/// Reference pose reachable by a random admissible screw over 0.5 to 2 steps.
inline Pose random_reference(std::mt19937_64& rng, double theta, double v_limit) {
  std::uniform_int_distribution<int> wd(-1, 1);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), mag(0.0, 1.0), scale(0.5, 2.0);
  const double a = ang(rng);
  const double r = v_limit * std::sqrt(mag(rng));
  const ScrewControl c = ScrewControl::planar_control(wd(rng), r * std::cos(a), r * std::sin(a));
  return screwcert::exp_map(c, theta * scale(rng));
}

}  // namespace oracle
