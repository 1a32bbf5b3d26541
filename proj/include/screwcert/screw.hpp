#pragma once

// Screw-axis kinematics: the SE(3) exponential map for a fixed travel
// theta along a screw axis (omega_hat, v_hat), and the same map written as
// polynomials in the screw coordinates once theta is frozen.

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "screwcert/polyalg.hpp"

namespace screwcert {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),  //
      w.z(), 0.0, -w.x(),   //
      -w.y(), w.x(), 0.0;
  return m;
}

/// Rigid transform (R, p).
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose planar(double x, double y, double yaw) {
    Pose t;
    t.R = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    t.p = Eigen::Vector3d(x, y, 0.0);
    return t;
  }

  double yaw() const { return std::atan2(R(1, 0), R(0, 0)); }
  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return R * x + p; }
  Eigen::Vector2d apply2(const Eigen::Vector2d& x) const {
    return (R * Eigen::Vector3d(x.x(), x.y(), 0.0) + p).head<2>();
  }

  /// Max residual of R^T R = I and det R = 1.
  double rotation_residual() const {
    return std::max((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(),
                    std::abs(R.determinant() - 1.0));
  }
};

inline Pose compose(const Pose& a, const Pose& b) { return {a.R * b.R, a.R * b.p + a.p}; }

inline Pose invert(const Pose& a) {
  Pose r;
  r.R = a.R.transpose();
  r.p = -(r.R * a.p);
  return r;
}

/// Decision variable u = (omega_hat, v_hat). In planar mode only
/// omega_hat.z, v_hat.x and v_hat.y are free and the control vector is
/// (w, vx, vy); otherwise it is (omega_hat, v_hat) in R^6.
struct ScrewControl {
  Eigen::Vector3d omega_hat = Eigen::Vector3d::Zero();
  Eigen::Vector3d v_hat = Eigen::Vector3d::Zero();
  bool planar = true;

  static ScrewControl planar_control(double w, double vx, double vy) {
    return {Eigen::Vector3d(0.0, 0.0, w), Eigen::Vector3d(vx, vy, 0.0), true};
  }
  static ScrewControl spatial(const Eigen::Vector3d& w, const Eigen::Vector3d& v) {
    return {w, v, false};
  }
  static ScrewControl from_vector(const Eigen::VectorXd& u) {
    if (u.size() == 3) return planar_control(u(0), u(1), u(2));
    if (u.size() == 6) return spatial(u.head<3>(), u.tail<3>());
    throw std::invalid_argument("ScrewControl: control vector must have 3 or 6 entries");
  }

  Eigen::VectorXd to_vector() const {
    if (planar) return Eigen::Vector3d(omega_hat.z(), v_hat.x(), v_hat.y());
    Eigen::VectorXd u(6);
    u << omega_hat, v_hat;
    return u;
  }

  /// True when |omega_hat| is 0 or 1 within `tol`.
  bool has_valid_axis(double tol = 1e-8) const {
    const double n = omega_hat.norm();
    return n <= tol || std::abs(n - 1.0) <= tol;
  }

  /// Body twist emitted for a control period dt.
  Eigen::Matrix<double, 6, 1> twist(double theta_step, double dt) const {
    Eigen::Matrix<double, 6, 1> v;
    v << omega_hat * (theta_step / dt), v_hat * (theta_step / dt);
    return v;
  }
};

/// exp([S] theta): R = I + sin(theta)[w] + (1 - cos(theta))[w]^2,
/// p = (I theta + (1 - cos theta)[w] + (theta - sin theta)[w]^2) v.
inline Pose exp_map(const ScrewControl& u, double theta) {
  if (!u.has_valid_axis(1e-8)) {
    throw std::invalid_argument("exp_map: omega_hat must be zero or a unit vector");
  }
  const Eigen::Matrix3d W = skew(u.omega_hat);
  const Eigen::Matrix3d W2 = W * W;
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  Pose t;
  t.R = Eigen::Matrix3d::Identity() + s * W + (1.0 - c) * W2;
  t.p = (Eigen::Matrix3d::Identity() * theta + (1.0 - c) * W + (theta - s) * W2) * u.v_hat;
  return t;
}

/// Pose after one step written as polynomials in the control vector.
struct SymbolicPose {
  double theta_step = 0.0;
  bool planar = true;
  int num_control_vars = 3;
  std::array<std::array<Polynomial, 3>, 3> R;
  std::array<Polynomial, 3> p;

  Pose evaluate(const Eigen::VectorXd& u) const {
    Pose t;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) t.R(i, j) = R[i][j].evaluate(u);
      t.p(i) = p[i].evaluate(u);
    }
    return t;
  }

  int rotation_degree() const {
    int d = 0;
    for (const auto& row : R)
      for (const auto& e : row) d = std::max(d, e.degree());
    return d;
  }
  int position_degree() const {
    int d = 0;
    for (const auto& e : p) d = std::max(d, e.degree());
    return d;
  }
};

inline SymbolicPose symbolic_pose(double theta_step, bool planar) {
  if (!(theta_step > 0.0)) throw std::invalid_argument("symbolic_pose: theta_step must be > 0");
  SymbolicPose sp;
  sp.theta_step = theta_step;
  sp.planar = planar;
  sp.num_control_vars = planar ? 3 : 6;
  const int n = sp.num_control_vars;
  const double s = std::sin(theta_step);
  const double c = std::cos(theta_step);

  // omega and v as polynomial 3-vectors.
  std::array<Polynomial, 3> w;
  std::array<Polynomial, 3> v;
  for (auto& e : w) e = Polynomial(n);
  for (auto& e : v) e = Polynomial(n);
  if (planar) {
    w[2] = Polynomial::variable(n, 0);
    v[0] = Polynomial::variable(n, 1);
    v[1] = Polynomial::variable(n, 2);
  } else {
    for (int i = 0; i < 3; ++i) {
      w[static_cast<size_t>(i)] = Polynomial::variable(n, i);
      v[static_cast<size_t>(i)] = Polynomial::variable(n, 3 + i);
    }
  }

  // [w] entries.
  std::array<std::array<Polynomial, 3>, 3> W;
  const Polynomial zero(n);
  W[0] = {zero, -w[2], w[1]};
  W[1] = {w[2], zero, -w[0]};
  W[2] = {-w[1], w[0], zero};
  std::array<std::array<Polynomial, 3>, 3> W2;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Polynomial acc(n);
      for (int k = 0; k < 3; ++k) acc += W[i][k] * W[k][j];
      W2[i][j] = acc;
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Polynomial e = s * W[i][j] + (1.0 - c) * W2[i][j];
      if (i == j) e += 1.0;
      sp.R[i][j] = e;
    }
  }
  for (int i = 0; i < 3; ++i) {
    Polynomial acc = theta_step * v[static_cast<size_t>(i)];
    for (int k = 0; k < 3; ++k) {
      acc += (1.0 - c) * (W[i][k] * v[static_cast<size_t>(k)]);
      acc += (theta_step - s) * (W2[i][k] * v[static_cast<size_t>(k)]);
    }
    sp.p[static_cast<size_t>(i)] = acc;
  }
  return sp;
}

}  // namespace screwcert
