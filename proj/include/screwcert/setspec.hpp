#pragma once

// Text descriptions of planar sets, as accepted by the command line:
//
//   box:xlo,ylo,xhi,yhi           axis-aligned box
//   <shape>:p1[,p2]               shape_library entry (triangle, diamond, ...)
//   poly:R:f1;f2;...              { x : f_i(x) >= 0 }, in x1 and x2, inside the
//                                 disc of radius R about the origin

#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "screwcert/geom.hpp"
#include "screwcert/polyalg.hpp"

namespace screwcert {

class SetSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw SetSpecError(what + ": bad number '" + tok + "'");
    }
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
    if (used != tok.size() || !std::isfinite(v)) throw SetSpecError(what + ": bad number '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline SemialgebraicSet box_set(const Eigen::Vector2d& lo, const Eigen::Vector2d& hi) {
  if (!(lo.array() < hi.array()).all()) throw SetSpecError("box: lower corner must be below the upper corner");
  SemialgebraicSet s;
  s.name = "box";
  s.space_dim = 2;
  const Polytope p = Polytope::box(lo, hi);
  for (const auto& f : p.faces) s.polys.push_back(f.polynomial());
  s.polygon = {{lo.x(), lo.y()}, {hi.x(), lo.y()}, {hi.x(), hi.y()}, {lo.x(), hi.y()}};
  s.witness = 0.5 * (lo + hi);
  for (const auto& v : s.polygon) s.enclosing_radius = std::max(s.enclosing_radius, v.norm());
  return s;
}

inline SemialgebraicSet parse_set_spec(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw SetSpecError("set '" + text + "': expected kind:parameters");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (kind == "box") {
    const auto v = detail::parse_numbers(rest, "box");
    if (v.size() != 4) throw SetSpecError("box: expected xlo,ylo,xhi,yhi");
    return box_set({v[0], v[1]}, {v[2], v[3]});
  }
  if (kind == "poly") {
    const auto c2 = rest.find(':');
    if (c2 == std::string::npos) throw SetSpecError("poly: expected poly:R:f1;f2;...");
    const auto r = detail::parse_numbers(rest.substr(0, c2), "poly radius");
    if (r.size() != 1 || !(r[0] > 0.0)) throw SetSpecError("poly: radius must be one positive number");
    SemialgebraicSet s;
    s.name = "poly";
    s.space_dim = 2;
    s.enclosing_radius = r[0];
    std::stringstream ss(rest.substr(c2 + 1));
    std::string f;
    while (std::getline(ss, f, ';')) {
      try {
        s.polys.push_back(Polynomial::parse(f, 2));
      } catch (const std::invalid_argument& e) {
        throw SetSpecError(std::string("poly: ") + e.what());
      }
    }
    if (s.polys.empty()) throw SetSpecError("poly: no defining polynomials");
    s.witness = Eigen::VectorXd::Zero(2);
    return s;
  }
  try {
    return shape_library(kind, detail::parse_numbers(rest, kind));
  } catch (const std::invalid_argument& e) {
    throw SetSpecError(e.what());
  }
}

}  // namespace screwcert
