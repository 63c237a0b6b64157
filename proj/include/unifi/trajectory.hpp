#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace unifi {

using Point2 = Eigen::Vector2d;

/// Axis-aligned rectangle in meters.
struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool contains(const Point2& p, double tol = 0.0) const {
    return p.x() >= x_min - tol && p.x() <= x_max + tol && p.y() >= y_min - tol && p.y() <= y_max + tol;
  }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  Point2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
};

/// Per-step kinematic state sampled at `f_s`; step i is the interval
/// [i/f_s, (i+1)/f_s) and `pos[i]` is the position at its start.
struct Trajectory {
  double f_s = 100.0;
  std::vector<Point2> pos;
  std::vector<double> speed;    // m/s, mean over the step
  std::vector<double> heading;  // radians
  std::vector<std::uint8_t> inside;

  std::size_t size() const { return pos.size(); }
  double dt() const { return 1.0 / f_s; }
  Point2 velocity(std::size_t i) const {
    return speed[i] * Point2(std::cos(heading[i]), std::sin(heading[i]));
  }
  void reserve(std::size_t n) {
    pos.reserve(n);
    speed.reserve(n);
    heading.reserve(n);
    inside.reserve(n);
  }
  void push(const Point2& p, double v, double h, bool in) {
    pos.push_back(p);
    speed.push_back(v);
    heading.push_back(h);
    inside.push_back(in ? 1 : 0);
  }
};

}  // namespace unifi
