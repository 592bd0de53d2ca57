#pragma once

#include <Eigen/Core>

namespace phimin {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;

inline const Vec3& e3() {
  static const Vec3 v(0.0, 0.0, 1.0);
  return v;
}

}  // namespace phimin
