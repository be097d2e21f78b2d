/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/rotation_util.hpp
 *
 * Copyright 2026 The facekit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace facekit {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

/**
 * Left Jacobian of the SO(3) exponential map:
 * exp([w + dw]) ~ exp([Jl(w) dw]) exp([w]), so for v fixed
 * d(exp([w]) v)/dw = -[exp([w]) v]_x Jl(w).
 */
inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w)
{
    const double theta2 = w.squaredNorm();
    const Eigen::Matrix3d W = skew(w);
    if (theta2 < 1e-12)
        return Eigen::Matrix3d::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
    const double theta = std::sqrt(theta2);
    const double a = (1.0 - std::cos(theta)) / theta2;
    const double b = (theta - std::sin(theta)) / (theta2 * theta);
    return Eigen::Matrix3d::Identity() + a * W + b * W * W;
}

} // namespace facekit
