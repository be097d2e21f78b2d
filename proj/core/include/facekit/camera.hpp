/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/camera.hpp
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

#include "facekit/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <string>
#include <vector>

namespace facekit {

/**
 * Pinhole intrinsics with a dimensionless scale factor on the base focal:
 * K = [[fs*f, 0, cx], [0, fs*f, cy], [0, 0, 1]].
 */
struct Intrinsics
{
    double f = 1.0;       ///< base focal length, pixels
    double cx = 0.0;      ///< principal point x, pixels
    double cy = 0.0;      ///< principal point y, pixels
    double fs = 1.0;      ///< focal scale factor

    double effective_focal() const { return fs * f; }
    Eigen::Matrix3d matrix() const;
};

/// Rigid camera pose: x_cam = q * x_world + t.
struct Extrinsics
{
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    /// Left-composes a tangent-space rotation increment and renormalizes.
    void update_rotation(const Eigen::Vector3d& increment);

    Eigen::Vector3d transform(const Eigen::Vector3d& world_point) const;
};

/**
 * Intrinsics from the input image size: f = max(width, height), fs = 1,
 * principal point at the image center. `swap_principal_point` selects the
 * alternate convention cx = height/2, cy = width/2.
 */
Intrinsics init_intrinsics(int width, int height, bool swap_principal_point = false);

/// Perspective projection of a world point; throws numeric_error when the
/// transformed depth is not positive.
Eigen::Vector2d project(const Eigen::Vector3d& world_point, const Extrinsics& extr,
                        const Intrinsics& intr);

/**
 * EPnP pose estimation from >= 6 world/image correspondences: the pose is
 * expressed through 4 control points, the null space of the projection
 * constraints is searched over 1-3 basis vectors with Gauss-Newton refined
 * combination weights, and the best candidate is polished by a short
 * reprojection Gauss-Newton. Throws numeric_error on degenerate (e.g.
 * near-coplanar) configurations; callers fall back to a frontal pose.
 */
Extrinsics epnp_pose(const std::vector<Eigen::Vector3d>& points3d,
                     const std::vector<Eigen::Vector2d>& points2d, const Intrinsics& intr);

/// Root-mean-square reprojection error in pixels; points behind the camera
/// contribute a large constant.
double reprojection_rmse(const std::vector<Eigen::Vector3d>& points3d,
                         const std::vector<Eigen::Vector2d>& points2d, const Extrinsics& extr,
                         const Intrinsics& intr);

/// Pose serialization: structured text with quaternion (w,x,y,z),
/// translation, f, fs and principal point.
void save_pose(const Extrinsics& extr, const Intrinsics& intr, const std::string& path);
std::pair<Extrinsics, Intrinsics> load_pose(const std::string& path);

} // namespace facekit
