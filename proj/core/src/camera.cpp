/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/camera.cpp
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
#include "facekit/camera.hpp"

#include "facekit/mesh_io.hpp"
#include "facekit/rotation_util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace facekit {

Eigen::Matrix3d Intrinsics::matrix() const
{
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    K(0, 0) = K(1, 1) = effective_focal();
    K(0, 2) = cx;
    K(1, 2) = cy;
    return K;
}

void Extrinsics::update_rotation(const Eigen::Vector3d& increment)
{
    const double theta = increment.norm();
    Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
    if (theta > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(theta, increment / theta));
    rotation = (dq * rotation).normalized();
}

Eigen::Vector3d Extrinsics::transform(const Eigen::Vector3d& world_point) const
{
    return rotation * world_point + translation;
}

Intrinsics init_intrinsics(int width, int height, bool swap_principal_point)
{
    if (width <= 0 || height <= 0) throw input_error("image dimensions must be positive");
    Intrinsics intr;
    intr.f = static_cast<double>(std::max(width, height));
    intr.fs = 1.0;
    intr.cx = 0.5 * (swap_principal_point ? height : width);
    intr.cy = 0.5 * (swap_principal_point ? width : height);
    return intr;
}

Eigen::Vector2d project(const Eigen::Vector3d& world_point, const Extrinsics& extr,
                        const Intrinsics& intr)
{
    const Eigen::Vector3d p = extr.transform(world_point);
    if (p.z() <= 0.0) throw numeric_error("point behind camera (z <= 0)");
    const double g = intr.effective_focal();
    return {g * p.x() / p.z() + intr.cx, g * p.y() / p.z() + intr.cy};
}

double reprojection_rmse(const std::vector<Eigen::Vector3d>& points3d,
                         const std::vector<Eigen::Vector2d>& points2d, const Extrinsics& extr,
                         const Intrinsics& intr)
{
    if (points3d.empty() || points3d.size() != points2d.size())
        throw input_error("correspondence lists empty or mismatched");
    double sum = 0.0;
    for (std::size_t i = 0; i < points3d.size(); ++i)
    {
        const Eigen::Vector3d p = extr.transform(points3d[i]);
        if (p.z() <= 0.0)
        {
            sum += 1e12;
            continue;
        }
        const double g = intr.effective_focal();
        const Eigen::Vector2d proj(g * p.x() / p.z() + intr.cx, g * p.y() / p.z() + intr.cy);
        sum += (proj - points2d[i]).squaredNorm();
    }
    return std::sqrt(sum / points3d.size());
}

void save_pose(const Extrinsics& extr, const Intrinsics& intr, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw input_error("cannot write pose file: " + path);
    const auto& q = extr.rotation;
    out << "quaternion " << format_float(q.w()) << ' ' << format_float(q.x()) << ' '
        << format_float(q.y()) << ' ' << format_float(q.z()) << '\n';
    out << "translation " << format_float(extr.translation.x()) << ' '
        << format_float(extr.translation.y()) << ' ' << format_float(extr.translation.z()) << '\n';
    out << "focal " << format_float(intr.f) << '\n';
    out << "focal_scale " << format_float(intr.fs) << '\n';
    out << "principal_point " << format_float(intr.cx) << ' ' << format_float(intr.cy) << '\n';
}

std::pair<Extrinsics, Intrinsics> load_pose(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw input_error("cannot open pose file: " + path);
    Extrinsics extr;
    Intrinsics intr;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        bool ok = true;
        if (key == "quaternion")
        {
            double w, x, y, z;
            ok = static_cast<bool>(ss >> w >> x >> y >> z);
            extr.rotation = Eigen::Quaterniond(w, x, y, z).normalized();
        }
        else if (key == "translation")
            ok = static_cast<bool>(ss >> extr.translation.x() >> extr.translation.y() >>
                                   extr.translation.z());
        else if (key == "focal")
            ok = static_cast<bool>(ss >> intr.f);
        else if (key == "focal_scale")
            ok = static_cast<bool>(ss >> intr.fs);
        else if (key == "principal_point")
            ok = static_cast<bool>(ss >> intr.cx >> intr.cy);
        else
            throw input_error(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        if (!ok) throw input_error(path + ":" + std::to_string(line_no) + ": malformed record");
    }
    return {extr, intr};
}

} // namespace facekit
