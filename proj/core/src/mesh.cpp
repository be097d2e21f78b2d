/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/mesh.cpp
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
#include "facekit/mesh.hpp"

#include <limits>

namespace facekit {

void Mesh::validate() const
{
    const int n = vertex_count();
    for (std::size_t f = 0; f < faces.size(); ++f)
    {
        const auto& [a, b, c] = faces[f];
        if (a < 0 || a >= n || b < 0 || b >= n || c < 0 || c >= n)
            throw input_error("face " + std::to_string(f) + ": vertex index out of range");
        if (a == b || b == c || a == c)
            throw input_error("face " + std::to_string(f) + ": degenerate (repeated vertex index)");
    }
    if (!uv.empty() && uv.size() != vertices.size())
        throw input_error("uv array length does not match vertex count");
    for (const auto& [name, indices] : labels)
        for (int i : indices)
            if (i < 0 || i >= n)
                throw input_error("label '" + name + "': vertex index out of range");
}

double Mesh::bounding_box_diagonal() const
{
    if (vertices.empty()) return 0.0;
    Eigen::Vector3d lo = vertices.front(), hi = vertices.front();
    for (const auto& v : vertices)
    {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

Eigen::VectorXd Mesh::flatten() const
{
    Eigen::VectorXd out(3 * vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i)
        out.segment<3>(3 * i) = vertices[i];
    return out;
}

void Mesh::set_from_flat(const Eigen::VectorXd& coords)
{
    if (coords.size() != static_cast<Eigen::Index>(3 * vertices.size()))
        throw input_error("flattened coordinate vector has wrong length");
    for (std::size_t i = 0; i < vertices.size(); ++i)
        vertices[i] = coords.segment<3>(3 * i);
}

void compute_facial_area_label(Mesh& mesh)
{
    if (mesh.labels.count("facial_area")) return;
    auto it = mesh.labels.find("nose_tip");
    if (it == mesh.labels.end() || it->second.empty()) return;
    const Eigen::Vector3d tip = mesh.vertices.at(it->second.front());
    std::vector<int> area;
    for (int i = 0; i < mesh.vertex_count(); ++i)
        if ((mesh.vertices[i] - tip).norm() <= kFacialAreaRadiusMm) area.push_back(i);
    mesh.labels["facial_area"] = std::move(area);
}

} // namespace facekit
