/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/geometry.cpp
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
#include "facekit/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>

namespace facekit {

double SparseWeights::weight(int i, int j) const
{
    const auto& nbrs = neighbors.at(i);
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), j,
                               [](const auto& entry, int v) { return entry.first < v; });
    if (it == nbrs.end() || it->first != j)
        throw input_error("(" + std::to_string(i) + "," + std::to_string(j) + ") is not a mesh edge");
    return it->second;
}

Eigen::SparseMatrix<double> SparseWeights::laplacian_matrix() const
{
    const int n = vertex_count();
    std::vector<Eigen::Triplet<double>> triplets;
    for (int i = 0; i < n; ++i)
    {
        double diag = 0.0;
        for (const auto& [j, w] : neighbors[i])
        {
            triplets.emplace_back(i, j, -w);
            diag += w;
        }
        triplets.emplace_back(i, i, diag);
    }
    Eigen::SparseMatrix<double> L(n, n);
    L.setFromTriplets(triplets.begin(), triplets.end());
    return L;
}

SparseWeights cotangent_weights(const Mesh& mesh)
{
    mesh.validate();
    const auto edge_key = [](int a, int b) {
        return std::make_pair(std::min(a, b), std::max(a, b));
    };

    std::map<std::pair<int, int>, double> accum;
    std::map<std::pair<int, int>, int> incidence;

    for (const auto& f : mesh.faces)
    {
        for (int corner = 0; corner < 3; ++corner)
        {
            const int opp = f[corner];
            const int a = f[(corner + 1) % 3];
            const int b = f[(corner + 2) % 3];
            const Eigen::Vector3d u = mesh.vertices[a] - mesh.vertices[opp];
            const Eigen::Vector3d v = mesh.vertices[b] - mesh.vertices[opp];
            const double cross = u.cross(v).norm();
            double cot = cross > 0.0 ? u.dot(v) / cross : kCotanClampMax;
            cot = std::clamp(cot, kCotanClampMin, kCotanClampMax);
            accum[edge_key(a, b)] += 0.5 * cot;
            incidence[edge_key(a, b)] += 1;
        }
    }
    for (const auto& [edge, count] : incidence)
        if (count > 2)
            throw numeric_error("non-manifold edge (" + std::to_string(edge.first) + "," +
                                std::to_string(edge.second) + ") with " + std::to_string(count) +
                                " incident triangles");

    SparseWeights weights;
    weights.neighbors.resize(mesh.vertex_count());
    for (const auto& [edge, w] : accum)
    {
        weights.neighbors[edge.first].emplace_back(edge.second, w);
        weights.neighbors[edge.second].emplace_back(edge.first, w);
    }
    for (auto& nbrs : weights.neighbors)
        std::sort(nbrs.begin(), nbrs.end());
    return weights;
}

std::vector<Eigen::Vector3d> laplacian_coords(const Mesh& mesh, const SparseWeights& weights)
{
    if (weights.vertex_count() != mesh.vertex_count())
        throw input_error("weights were built on a different topology");
    std::vector<Eigen::Vector3d> delta(mesh.vertices.size());
    for (int i = 0; i < mesh.vertex_count(); ++i)
    {
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        for (const auto& [j, w] : weights.neighbors[i])
            d += w * (mesh.vertices[i] - mesh.vertices[j]);
        delta[i] = d;
    }
    return delta;
}

void BarycentricAnchor::validate(const Mesh& mesh) const
{
    if (face < 0 || face >= mesh.face_count())
        throw input_error("anchor face index " + std::to_string(face) + " out of range");
    if (std::abs(bary.sum() - 1.0) > 1e-9)
        throw input_error("barycentric coordinates do not sum to 1");
    for (int k = 0; k < 3; ++k)
        if (bary[k] < -1e-12 || bary[k] > 1.0 + 1e-12)
            throw input_error("barycentric coordinate outside [0,1]");
}

Eigen::Vector3d sample_surface(const Mesh& mesh, const BarycentricAnchor& anchor)
{
    anchor.validate(mesh);
    const auto& f = mesh.faces[anchor.face];
    return anchor.bary[0] * mesh.vertices[f[0]] + anchor.bary[1] * mesh.vertices[f[1]] +
           anchor.bary[2] * mesh.vertices[f[2]];
}

} // namespace facekit
