/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/geometry.hpp
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

#include <Eigen/SparseCore>

namespace facekit {

/**
 * Symmetric per-edge cotangent weights c_ij with per-vertex neighbor lists.
 * Weights are keyed on mesh edges only; c_ij == c_ji by construction.
 */
struct SparseWeights
{
    /// neighbors[i] = list of (j, c_ij), sorted by j.
    std::vector<std::vector<std::pair<int, double>>> neighbors;

    int vertex_count() const { return static_cast<int>(neighbors.size()); }

    /// Weight of edge (i,j); throws input_error if (i,j) is not an edge.
    double weight(int i, int j) const;

    /// The weighted graph Laplacian L with L_ii = sum_j c_ij, L_ij = -c_ij.
    Eigen::SparseMatrix<double> laplacian_matrix() const;
};

/// Per-angle cotangent clamp range; keeps the decode normal matrix positive
/// definite in the presence of sliver triangles.
inline constexpr double kCotanClampMin = 1e-6;
inline constexpr double kCotanClampMax = 1e6;

/**
 * Cotangent edge weights: c_ij = 1/2 * sum over triangles incident to edge
 * (i,j) of cot(angle opposite the edge), each cotangent clamped to
 * [kCotanClampMin, kCotanClampMax]. Boundary edges keep the single incident
 * term. Throws numeric_error on edges with more than two incident triangles.
 */
SparseWeights cotangent_weights(const Mesh& mesh);

/// Differential coordinates: delta_i = sum_j c_ij (p_i - p_j).
std::vector<Eigen::Vector3d> laplacian_coords(const Mesh& mesh, const SparseWeights& weights);

/// A point on the mesh surface: face index plus barycentric coordinates.
struct BarycentricAnchor
{
    int face = -1;
    Eigen::Vector3d bary = Eigen::Vector3d::Zero();

    /// Checks the barycentric triple sums to 1 (within 1e-9) with components
    /// in [0,1] and the face index is valid for the mesh.
    void validate(const Mesh& mesh) const;
};

/// Barycentric combination of the anchored triangle's vertex positions.
Eigen::Vector3d sample_surface(const Mesh& mesh, const BarycentricAnchor& anchor);

} // namespace facekit
