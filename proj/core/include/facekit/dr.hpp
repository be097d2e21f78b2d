/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/dr.hpp
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

#include "facekit/geometry.hpp"
#include "facekit/mesh.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace facekit {

/**
 * Deformation-representation feature: a per-vertex 9-vector relative to a
 * reference mesh. Layout per vertex: 3 axis-angle entries (theta * axis)
 * followed by the 6 unique entries of the symmetric stretch deviation S - I
 * in the order (S00-1, S01, S02, S11-1, S12, S22-1).
 */
struct DRFeature
{
    Eigen::VectorXd data;      ///< length = vertex count * 9
    std::string reference_id;  ///< name of the reference mesh this encodes against

    int vertex_count() const { return static_cast<int>(data.size() / 9); }

    Eigen::Vector3d rotation_block(int vertex) const { return data.segment<3>(9 * vertex); }
    /// Reassembles the full symmetric S matrix (not S - I) for one vertex.
    Eigen::Matrix3d stretch(int vertex) const;

    static DRFeature zero(int vertex_count, std::string reference_id = {});
};

/// Per-vertex local affine deformation gradients T_i.
struct AffineField
{
    std::vector<Eigen::Matrix3d> transforms;
    /// Vertices whose 1-ring normal matrix was rank deficient and needed a
    /// Tikhonov term.
    std::vector<int> regularized_vertices;
};

/// Tikhonov term added to rank-deficient 3x3 normal matrices (flat 1-rings).
inline constexpr double kGradientTikhonov = 1e-8;

/**
 * Per-vertex deformation gradients: T_i minimizes
 * sum_j c_ij || (p_i - p_j) - T_i (pR_i - pR_j) ||^2 over the reference
 * 1-ring, solved through the 3x3 normal equations.
 */
AffineField local_deformation_gradients(const Mesh& deformed, const Mesh& reference,
                                        const SparseWeights& weights);

/**
 * Polar decomposition T = R * S with R a proper rotation (det = +1) and S
 * symmetric. If det(T) < 0 the reflection is absorbed into S. Throws
 * numeric_error on singular T.
 */
void polar_decompose(const Eigen::Matrix3d& T, Eigen::Matrix3d& R, Eigen::Matrix3d& S);

/**
 * Axis-angle extraction of a proper rotation: returns (unit axis, angle in
 * [0, pi]). The zero rotation returns axis (0,0,1).
 */
std::pair<Eigen::Vector3d, double> rotation_log(const Eigen::Matrix3d& R);

/// Rodrigues exponential of theta * axis (axis need not be unit if theta
/// is folded in; pass the 3-vector theta*omega).
Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& axis_angle);

/// Encodes a deformed mesh against a reference of identical topology.
DRFeature encode_dr(const Mesh& deformed, const Mesh& reference);
DRFeature encode_dr(const Mesh& deformed, const Mesh& reference, const SparseWeights& weights);

/**
 * Reconstructs the mesh that is the exact stationary point of the DR energy
 * E(P) = sum_i sum_j c_ij ||(p_i - p_j) - T_i (pR_i - pR_j)||^2, with the
 * translation gauge pinned by placing vertex `anchor_vertex` at
 * `anchor_position`. The stationarity condition carries (T_i + T_j) on the
 * right-hand side since each edge appears in both endpoint neighborhoods.
 */
Mesh decode_dr(const DRFeature& feature, const Mesh& reference, int anchor_vertex,
               const Eigen::Vector3d& anchor_position);
Mesh decode_dr(const DRFeature& feature, const Mesh& reference, const SparseWeights& weights,
               int anchor_vertex, const Eigen::Vector3d& anchor_position);

/**
 * Binary DR feature file: magic "DRF1", little-endian uint64 vertex count,
 * then count*9 little-endian float64 values. A "<path>.meta" text sidecar
 * names the reference mesh.
 */
void save_dr(const DRFeature& feature, const std::string& path);
DRFeature load_dr(const std::string& path);

} // namespace facekit
