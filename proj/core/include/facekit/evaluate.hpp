/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/evaluate.hpp
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

#include <Eigen/Core>

#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace facekit {

/// Rigid (optionally similarity) alignment estimated from correspondences.
struct AlignmentResult
{
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double scale = 1.0;
    double pre_rmse = 0.0;
    double post_rmse = 0.0;

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const
    {
        return scale * (rotation * p) + translation;
    }
};

/**
 * Least-squares rigid (or, with allow_scale, similarity) transform mapping
 * src onto dst: the orthogonal-Procrustes solution with a reflection guard.
 * Throws numeric_error when the points are degenerate (all collinear).
 */
AlignmentResult procrustes_align(const std::vector<Eigen::Vector3d>& src,
                                 const std::vector<Eigen::Vector3d>& dst, bool allow_scale);

/// Bounding-volume hierarchy over a mesh's triangles for exact closest
/// point-to-triangle queries.
class Bvh
{
public:
    explicit Bvh(const Mesh& mesh);

    /// Exact nearest distance from the point to any triangle (face interior,
    /// edge, or vertex). `closest`, when given, receives the foot point.
    double distance(const Eigen::Vector3d& point, Eigen::Vector3d* closest = nullptr) const;

private:
    struct Node
    {
        Eigen::Vector3d lo, hi;
        int left = -1, right = -1; // internal children
        int begin = 0, end = 0;    // leaf triangle range
    };
    std::vector<Node> nodes_;
    std::vector<int> order_;                      // triangle indices, leaf-partitioned
    std::vector<std::array<Eigen::Vector3d, 3>> triangles_;

    int build(std::vector<Eigen::Vector3d>& centroids, int begin, int end);
};

/// Exact nearest distance from the point to the mesh surface.
double point_to_mesh_distance(const Eigen::Vector3d& point, const Bvh& bvh);

/// Closest point on a single triangle (Ericson's region test), exposed for
/// oracle testing.
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/**
 * Point-to-point ICP refinement of an initial alignment: alternates closest
 * surface points on dst (via a BVH) with a Procrustes update. The worst 5%
 * of matches are trimmed after iteration 3 to guard partial overlap. RMSE is
 * non-increasing per iteration; the best transform found is returned.
 */
AlignmentResult icp_refine(const Mesh& src, const Mesh& dst, const AlignmentResult& init,
                           int max_iterations = 30, double tol = 1e-9,
                           std::vector<double>* rmse_history = nullptr);

/// Fraction of worst correspondences dropped by ICP trimming.
inline constexpr double kIcpTrimFraction = 0.05;
/// Iteration after which ICP trimming becomes active.
inline constexpr int kIcpTrimStart = 3;

/**
 * Keeps the vertices within d millimeters of the center, keeps faces whose
 * three corners all survive, and reindexes. d = +infinity is the identity.
 * Throws input_error when nothing survives.
 */
Mesh crop_by_radius(const Mesh& mesh, const Eigen::Vector3d& center, double d);

/// Symmetric reconstruction error: the average of the two directed
/// vertex-to-mesh RMSEs between ground truth and prediction, in mm.
double armse(const Mesh& gt, const Mesh& pred);

/// Per-gt-vertex distances to the predicted surface, in mm.
std::vector<double> vertex_distances(const Mesh& gt, const Mesh& pred);

/// Error tolerance (mm) above which heatmap vertices render hard red.
inline constexpr double kHeatmapToleranceMm = 5.0;

/// Blue-to-red error ramp; distances at or above the tolerance are hard red.
Eigen::Vector3d heatmap_color(double distance_mm, double tolerance_mm);

/// Writes gt with per-vertex error colors (blue = 0, red >= tolerance).
void heatmap_export(const Mesh& gt, const Mesh& pred, double tolerance_mm,
                    const std::string& path);

/// One evaluation row: a (model, crop radius) pair.
struct ErrorReport
{
    std::string model_id;
    double d = std::numeric_limits<double>::infinity(); // crop radius, mm
    double armse_mm = 0.0;
    int kept_gt = 0, discarded_gt = 0;
    int kept_pred = 0, discarded_pred = 0;
};

/// Structured-text report: one row per entry plus a mean +- 1.96 x standard
/// error aggregation per crop radius.
void write_report(const std::vector<ErrorReport>& rows, const std::string& path);

} // namespace facekit
