/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/sampling.hpp
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

#include "facekit/dr.hpp"
#include "facekit/mesh.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace facekit {

using Rng = std::mt19937_64;

struct GroupTag
{
    std::string gender;    // "male" | "female"
    std::string ethnicity; // "asian" | "caucasian" | "black"

    bool operator==(const GroupTag&) const = default;
    std::string str() const { return ethnicity + "_" + gender; }
};

struct ShapeEntry
{
    DRFeature feature;
    GroupTag group;
    std::string texture_id; // may be empty
};

/// A set of DR-encoded subjects sharing one reference mesh.
struct ShapeDataset
{
    std::vector<ShapeEntry> entries;
    Mesh reference;
    SparseWeights reference_weights; // built once from the reference

    std::vector<int> group_members(const GroupTag& group) const;
};

/// Loads a dataset manifest: "reference = <mesh file>" followed by one
/// "feature <file> <gender> <ethnicity> [texture-id]" line per subject.
/// Paths are resolved relative to the manifest's directory.
ShapeDataset load_dataset(const std::string& manifest_path);

/// Range of the hyperspherical radius r.
inline constexpr double kRadiusMin = 0.6;
inline constexpr double kRadiusMax = 1.3;

/**
 * Interpolation weights from hyperspherical sampling: r ~ U[0.6, 1.3],
 * theta_1..theta_{m-1} ~ U[0, pi/2], converted to Cartesian coordinates.
 * All components are nonnegative and ||a|| = r.
 */
Eigen::VectorXd sample_hypersphere_weights(int m, Rng& rng);

/// Componentwise linear combination sum_i a_i * features[i].
DRFeature interpolate_dr(const std::vector<DRFeature>& features, const Eigen::VectorXd& weights);

struct SampledFace
{
    Mesh mesh;
    std::string texture_id;
    std::vector<int> member_indices; // dataset entries that were mixed
    Eigen::VectorXd weights;
};

/**
 * Draws m group members without replacement, interpolates their DR features
 * with hyperspherical weights and decodes the result against the dataset
 * reference (anchored at vertex 0). The texture id comes from the group
 * member whose DR feature is L2-closest to the sampled feature.
 */
SampledFace sample_face(const ShapeDataset& dataset, const GroupTag& group, int m, Rng& rng);

struct PCAModel
{
    Eigen::VectorXd mean;               // flattened coordinates, length 3V
    Eigen::MatrixXd components;         // 3V x k, orthonormal columns
    Eigen::VectorXd stddevs;            // per-component standard deviations
    Eigen::VectorXd explained_variance; // ratio per component, non-increasing

    struct GroupStats
    {
        Eigen::VectorXd mean_coeffs;
        Eigen::MatrixXd covariance;
    };
    std::map<std::string, GroupStats> group_stats; // keyed by GroupTag::str()

    int component_count() const { return static_cast<int>(components.cols()); }
    Eigen::VectorXd coefficients(const Mesh& mesh) const;
    Mesh reconstruct(const Eigen::VectorXd& coeffs, const Mesh& topology) const;
};

/**
 * PCA on flattened vertex coordinates. Components with negligible variance
 * are dropped, so k may come back truncated below the request.
 */
PCAModel pca_fit(const std::vector<Mesh>& meshes, int k);

/// Attaches per-group coefficient statistics (mean + covariance) for the
/// categorized sampler.
void pca_fit_group_stats(PCAModel& model, const std::vector<Mesh>& meshes,
                         const std::vector<GroupTag>& groups);

/// Draws coefficients from the group Gaussian N(mu, Sigma) and reconstructs.
Mesh pca_sample_group(const PCAModel& model, const GroupTag& group, const Mesh& topology,
                      Rng& rng);

/// Deterministic per-task seed derived from a master seed (splitmix64 mix),
/// so parallel sampling stays reproducible regardless of scheduling.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

} // namespace facekit
