/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/sampling.cpp
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
#include "facekit/sampling.hpp"

#include "facekit/mesh_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace facekit {

std::vector<int> ShapeDataset::group_members(const GroupTag& group) const
{
    std::vector<int> members;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].group == group) members.push_back(static_cast<int>(i));
    return members;
}

ShapeDataset load_dataset(const std::string& manifest_path)
{
    std::ifstream in(manifest_path);
    if (!in) throw input_error("cannot open dataset manifest: " + manifest_path);
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

    ShapeDataset dataset;
    bool have_reference = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "reference")
        {
            std::string eq, file;
            if (!(ss >> eq >> file) || eq != "=")
                throw input_error(manifest_path + ":" + std::to_string(line_no) +
                                  ": expected 'reference = <mesh file>'");
            dataset.reference = load_mesh((base / file).string());
            dataset.reference_weights = cotangent_weights(dataset.reference);
            have_reference = true;
        }
        else if (tag == "feature")
        {
            ShapeEntry entry;
            std::string file;
            if (!(ss >> file >> entry.group.gender >> entry.group.ethnicity))
                throw input_error(manifest_path + ":" + std::to_string(line_no) +
                                  ": expected 'feature <file> <gender> <ethnicity> [texture-id]'");
            ss >> entry.texture_id;
            entry.feature = load_dr((base / file).string());
            dataset.entries.push_back(std::move(entry));
        }
        else
        {
            throw input_error(manifest_path + ":" + std::to_string(line_no) +
                              ": unknown record '" + tag + "'");
        }
    }
    if (!have_reference) throw input_error(manifest_path + ": missing reference mesh");
    for (const auto& entry : dataset.entries)
        if (entry.feature.vertex_count() != dataset.reference.vertex_count())
            throw input_error(manifest_path + ": feature length does not match reference");
    return dataset;
}

Eigen::VectorXd sample_hypersphere_weights(int m, Rng& rng)
{
    if (m < 1) throw input_error("weight count m must be >= 1");
    std::uniform_real_distribution<double> radius_dist(kRadiusMin, kRadiusMax);
    std::uniform_real_distribution<double> angle_dist(0.0, std::numbers::pi / 2.0);
    const double r = radius_dist(rng);

    Eigen::VectorXd a(m);
    double sin_product = 1.0;
    for (int k = 0; k < m - 1; ++k)
    {
        const double theta = angle_dist(rng);
        a[k] = r * sin_product * std::cos(theta);
        sin_product *= std::sin(theta);
    }
    a[m - 1] = r * sin_product;
    return a;
}

DRFeature interpolate_dr(const std::vector<DRFeature>& features, const Eigen::VectorXd& weights)
{
    if (features.empty() || weights.size() != static_cast<Eigen::Index>(features.size()))
        throw input_error("feature list and weight vector lengths differ");
    DRFeature out = DRFeature::zero(features.front().vertex_count(),
                                    features.front().reference_id);
    for (std::size_t i = 0; i < features.size(); ++i)
    {
        if (features[i].data.size() != out.data.size())
            throw input_error("DR features have mismatched lengths");
        out.data += weights[static_cast<Eigen::Index>(i)] * features[i].data;
    }
    return out;
}

SampledFace sample_face(const ShapeDataset& dataset, const GroupTag& group, int m, Rng& rng)
{
    std::vector<int> members = dataset.group_members(group);
    if (static_cast<int>(members.size()) < m)
        throw input_error("group '" + group.str() + "' has " + std::to_string(members.size()) +
                          " members, need " + std::to_string(m));

    // Fisher-Yates prefix: m distinct members, order driven by the rng.
    for (int k = 0; k < m; ++k)
    {
        std::uniform_int_distribution<int> pick(k, static_cast<int>(members.size()) - 1);
        std::swap(members[k], members[pick(rng)]);
    }
    members.resize(m);

    SampledFace result;
    result.member_indices = members;
    result.weights = sample_hypersphere_weights(m, rng);

    std::vector<DRFeature> chosen;
    chosen.reserve(m);
    for (int idx : members) chosen.push_back(dataset.entries[idx].feature);
    const DRFeature mixed = interpolate_dr(chosen, result.weights);

    result.mesh = decode_dr(mixed, dataset.reference, dataset.reference_weights, 0,
                            dataset.reference.vertices[0]);

    // Texture from the L2-closest group member in DR space.
    const std::vector<int> all_members = dataset.group_members(group);
    double best = std::numeric_limits<double>::infinity();
    for (int idx : all_members)
    {
        const double d = (dataset.entries[idx].feature.data - mixed.data).norm();
        if (d < best)
        {
            best = d;
            result.texture_id = dataset.entries[idx].texture_id;
        }
    }
    return result;
}

Eigen::VectorXd PCAModel::coefficients(const Mesh& mesh) const
{
    return components.transpose() * (mesh.flatten() - mean);
}

Mesh PCAModel::reconstruct(const Eigen::VectorXd& coeffs, const Mesh& topology) const
{
    if (coeffs.size() != components.cols()) throw input_error("coefficient length mismatch");
    Mesh out = topology;
    out.set_from_flat(mean + components * coeffs);
    return out;
}

PCAModel pca_fit(const std::vector<Mesh>& meshes, int k)
{
    if (meshes.size() < 2) throw input_error("PCA needs at least 2 meshes");
    const int n = static_cast<int>(meshes.size());
    const Eigen::Index dim = 3 * meshes.front().vertex_count();

    Eigen::MatrixXd X(dim, n);
    for (int i = 0; i < n; ++i)
    {
        if (meshes[i].vertex_count() != meshes.front().vertex_count())
            throw input_error("PCA input meshes have mismatched topology");
        X.col(i) = meshes[i].flatten();
    }
    PCAModel model;
    model.mean = X.rowwise().mean();
    X.colwise() -= model.mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
    const Eigen::VectorXd sv = svd.singularValues();
    const double total = sv.squaredNorm();

    // Drop directions with negligible variance; cap at the request and rank.
    // The absolute floor discards rounding noise left by exact duplicates.
    int keep = 0;
    const double tol = std::max(sv.size() > 0 ? sv[0] * 1e-10 : 0.0,
                                1e-9 * (1.0 + model.mean.norm()));
    for (Eigen::Index i = 0; i < sv.size() && keep < k; ++i)
        if (sv[i] > tol) ++keep;

    model.components = svd.matrixU().leftCols(keep);
    model.stddevs = sv.head(keep) / std::sqrt(static_cast<double>(n - 1));
    model.explained_variance =
        total > 0.0 ? (sv.head(keep).array().square() / total).matrix().eval()
                    : Eigen::VectorXd::Zero(keep).eval();
    return model;
}

void pca_fit_group_stats(PCAModel& model, const std::vector<Mesh>& meshes,
                         const std::vector<GroupTag>& groups)
{
    if (meshes.size() != groups.size()) throw input_error("mesh/group list lengths differ");
    std::map<std::string, std::vector<Eigen::VectorXd>> per_group;
    for (std::size_t i = 0; i < meshes.size(); ++i)
        per_group[groups[i].str()].push_back(model.coefficients(meshes[i]));

    for (const auto& [key, coeffs] : per_group)
    {
        PCAModel::GroupStats stats;
        const int k = model.component_count();
        stats.mean_coeffs = Eigen::VectorXd::Zero(k);
        for (const auto& c : coeffs) stats.mean_coeffs += c;
        stats.mean_coeffs /= static_cast<double>(coeffs.size());
        stats.covariance = Eigen::MatrixXd::Zero(k, k);
        if (coeffs.size() > 1)
        {
            for (const auto& c : coeffs)
            {
                const Eigen::VectorXd d = c - stats.mean_coeffs;
                stats.covariance += d * d.transpose();
            }
            stats.covariance /= static_cast<double>(coeffs.size() - 1);
        }
        model.group_stats[key] = std::move(stats);
    }
}

Mesh pca_sample_group(const PCAModel& model, const GroupTag& group, const Mesh& topology,
                      Rng& rng)
{
    auto it = model.group_stats.find(group.str());
    if (it == model.group_stats.end())
        throw input_error("no PCA statistics for group '" + group.str() + "'");
    const auto& stats = it->second;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stats.covariance);
    const Eigen::VectorXd sqrt_eval = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();

    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(stats.mean_coeffs.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);

    const Eigen::VectorXd coeffs =
        stats.mean_coeffs + eig.eigenvectors() * sqrt_eval.asDiagonal() * z;
    return model.reconstruct(coeffs, topology);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index)
{
    // splitmix64 finalizer over (seed, index)
    std::uint64_t x = master_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

} // namespace facekit
