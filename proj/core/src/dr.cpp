/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/dr.cpp
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
#include "facekit/dr.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace facekit {

Eigen::Matrix3d DRFeature::stretch(int vertex) const
{
    const auto s = data.segment<6>(9 * vertex + 3);
    Eigen::Matrix3d S;
    S << s[0] + 1.0, s[1], s[2],
         s[1], s[3] + 1.0, s[4],
         s[2], s[4], s[5] + 1.0;
    return S;
}

DRFeature DRFeature::zero(int vertex_count, std::string reference_id)
{
    DRFeature f;
    f.data = Eigen::VectorXd::Zero(9 * vertex_count);
    f.reference_id = std::move(reference_id);
    return f;
}

AffineField local_deformation_gradients(const Mesh& deformed, const Mesh& reference,
                                        const SparseWeights& weights)
{
    const int n = reference.vertex_count();
    if (deformed.vertex_count() != n || weights.vertex_count() != n)
        throw input_error("deformed/reference/weights vertex counts differ");

    AffineField field;
    field.transforms.resize(n);
    for (int i = 0; i < n; ++i)
    {
        Eigen::Matrix3d A = Eigen::Matrix3d::Zero(); // sum c e_ref e_ref^T
        Eigen::Matrix3d C = Eigen::Matrix3d::Zero(); // sum c e_def e_ref^T
        for (const auto& [j, w] : weights.neighbors[i])
        {
            const Eigen::Vector3d er = reference.vertices[i] - reference.vertices[j];
            const Eigen::Vector3d ed = deformed.vertices[i] - deformed.vertices[j];
            A += w * er * er.transpose();
            C += w * ed * er.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(A);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        if (lo <= hi * 1e-12)
        {
            A += kGradientTikhonov * Eigen::Matrix3d::Identity();
            field.regularized_vertices.push_back(i);
        }
        field.transforms[i] = A.ldlt().solve(C.transpose()).transpose();
    }
    return field;
}

void polar_decompose(const Eigen::Matrix3d& T, Eigen::Matrix3d& R, Eigen::Matrix3d& S)
{
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(T, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues().minCoeff() <= 0.0)
        throw numeric_error("polar decomposition of a singular matrix");
    const Eigen::Matrix3d U = svd.matrixU();
    const Eigen::Matrix3d V = svd.matrixV();
    Eigen::Vector3d d(1.0, 1.0, (U * V.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    R = U * d.asDiagonal() * V.transpose();
    S = V * d.asDiagonal() * svd.singularValues().asDiagonal() * V.transpose();
    S = 0.5 * (S + S.transpose()).eval(); // kill round-off asymmetry
}

std::pair<Eigen::Vector3d, double> rotation_log(const Eigen::Matrix3d& R)
{
    // Quaternion extraction is stable both near 0 and near pi.
    Eigen::Quaterniond q(R);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const double sin_half = q.vec().norm();
    const double angle = 2.0 * std::atan2(sin_half, q.w());
    if (sin_half < 1e-300) return {Eigen::Vector3d(0.0, 0.0, 1.0), 0.0};
    return {q.vec() / sin_half, angle};
}

Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& axis_angle)
{
    const double theta = axis_angle.norm();
    if (theta < 1e-300) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
}

DRFeature encode_dr(const Mesh& deformed, const Mesh& reference)
{
    return encode_dr(deformed, reference, cotangent_weights(reference));
}

DRFeature encode_dr(const Mesh& deformed, const Mesh& reference, const SparseWeights& weights)
{
    const AffineField field = local_deformation_gradients(deformed, reference, weights);
    const int n = reference.vertex_count();
    DRFeature feature = DRFeature::zero(n);
    for (int i = 0; i < n; ++i)
    {
        Eigen::Matrix3d R, S;
        polar_decompose(field.transforms[i], R, S);
        const auto [axis, angle] = rotation_log(R);
        feature.data.segment<3>(9 * i) = angle * axis;
        feature.data[9 * i + 3] = S(0, 0) - 1.0;
        feature.data[9 * i + 4] = S(0, 1);
        feature.data[9 * i + 5] = S(0, 2);
        feature.data[9 * i + 6] = S(1, 1) - 1.0;
        feature.data[9 * i + 7] = S(1, 2);
        feature.data[9 * i + 8] = S(2, 2) - 1.0;
    }
    return feature;
}

Mesh decode_dr(const DRFeature& feature, const Mesh& reference, int anchor_vertex,
               const Eigen::Vector3d& anchor_position)
{
    return decode_dr(feature, reference, cotangent_weights(reference), anchor_vertex,
                     anchor_position);
}

Mesh decode_dr(const DRFeature& feature, const Mesh& reference, const SparseWeights& weights,
               int anchor_vertex, const Eigen::Vector3d& anchor_position)
{
    const int n = reference.vertex_count();
    if (feature.vertex_count() != n)
        throw input_error("DR feature length does not match reference vertex count");
    if (anchor_vertex < 0 || anchor_vertex >= n) throw input_error("anchor vertex out of range");

    std::vector<Eigen::Matrix3d> T(n);
    for (int i = 0; i < n; ++i)
        T[i] = rotation_exp(feature.rotation_block(i)) * feature.stretch(i);

    // Stationarity of E(P): 2 sum_j c_ij (p_i - p_j) = sum_j c_ij (T_i + T_j) eR_ij.
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::MatrixX3d b = Eigen::MatrixX3d::Zero(n, 3);
    for (int i = 0; i < n; ++i)
    {
        double diag = 0.0;
        for (const auto& [j, w] : weights.neighbors[i])
        {
            const Eigen::Vector3d er = reference.vertices[i] - reference.vertices[j];
            b.row(i) += (w * (T[i] + T[j]) * er).transpose();
            if (i != anchor_vertex && j != anchor_vertex) triplets.emplace_back(i, j, -2.0 * w);
            diag += 2.0 * w;
        }
        triplets.emplace_back(i, i, i == anchor_vertex ? 1.0 : diag);
    }

    // Symmetric gauge fix: eliminate the anchor column into b, pin its row.
    for (int i = 0; i < n; ++i)
    {
        if (i == anchor_vertex) continue;
        for (const auto& [j, w] : weights.neighbors[i])
            if (j == anchor_vertex) b.row(i) += 2.0 * w * anchor_position.transpose();
    }
    b.row(anchor_vertex) = anchor_position.transpose();

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw numeric_error("DR decode: sparse factorization failed (disconnected mesh without "
                            "an anchor in each component?)");
    const Eigen::MatrixX3d P = solver.solve(b);
    if (solver.info() != Eigen::Success) throw numeric_error("DR decode: sparse solve failed");

    Mesh out = reference;
    for (int i = 0; i < n; ++i) out.vertices[i] = P.row(i).transpose();
    return out;
}

namespace {
constexpr char kDrMagic[4] = {'D', 'R', 'F', '1'};
}

void save_dr(const DRFeature& feature, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write DR feature file: " + path);
    out.write(kDrMagic, 4);
    const std::uint64_t count = feature.vertex_count();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(feature.data.data()),
              feature.data.size() * sizeof(double));
    if (!out) throw input_error("short write on DR feature file: " + path);
    std::ofstream meta(path + ".meta");
    meta << "reference = " << feature.reference_id << '\n';
}

DRFeature load_dr(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open DR feature file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDrMagic, 4) != 0)
        throw input_error(path + ": not a DR feature file (bad magic)");
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    DRFeature feature = DRFeature::zero(static_cast<int>(count));
    in.read(reinterpret_cast<char*>(feature.data.data()), feature.data.size() * sizeof(double));
    if (!in) throw input_error(path + ": truncated DR feature file");

    std::ifstream meta(path + ".meta");
    std::string line;
    while (meta && std::getline(meta, line))
    {
        const std::string key = "reference =";
        if (line.rfind(key, 0) == 0)
        {
            std::size_t start = line.find_first_not_of(' ', key.size());
            if (start != std::string::npos) feature.reference_id = line.substr(start);
        }
    }
    return feature;
}

} // namespace facekit
