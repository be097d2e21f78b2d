/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/epnp.cpp
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
#include "facekit/dr.hpp"
#include "facekit/rotation_util.hpp"

#include <array>
#include <cmath>

namespace facekit {
namespace {

constexpr std::array<std::pair<int, int>, 6> kControlPairs = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

// Rigid transform pc ~ R pw + t from paired point sets (Horn's method).
void rigid_from_correspondences(const std::vector<Eigen::Vector3d>& pw,
                                const std::vector<Eigen::Vector3d>& pc, Eigen::Matrix3d& R,
                                Eigen::Vector3d& t)
{
    Eigen::Vector3d cw = Eigen::Vector3d::Zero(), cc = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < pw.size(); ++i)
    {
        cw += pw[i];
        cc += pc[i];
    }
    cw /= pw.size();
    cc /= pc.size();
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < pw.size(); ++i) H += (pc[i] - cc) * (pw[i] - cw).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d d(1.0, 1.0,
                      (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    t = cc - R * cw;
}

// Gauss-Newton on the 4 null-space weights, matching control-point distances.
Eigen::Vector4d refine_betas(const Eigen::Matrix<double, 12, 4>& V,
                             const Eigen::Matrix<double, 6, 1>& rho, Eigen::Vector4d betas)
{
    for (int iter = 0; iter < 10; ++iter)
    {
        Eigen::Matrix<double, 6, 4> J;
        Eigen::Matrix<double, 6, 1> r;
        for (int p = 0; p < 6; ++p)
        {
            const auto [a, b] = kControlPairs[p];
            Eigen::Vector3d diff = Eigen::Vector3d::Zero();
            std::array<Eigen::Vector3d, 4> dv;
            for (int k = 0; k < 4; ++k)
            {
                dv[k] = V.block<3, 1>(3 * a, k) - V.block<3, 1>(3 * b, k);
                diff += betas[k] * dv[k];
            }
            r[p] = diff.squaredNorm() - rho[p];
            for (int k = 0; k < 4; ++k) J(p, k) = 2.0 * diff.dot(dv[k]);
        }
        betas -= J.colPivHouseholderQr().solve(r);
    }
    return betas;
}

// Camera-frame control points for a beta combination; flips sign so that
// the reconstructed cloud sits in front of the camera.
std::vector<Eigen::Vector3d> camera_points(const Eigen::Matrix<double, 12, 4>& V,
                                           const Eigen::Vector4d& betas,
                                           const Eigen::MatrixX4d& alphas)
{
    Eigen::Matrix<double, 12, 1> x = V * betas;
    std::vector<Eigen::Vector3d> pc(alphas.rows());
    double zsum = 0.0;
    for (Eigen::Index i = 0; i < alphas.rows(); ++i)
    {
        Eigen::Vector3d p = Eigen::Vector3d::Zero();
        for (int j = 0; j < 4; ++j) p += alphas(i, j) * x.segment<3>(3 * j);
        pc[i] = p;
        zsum += p.z();
    }
    if (zsum < 0.0)
        for (auto& p : pc) p = -p;
    return pc;
}

} // namespace

Extrinsics epnp_pose(const std::vector<Eigen::Vector3d>& points3d,
                     const std::vector<Eigen::Vector2d>& points2d, const Intrinsics& intr)
{
    const int n = static_cast<int>(points3d.size());
    if (n < 6 || points2d.size() != points3d.size())
        throw input_error("EPnP requires >= 6 paired correspondences");

    // Control points: centroid + principal axes of the world cloud.
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : points3d) centroid += p;
    centroid /= n;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : points3d) cov += (p - centroid) * (p - centroid).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    if (eig.eigenvalues().minCoeff() < 1e-10 * eig.eigenvalues().maxCoeff())
        throw numeric_error("EPnP: degenerate (near-coplanar) point configuration");

    std::vector<Eigen::Vector3d> cw(4);
    cw[0] = centroid;
    for (int k = 0; k < 3; ++k)
        cw[k + 1] = centroid + std::sqrt(eig.eigenvalues()[k] / n) * eig.eigenvectors().col(k);

    // Barycentric coordinates of every point in the control-point frame.
    Eigen::Matrix3d basis;
    for (int k = 0; k < 3; ++k) basis.col(k) = cw[k + 1] - cw[0];
    const Eigen::Matrix3d basis_inv = basis.inverse();
    Eigen::MatrixX4d alphas(n, 4);
    for (int i = 0; i < n; ++i)
    {
        const Eigen::Vector3d a = basis_inv * (points3d[i] - cw[0]);
        alphas(i, 1) = a[0];
        alphas(i, 2) = a[1];
        alphas(i, 3) = a[2];
        alphas(i, 0) = 1.0 - a.sum();
    }

    const double g = intr.effective_focal();
    Eigen::MatrixXd M(2 * n, 12);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 4; ++j)
        {
            M(2 * i, 3 * j) = alphas(i, j) * g;
            M(2 * i, 3 * j + 1) = 0.0;
            M(2 * i, 3 * j + 2) = alphas(i, j) * (intr.cx - points2d[i].x());
            M(2 * i + 1, 3 * j) = 0.0;
            M(2 * i + 1, 3 * j + 1) = alphas(i, j) * g;
            M(2 * i + 1, 3 * j + 2) = alphas(i, j) * (intr.cy - points2d[i].y());
        }

    const Eigen::Matrix<double, 12, 12> MtM = M.transpose() * M;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> null_eig(MtM);
    Eigen::Matrix<double, 12, 4> V = null_eig.eigenvectors().leftCols<4>();

    Eigen::Matrix<double, 6, 1> rho;
    for (int p = 0; p < 6; ++p)
        rho[p] = (cw[kControlPairs[p].first] - cw[kControlPairs[p].second]).squaredNorm();

    // Distance-constraint matrix rows for up to 3 null-space vectors.
    Eigen::Matrix<double, 6, 6> L;
    for (int p = 0; p < 6; ++p)
    {
        const auto [a, b] = kControlPairs[p];
        std::array<Eigen::Vector3d, 3> dv;
        for (int k = 0; k < 3; ++k)
            dv[k] = V.block<3, 1>(3 * a, k) - V.block<3, 1>(3 * b, k);
        L(p, 0) = dv[0].squaredNorm();
        L(p, 1) = 2.0 * dv[0].dot(dv[1]);
        L(p, 2) = dv[1].squaredNorm();
        L(p, 3) = 2.0 * dv[0].dot(dv[2]);
        L(p, 4) = 2.0 * dv[1].dot(dv[2]);
        L(p, 5) = dv[2].squaredNorm();
    }

    std::vector<Eigen::Vector4d> candidates;
    { // case N = 1
        const double b11 = L.col(0).dot(rho) / L.col(0).squaredNorm();
        candidates.push_back({std::sqrt(std::abs(b11)), 0.0, 0.0, 0.0});
    }
    { // case N = 2: unknowns (b1^2, b1 b2, b2^2)
        const Eigen::Vector3d s =
            L.leftCols<3>().colPivHouseholderQr().solve(rho);
        Eigen::Vector4d b = Eigen::Vector4d::Zero();
        b[0] = std::sqrt(std::abs(s[0]));
        b[1] = std::sqrt(std::abs(s[2]));
        if (s[1] < 0.0) b[1] = -b[1];
        if (s[0] < 0.0) std::swap(b[0], b[1]);
        candidates.push_back(b);
    }
    { // case N = 3: unknowns (b1^2, b1 b2, b2^2, b1 b3, b2 b3)
        const Eigen::Matrix<double, 6, 5> L5 = L.leftCols<5>();
        const Eigen::Matrix<double, 5, 1> s = L5.colPivHouseholderQr().solve(rho);
        Eigen::Vector4d b = Eigen::Vector4d::Zero();
        b[0] = std::sqrt(std::abs(s[0]));
        b[1] = std::sqrt(std::abs(s[2]));
        if (s[1] < 0.0) b[1] = -b[1];
        if (b[0] > 1e-12) b[2] = s[3] / b[0];
        candidates.push_back(b);
    }

    Extrinsics best;
    double best_err = std::numeric_limits<double>::infinity();
    for (const auto& beta0 : candidates)
    {
        const Eigen::Vector4d betas = refine_betas(V, rho, beta0);
        const std::vector<Eigen::Vector3d> pc = camera_points(V, betas, alphas);
        Extrinsics extr;
        Eigen::Matrix3d R;
        rigid_from_correspondences(points3d, pc, R, extr.translation);
        extr.rotation = Eigen::Quaterniond(R).normalized();
        const double err = reprojection_rmse(points3d, points2d, extr, intr);
        if (err < best_err)
        {
            best_err = err;
            best = extr;
        }
    }
    if (!std::isfinite(best_err)) throw numeric_error("EPnP: no valid pose candidate");

    // Short reprojection Gauss-Newton polish of the winning candidate.
    Eigen::Vector3d w = Eigen::Vector3d::Zero();
    const Eigen::Matrix3d R0 = best.rotation.toRotationMatrix();
    Eigen::Vector3d t = best.translation;
    double lambda = 1e-6;
    double err = best_err;
    for (int iter = 0; iter < 25; ++iter)
    {
        const Eigen::Matrix3d Rc = rotation_exp(w) * R0;
        Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> grad = Eigen::Matrix<double, 6, 1>::Zero();
        const Eigen::Matrix3d Jl = so3_left_jacobian(w);
        bool behind = false;
        for (int i = 0; i < n; ++i)
        {
            const Eigen::Vector3d v = Rc * points3d[i];
            const Eigen::Vector3d p = v + t;
            if (p.z() <= 0.0)
            {
                behind = true;
                break;
            }
            Eigen::Matrix<double, 2, 3> P;
            P << g / p.z(), 0.0, -g * p.x() / (p.z() * p.z()),
                 0.0, g / p.z(), -g * p.y() / (p.z() * p.z());
            Eigen::Matrix<double, 2, 6> J;
            J.leftCols<3>() = P * (-skew(v) * Jl);
            J.rightCols<3>() = P;
            const Eigen::Vector2d r(g * p.x() / p.z() + intr.cx - points2d[i].x(),
                                    g * p.y() / p.z() + intr.cy - points2d[i].y());
            H += J.transpose() * J;
            grad += J.transpose() * r;
        }
        if (behind) break;
        const Eigen::Matrix<double, 6, 1> step =
            (H + lambda * H.diagonal().asDiagonal().toDenseMatrix())
                .ldlt()
                .solve(-grad);
        Extrinsics trial;
        trial.rotation = Eigen::Quaterniond(rotation_exp(w + step.head<3>()) * R0).normalized();
        trial.translation = t + step.tail<3>();
        const double trial_err = reprojection_rmse(points3d, points2d, trial, intr);
        if (trial_err < err)
        {
            w += step.head<3>();
            t = trial.translation;
            err = trial_err;
            best = trial;
            lambda = std::max(lambda * 0.1, 1e-12);
            if (step.norm() < 1e-14) break;
        }
        else
        {
            lambda *= 10.0;
            if (lambda > 1e8) break;
        }
    }
    return best;
}

} // namespace facekit
