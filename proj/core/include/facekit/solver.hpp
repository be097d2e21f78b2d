/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/solver.hpp
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

#include "facekit/camera.hpp"
#include "facekit/geometry.hpp"
#include "facekit/mesh.hpp"

#include <Eigen/SparseCore>

#include <map>
#include <string>
#include <vector>

namespace facekit {

/// Expression blendshape basis: M per-vertex displacement fields plus the
/// per-blendshape eigenvalue scales used by the expression prior.
struct BlendshapeBasis
{
    std::vector<Eigen::MatrixX3d> shapes; // each V x 3
    Eigen::VectorXd sigma;                // M positive scales

    int count() const { return static_cast<int>(shapes.size()); }
    int vertex_count() const
    {
        return shapes.empty() ? 0 : static_cast<int>(shapes.front().rows());
    }
};

/// Binary basis file: magic "BSB1", uint64 M, uint64 V, M float64 sigmas,
/// then M blocks of V*3 float64 displacements, all little-endian.
void save_blendshapes(const BlendshapeBasis& basis, const std::string& path);
BlendshapeBasis load_blendshapes(const std::string& path);

/// An ordered path of template vertices along which a contour landmark's
/// anchor may slide.
struct ContourStrip
{
    std::vector<int> vertices;
};

/**
 * Detected 2D landmarks with their barycentric anchors on the template.
 * The 17 face-outline landmarks carry a contour flag and a strip id; the
 * two outermost eye landmarks define the W_eye normalization distance.
 */
struct LandmarkSet
{
    std::vector<Eigen::Vector2d> points;
    std::vector<int> markup; // mark-up index per landmark (104-point scheme)
    std::vector<BarycentricAnchor> anchors;
    std::vector<bool> contour;
    std::vector<int> strip_ids; // -1 when the landmark does not slide
    std::map<int, ContourStrip> strips;
    int eye_left = -1;  // positions into `points`
    int eye_right = -1;

    int count() const { return static_cast<int>(points.size()); }
    /// Pixel distance between the two outermost eye landmarks.
    double eye_distance() const;
};

/// Landmark file: one "<markup-index> <x> <y>" line per landmark.
std::vector<std::pair<int, Eigen::Vector2d>> load_landmark_points(const std::string& path);
void save_landmark_points(const std::vector<std::pair<int, Eigen::Vector2d>>& points,
                          const std::string& path);

/**
 * Anchor table: "eye_corners <markup> <markup>", one
 * "anchor <markup> <face> <b1> <b2> <b3> <contour 0|1> <strip-id|-1>" per
 * landmark, and "strip <id> <v0> <v1> ..." for each sliding path. Throws
 * input_error if any detected landmark has no anchor entry.
 */
LandmarkSet build_landmark_set(const std::vector<std::pair<int, Eigen::Vector2d>>& points,
                               const std::string& anchor_table_path);

/// Fit parameters p = [beta, deltaP, t, q, fs].
struct FitParams
{
    Eigen::VectorXd beta;    // M expression weights
    Eigen::MatrixX3d delta;  // V x 3 corrective field, mm
    Extrinsics extrinsics;
    double fs = 1.0;

    /// P_F = P + sum_i beta_i B_i + deltaP.
    Mesh reconstruct(const Mesh& neutral, const BlendshapeBasis& basis) const;
};

void save_fit_params(const FitParams& params, const Intrinsics& intr, const std::string& path);
FitParams load_fit_params(const std::string& path, Intrinsics& intr);

struct SolverConfig
{
    int outer_iterations = 5;  // N
    int inner_iterations = 10; // Gauss-Newton steps per outer iteration
    double omega_c = 25.0;
    double omega_r = 10.0;
    double lambda_delta = 4.0;
    double lambda_f = 5.0;
    double lambda_q = 5.0;
    double damping_init = 1e-3;
    int max_damping_retries = 8;
    double energy_tolerance = 1e-14; // relative decrease stop criterion
    double step_tolerance = 1e-12;

    void validate() const;
};

/// Residual contributed by a landmark whose anchor falls behind the camera;
/// keeps the damped solver recoverable instead of failing.
inline constexpr double kBehindCameraResidual = 1e6;

/**
 * Optimization state: the rotation is stored as a fixed initial quaternion
 * q0 plus an accumulated tangent deviation w, composed as q = exp(w) * q0.
 * The prior penalizes ||w||^2.
 */
struct FitState
{
    Eigen::VectorXd beta;
    Eigen::MatrixX3d delta;
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    Eigen::Vector3d w = Eigen::Vector3d::Zero();
    double fs = 1.0;
    Eigen::Quaterniond q0 = Eigen::Quaterniond::Identity();

    Extrinsics extrinsics() const;
    FitParams to_params() const;

    int parameter_count() const
    {
        return static_cast<int>(beta.size()) + 3 * static_cast<int>(delta.rows()) + 7;
    }
    Eigen::VectorXd pack() const;
    void unpack(const Eigen::VectorXd& p);
};

/// Precomputed per-(template, basis) quantities shared by all energy
/// assemblies: cotangent weights, the Laplacian matrix and L applied to
/// every blendshape.
struct FitWorkspace
{
    SparseWeights weights;
    Eigen::SparseMatrix<double> laplacian;
    std::vector<Eigen::MatrixX3d> laplacian_of_shapes;
};

FitWorkspace make_fit_workspace(const Mesh& neutral, const BlendshapeBasis& basis);

/// Stacked residual vector and sparse Jacobian of the full energy
/// E = E_l + omega_c E_c + omega_r E_r in least-squares form (E = ||r||^2).
struct ResidualSystem
{
    Eigen::VectorXd r;
    Eigen::SparseMatrix<double> J;
    bool behind_camera = false;
    // residual row spans for per-term energies
    int landmark_rows = 0;
    int corrective_rows = 0;
    int prior_rows = 0;

    double landmark_energy() const { return r.head(landmark_rows).squaredNorm(); }
    double total_energy() const { return r.squaredNorm(); }
};

ResidualSystem assemble_residuals(const FitState& state, const Mesh& neutral,
                                  const BlendshapeBasis& basis, const LandmarkSet& lms,
                                  const Intrinsics& intr, const SolverConfig& config,
                                  const Eigen::VectorXd& beta_prev, const FitWorkspace& ws,
                                  bool with_jacobian);

/// E_l = (100/W_eye) * sum_i ||project(sample(P_F, m_i)) - L_i||^2.
double landmark_energy(const FitParams& params, const Mesh& neutral, const BlendshapeBasis& basis,
                       const LandmarkSet& lms, const Intrinsics& intr,
                       bool* behind_camera = nullptr);

/// E_c = ||L(P_F) - L(P + sum beta_prev_i B_i)||^2 + lambda_delta ||deltaP||^2.
double corrective_energy(const FitParams& params, const Mesh& neutral,
                         const BlendshapeBasis& basis, const FitWorkspace& ws,
                         const Eigen::VectorXd& beta_prev, double lambda_delta);

/// E_r = sum beta_i^2/sigma_i^2 + lambda_f log^2(fs) + lambda_q ||w||^2,
/// with w the accumulated rotation deviation from the initialization.
double prior_energy(const FitParams& params, const BlendshapeBasis& basis,
                    const SolverConfig& config, const Eigen::Vector3d& rotation_deviation);

/// E = E_l + omega_c E_c + omega_r E_r.
double total_energy(double landmark, double corrective, double prior, const SolverConfig& config);

/**
 * Moves each contour landmark's anchor along its precomputed strip to the
 * candidate whose projection is nearest the detected 2D point. The current
 * anchor is always a candidate, so the summed contour reprojection distance
 * never increases. Non-contour anchors are untouched.
 */
LandmarkSet slide_contour_anchors(const FitParams& params, const Mesh& neutral,
                                  const BlendshapeBasis& basis, const LandmarkSet& lms,
                                  const Intrinsics& intr);

struct IterationDiagnostics
{
    int outer_iteration = 0;
    double landmark = 0.0, corrective = 0.0, prior = 0.0, total = 0.0;
    double total_at_start = 0.0; // same energy definition, before the inner steps
    int inner_steps = 0;
};

struct FitResult
{
    FitParams params;
    Eigen::Vector3d rotation_deviation = Eigen::Vector3d::Zero();
    LandmarkSet landmarks; // with final (slid) anchors
    std::vector<IterationDiagnostics> diagnostics;
    bool used_frontal_fallback = false;
    bool diverged = false; // damping retries exhausted; best-so-far returned
};

/**
 * Joint Gauss-Newton fit over p = [beta, deltaP, t, q, fs]. Initialization:
 * beta = deltaP = 0, fs = 1, pose from EPnP over the landmark anchors (a
 * frontal default pose on EPnP failure). Each of the N outer iterations
 * slides the contour anchors, fixes beta_prev, and runs damped Gauss-Newton
 * steps; steps are only accepted when the total energy decreases.
 */
FitResult fit(const Mesh& neutral, const LandmarkSet& lms, const BlendshapeBasis& basis,
              const Intrinsics& intr, const SolverConfig& config);

} // namespace facekit
