/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tests/test_solver.cpp
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
#include "facekit/solver.hpp"

#include "fit_fixture.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace facekit;
using namespace facekit::testing;

TEST_CASE("blendshape basis binary round trip")
{
    testing::Rng rng(7);
    FitScenario sc = FitScenario::make(rng);
    TempDir dir;
    save_blendshapes(sc.basis, dir.path("basis.bsb"));
    const BlendshapeBasis loaded = load_blendshapes(dir.path("basis.bsb"));
    REQUIRE(loaded.count() == sc.basis.count());
    CHECK((loaded.sigma - sc.basis.sigma).lpNorm<Eigen::Infinity>() == 0.0);
    for (int b = 0; b < loaded.count(); ++b)
        CHECK((loaded.shapes[b] - sc.basis.shapes[b]).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("landmark and anchor table parsing")
{
    TempDir dir;
    {
        std::ofstream out(dir.path("lms.txt"));
        out << "1 100.5 200.25\n2 300 400\n3 150 260\n";
    }
    const auto points = load_landmark_points(dir.path("lms.txt"));
    REQUIRE(points.size() == 3);
    CHECK(points[0].second == Eigen::Vector2d(100.5, 200.25));

    {
        std::ofstream out(dir.path("anchors.txt"));
        out << "eye_corners 1 2\n";
        out << "anchor 1 0 1 0 0 0 -1\n";
        out << "anchor 2 1 0.5 0.25 0.25 0 -1\n";
        out << "anchor 3 2 0.2 0.3 0.5 1 0\n";
        out << "strip 0 1 2 3 4\n";
    }
    const LandmarkSet lms = build_landmark_set(points, dir.path("anchors.txt"));
    CHECK(lms.count() == 3);
    CHECK(lms.eye_distance() > 0.0);
    CHECK(lms.contour == std::vector<bool>{false, false, true});
    CHECK(lms.strip_ids[2] == 0);
    REQUIRE(lms.strips.count(0) == 1);
    CHECK(lms.strips.at(0).vertices == std::vector<int>{1, 2, 3, 4});

    // landmark without an anchor entry is rejected
    auto extra = points;
    extra.emplace_back(9, Eigen::Vector2d(1, 1));
    CHECK_THROWS_AS(build_landmark_set(extra, dir.path("anchors.txt")), input_error);
}

TEST_CASE("landmark energy analytic cases")
{
    testing::Rng rng(11);
    FitScenario sc = FitScenario::make(rng);
    sc.synthesize(rng);

    FitParams params;
    params.beta = sc.gt_beta;
    params.delta = Eigen::MatrixX3d::Zero(sc.neutral.vertex_count(), 3);
    params.extrinsics = sc.gt_pose;
    params.fs = 1.0;

    SUBCASE("perfect fit has zero landmark energy")
    {
        CHECK(landmark_energy(params, sc.neutral, sc.basis, sc.landmarks, sc.intrinsics) <=
              1e-18);
    }
    SUBCASE("one (3,4) px displacement scales with 100/W_eye")
    {
        const double w_eye = sc.landmarks.eye_distance();
        LandmarkSet moved = sc.landmarks;
        moved.points[5] += Eigen::Vector2d(3.0, 4.0);
        const double e = landmark_energy(params, sc.neutral, sc.basis, moved, sc.intrinsics);
        CHECK(e == doctest::Approx(100.0 / w_eye * 25.0).epsilon(1e-9));
    }
}

TEST_CASE("corrective energy analytic cases")
{
    testing::Rng rng(13);
    FitScenario sc = FitScenario::make(rng);
    const FitWorkspace ws = make_fit_workspace(sc.neutral, sc.basis);
    const int v = sc.neutral.vertex_count();

    FitParams params;
    params.beta = Eigen::VectorXd::Zero(sc.basis.count());
    params.delta = Eigen::MatrixX3d::Zero(v, 3);
    const Eigen::VectorXd beta_prev = params.beta;
    const double lambda_delta = 4.0;

    SUBCASE("zero delta and matching beta is exactly zero")
    {
        CHECK(corrective_energy(params, sc.neutral, sc.basis, ws, beta_prev, lambda_delta) ==
              0.0);
    }
    SUBCASE("constant delta leaves only the lambda term")
    {
        const Eigen::Vector3d c(0.5, -0.25, 1.0);
        params.delta.rowwise() = c.transpose();
        const double e =
            corrective_energy(params, sc.neutral, sc.basis, ws, beta_prev, lambda_delta);
        CHECK(e == doctest::Approx(lambda_delta * v * c.squaredNorm()).epsilon(1e-9));
    }
    SUBCASE("single-vertex spike matches the dense Laplacian oracle")
    {
        params.delta(10, 2) = 2.0;
        const double e =
            corrective_energy(params, sc.neutral, sc.basis, ws, beta_prev, lambda_delta);

        // dense oracle: ||L dP||_F^2 + lambda ||dP||^2 (beta terms cancel)
        const Eigen::MatrixXd L = Eigen::MatrixXd(ws.laplacian);
        const Eigen::MatrixXd lap = L * params.delta;
        const double oracle = lap.squaredNorm() + lambda_delta * params.delta.squaredNorm();
        CHECK(e == doctest::Approx(oracle).epsilon(1e-9));
        CHECK(e > lambda_delta * 4.0); // Laplacian term strictly positive
    }
}

TEST_CASE("prior energy analytic cases")
{
    testing::Rng rng(17);
    FitScenario sc = FitScenario::make(rng);
    SolverConfig config;

    FitParams params;
    params.beta = Eigen::VectorXd::Zero(sc.basis.count());
    params.delta = Eigen::MatrixX3d::Zero(sc.neutral.vertex_count(), 3);
    params.fs = 1.0;

    CHECK(prior_energy(params, sc.basis, config, Eigen::Vector3d::Zero()) == 0.0);

    params.beta[0] = sc.basis.sigma[0];
    CHECK(prior_energy(params, sc.basis, config, Eigen::Vector3d::Zero()) ==
          doctest::Approx(1.0).epsilon(1e-12));

    params.beta[0] = 0.0;
    params.fs = std::exp(1.0);
    CHECK(prior_energy(params, sc.basis, config, Eigen::Vector3d::Zero()) ==
          doctest::Approx(config.lambda_f).epsilon(1e-12));
}

TEST_CASE("total energy is the weighted sum with the published constants")
{
    SolverConfig config;
    CHECK(config.omega_c == 25.0);
    CHECK(config.omega_r == 10.0);
    CHECK(config.lambda_delta == 4.0);
    CHECK(config.lambda_f == 5.0);
    CHECK(config.lambda_q == 5.0);
    CHECK(config.outer_iterations == 5);
    CHECK(total_energy(0, 0, 0, config) == 0.0);
    CHECK(total_energy(1, 1, 1, config) == 36.0);
    CHECK(total_energy(2, 0.5, 0.25, config) ==
          doctest::Approx(2 + 25 * 0.5 + 10 * 0.25).epsilon(1e-12));
}

TEST_CASE("analytic Jacobian matches central finite differences")
{
    testing::Rng rng(19);
    FitScenario sc = FitScenario::make(rng, 20);
    sc.synthesize(rng);
    const FitWorkspace ws = make_fit_workspace(sc.neutral, sc.basis);
    SolverConfig config;
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (int state_trial = 0; state_trial < 3; ++state_trial)
    {
        FitState state;
        state.beta = Eigen::VectorXd::Zero(sc.basis.count());
        for (int b = 0; b < sc.basis.count(); ++b) state.beta[b] = 0.3 * gauss(rng);
        state.delta = Eigen::MatrixX3d::Zero(sc.neutral.vertex_count(), 3);
        for (int i = 0; i < state.delta.size(); ++i)
            state.delta.data()[i] = 0.5 * gauss(rng);
        state.q0 = sc.gt_pose.rotation;
        state.w = Eigen::Vector3d(0.05 * gauss(rng), 0.05 * gauss(rng), 0.05 * gauss(rng));
        state.t = sc.gt_pose.translation + Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        state.fs = 1.0 + 0.05 * gauss(rng);

        const Eigen::VectorXd beta_prev = Eigen::VectorXd::Zero(sc.basis.count());
        const ResidualSystem sys = assemble_residuals(state, sc.neutral, sc.basis, sc.landmarks,
                                                      sc.intrinsics, config, beta_prev, ws, true);
        REQUIRE(!sys.behind_camera);
        const Eigen::MatrixXd J = Eigen::MatrixXd(sys.J);

        const Eigen::VectorXd p0 = state.pack();
        const double h = 1e-5;
        // probe a random subset of columns (full dP sweep is slow)
        std::uniform_int_distribution<int> col_pick(0, static_cast<int>(p0.size()) - 1);
        std::vector<int> columns{0, 1, 2, static_cast<int>(p0.size()) - 1,
                                 static_cast<int>(p0.size()) - 2,
                                 static_cast<int>(p0.size()) - 5};
        for (int k = 0; k < 20; ++k) columns.push_back(col_pick(rng));

        for (int col : columns)
        {
            FitState probe = state;
            Eigen::VectorXd p = p0;
            p[col] = p0[col] + h;
            probe.unpack(p);
            const Eigen::VectorXd rp =
                assemble_residuals(probe, sc.neutral, sc.basis, sc.landmarks, sc.intrinsics,
                                   config, beta_prev, ws, false)
                    .r;
            p[col] = p0[col] - h;
            probe.unpack(p);
            const Eigen::VectorXd rm =
                assemble_residuals(probe, sc.neutral, sc.basis, sc.landmarks, sc.intrinsics,
                                   config, beta_prev, ws, false)
                    .r;
            const Eigen::VectorXd fd = (rp - rm) / (2.0 * h);
            const double scale = std::max(fd.norm(), 1e-8);
            CHECK((J.col(col) - fd).norm() / scale <= 1e-4);
        }
    }
}

TEST_CASE("contour sliding is monotone and leaves other anchors untouched")
{
    testing::Rng rng(23);
    FitScenario sc = FitScenario::make(rng, 30, 3, true);
    sc.synthesize(rng);

    FitParams params;
    params.beta = sc.gt_beta;
    params.delta = Eigen::MatrixX3d::Zero(sc.neutral.vertex_count(), 3);
    params.extrinsics = sc.gt_pose;
    params.fs = 1.0;

    SUBCASE("already-perfect projections keep their anchors")
    {
        // landmark points synthesized at current anchors: nothing should move
        const LandmarkSet slid =
            slide_contour_anchors(params, sc.neutral, sc.basis, sc.landmarks, sc.intrinsics);
        const Mesh posed = params.reconstruct(sc.neutral, sc.basis);
        for (int k = 0; k < sc.landmarks.count(); ++k)
        {
            const double before = (project(sample_surface(posed, sc.landmarks.anchors[k]),
                                           params.extrinsics, sc.intrinsics) -
                                   sc.landmarks.points[k])
                                      .norm();
            const double after = (project(sample_surface(posed, slid.anchors[k]),
                                          params.extrinsics, sc.intrinsics) -
                                  sc.landmarks.points[k])
                                     .norm();
            CHECK(after <= before + 1e-12);
            if (!sc.landmarks.contour[k])
            {
                CHECK(slid.anchors[k].face == sc.landmarks.anchors[k].face);
                CHECK((slid.anchors[k].bary - sc.landmarks.anchors[k].bary).norm() == 0.0);
            }
        }
    }
    SUBCASE("perturbed pose never increases the contour distance")
    {
        FitParams off = params;
        off.extrinsics.update_rotation({0.17, 0.0, 0.0}); // ~10 degrees
        const Mesh posed = off.reconstruct(sc.neutral, sc.basis);
        double before = 0.0;
        for (int k = 0; k < sc.landmarks.count(); ++k)
            if (sc.landmarks.contour[k])
                before += (project(sample_surface(posed, sc.landmarks.anchors[k]),
                                   off.extrinsics, sc.intrinsics) -
                           sc.landmarks.points[k])
                              .norm();
        const LandmarkSet slid =
            slide_contour_anchors(off, sc.neutral, sc.basis, sc.landmarks, sc.intrinsics);
        double after = 0.0;
        for (int k = 0; k < sc.landmarks.count(); ++k)
            if (sc.landmarks.contour[k])
                after += (project(sample_surface(posed, slid.anchors[k]), off.extrinsics,
                                  sc.intrinsics) -
                          sc.landmarks.points[k])
                             .norm();
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("fit recovers a zero-noise synthetic configuration")
{
    testing::Rng rng(29);
    FitScenario sc = FitScenario::make(rng);
    sc.synthesize(rng);

    SolverConfig config;
    const FitResult result = fit(sc.neutral, sc.landmarks, sc.basis, sc.intrinsics, config);

    CHECK(!result.used_frontal_fallback);
    const double depth = sc.gt_pose.translation.z();
    CHECK((result.params.extrinsics.translation - sc.gt_pose.translation).norm() <=
          1e-3 * depth);
    const double angle_deg =
        result.params.extrinsics.rotation.angularDistance(sc.gt_pose.rotation) * 180.0 / M_PI;
    CHECK(angle_deg <= 0.1);
    REQUIRE(!result.diagnostics.empty());
    CHECK(result.diagnostics.back().landmark <= 1e-6);

    // energy never exceeds its starting value
    CHECK(result.diagnostics.back().total <= result.diagnostics.front().total_at_start + 1e-12);
}

TEST_CASE("huge lambda_delta suppresses the corrective field")
{
    testing::Rng rng(31);
    FitScenario sc = FitScenario::make(rng, 40);
    sc.synthesize(rng, 0.5);

    SolverConfig config;
    config.lambda_delta = 1e9;
    const FitResult result = fit(sc.neutral, sc.landmarks, sc.basis, sc.intrinsics, config);
    CHECK(result.params.delta.lpNorm<Eigen::Infinity>() <= 1e-3);
}

TEST_CASE("fit params save/load round trip")
{
    testing::Rng rng(37);
    FitScenario sc = FitScenario::make(rng, 20);
    sc.synthesize(rng);
    SolverConfig config;
    config.outer_iterations = 2;
    const FitResult result = fit(sc.neutral, sc.landmarks, sc.basis, sc.intrinsics, config);

    TempDir dir;
    save_fit_params(result.params, sc.intrinsics, dir.path("fit.txt"));
    Intrinsics intr2;
    const FitParams loaded = load_fit_params(dir.path("fit.txt"), intr2);
    CHECK((loaded.beta - result.params.beta).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((loaded.delta - result.params.delta).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(loaded.fs == doctest::Approx(result.params.fs).epsilon(1e-12));
    CHECK(loaded.extrinsics.rotation.angularDistance(result.params.extrinsics.rotation) <=
          1e-9);
    CHECK(intr2.f == doctest::Approx(sc.intrinsics.f).epsilon(1e-12));
}
