/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tests/fit_fixture.hpp
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

#include "facekit/solver.hpp"

#include "helpers.hpp"

#include <random>

namespace facekit::testing {

/// Synthetic head-fitting scenario: a sphere "head" (radius ~100 mm),
/// a small smooth blendshape basis, K random landmark anchors with two eye
/// corners, and a ground-truth pose in front of the camera.
struct FitScenario
{
    Mesh neutral;
    BlendshapeBasis basis;
    LandmarkSet landmarks; // anchors only; points filled by synthesize()
    Intrinsics intrinsics;
    Extrinsics gt_pose;
    Eigen::VectorXd gt_beta;

    static FitScenario make(Rng& rng, int landmark_count = 68, int blendshapes = 3,
                            bool with_contour_strips = false)
    {
        FitScenario sc;
        sc.neutral = make_sphere(10, 14, 100.0);
        const int v = sc.neutral.vertex_count();

        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int b = 0; b < blendshapes; ++b)
        {
            Eigen::MatrixX3d shape(v, 3);
            const Eigen::Vector3d freq(0.02 + 0.01 * b, 0.015, 0.025);
            for (int i = 0; i < v; ++i)
                for (int k = 0; k < 3; ++k)
                    shape(i, k) =
                        3.0 * std::sin(freq[k] * sc.neutral.vertices[i][(k + 1) % 3] + b);
            sc.basis.shapes.push_back(shape);
        }
        sc.basis.sigma = Eigen::VectorXd::Constant(blendshapes, 2.0);
        sc.gt_beta = Eigen::VectorXd::Zero(blendshapes);

        std::uniform_int_distribution<int> face_pick(0, sc.neutral.face_count() - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int k = 0; k < landmark_count; ++k)
        {
            BarycentricAnchor anchor;
            anchor.face = face_pick(rng);
            const double b0 = unit(rng), b1 = unit(rng) * (1.0 - b0);
            anchor.bary = {b0, b1, 1.0 - b0 - b1};
            sc.landmarks.anchors.push_back(anchor);
            sc.landmarks.markup.push_back(k + 1);
            sc.landmarks.contour.push_back(false);
            sc.landmarks.strip_ids.push_back(-1);
            sc.landmarks.points.emplace_back(0.0, 0.0);
        }
        sc.landmarks.eye_left = 0;
        sc.landmarks.eye_right = 1;
        // pin the eye corners to well-separated template spots
        sc.landmarks.anchors[0] = BarycentricAnchor{0, {1, 0, 0}};
        sc.landmarks.anchors[1] =
            BarycentricAnchor{sc.neutral.face_count() / 2, {1, 0, 0}};

        if (with_contour_strips)
        {
            // meridian strips: consecutive ring vertices down one longitude
            const int slices = 14;
            for (int s = 0; s < 4; ++s)
            {
                ContourStrip strip;
                for (int ring = 1; ring < 10; ++ring)
                    strip.vertices.push_back(1 + (ring - 1) * slices + s);
                sc.landmarks.strips[s] = strip;
                const int lm = 2 + s;
                sc.landmarks.contour[lm] = true;
                sc.landmarks.strip_ids[lm] = s;
            }
        }

        sc.intrinsics = init_intrinsics(1280, 960);
        sc.gt_pose.rotation = Eigen::Quaterniond(random_rotation(rng, 0.25));
        sc.gt_pose.translation = {5.0 * gauss(rng), 5.0 * gauss(rng), 600.0 + 20.0 * gauss(rng)};
        return sc;
    }

    /// Projects the ground-truth configuration into the landmark points,
    /// optionally with Gaussian pixel noise.
    void synthesize(Rng& rng, double noise_px = 0.0)
    {
        FitParams gt;
        gt.beta = gt_beta;
        gt.delta = Eigen::MatrixX3d::Zero(neutral.vertex_count(), 3);
        gt.extrinsics = gt_pose;
        gt.fs = 1.0;
        const Mesh posed = gt.reconstruct(neutral, basis);
        std::normal_distribution<double> noise(0.0, noise_px);
        for (int k = 0; k < landmarks.count(); ++k)
        {
            const Eigen::Vector3d x = sample_surface(posed, landmarks.anchors[k]);
            landmarks.points[k] = project(x, gt_pose, intrinsics);
            if (noise_px > 0.0)
                landmarks.points[k] += Eigen::Vector2d(noise(rng), noise(rng));
        }
    }
};

} // namespace facekit::testing
