/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: benchmarks/benchmarks.cpp
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

// Microbenchmarks for the hot paths of the pipeline: DR codec, geometry
// weights, closest-point queries, ICP, Poisson blending and the landmark
// solver's residual assembly. Mesh sizes are parameterized so scaling
// behavior (e.g. BVH log n vs brute-force n) is visible in the output.

#include "facekit/dr.hpp"
#include "facekit/evaluate.hpp"
#include "facekit/geometry.hpp"
#include "facekit/sampling.hpp"
#include "facekit/solver.hpp"
#include "facekit/texture.hpp"

#include "fit_fixture.hpp"
#include "helpers.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace facekit;
using namespace facekit::testing;

namespace {

Mesh sphere_of_size(int vertices)
{
    // stacks ~ slices/1.4 gives roughly uniform triangles
    const int slices = static_cast<int>(std::sqrt(1.4 * vertices));
    const int stacks = vertices / slices + 1;
    return make_sphere(std::max(3, stacks), std::max(3, slices), 100.0);
}

void bm_cotangent_weights(benchmark::State& state)
{
    const Mesh mesh = sphere_of_size(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(cotangent_weights(mesh));
    state.SetComplexityN(mesh.vertex_count());
}
BENCHMARK(bm_cotangent_weights)->Range(256, 16384)->Complexity();

void bm_dr_encode(benchmark::State& state)
{
    Rng rng(1);
    const Mesh reference = sphere_of_size(static_cast<int>(state.range(0)));
    const Mesh deformed = smooth_deform(reference, rng, 5.0);
    const SparseWeights weights = cotangent_weights(reference);
    for (auto _ : state) benchmark::DoNotOptimize(encode_dr(deformed, reference, weights));
    state.SetComplexityN(reference.vertex_count());
}
BENCHMARK(bm_dr_encode)->Range(256, 16384)->Complexity();

void bm_dr_decode(benchmark::State& state)
{
    Rng rng(2);
    const Mesh reference = sphere_of_size(static_cast<int>(state.range(0)));
    const Mesh deformed = smooth_deform(reference, rng, 5.0);
    const SparseWeights weights = cotangent_weights(reference);
    const DRFeature feature = encode_dr(deformed, reference, weights);
    for (auto _ : state)
        benchmark::DoNotOptimize(decode_dr(feature, reference, weights, 0, deformed.vertices[0]));
    state.SetComplexityN(reference.vertex_count());
}
BENCHMARK(bm_dr_decode)->Range(256, 16384)->Complexity();

void bm_bvh_build(benchmark::State& state)
{
    const Mesh mesh = sphere_of_size(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Bvh(mesh));
    state.SetComplexityN(mesh.face_count());
}
BENCHMARK(bm_bvh_build)->Range(256, 16384)->Complexity();

void bm_bvh_query(benchmark::State& state)
{
    Rng rng(3);
    const Mesh mesh = sphere_of_size(static_cast<int>(state.range(0)));
    const Bvh bvh(mesh);
    std::uniform_real_distribution<double> unit(-120.0, 120.0);
    std::vector<Eigen::Vector3d> queries(1024);
    for (auto& q : queries) q = {unit(rng), unit(rng), unit(rng)};
    std::size_t i = 0;
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(bvh.distance(queries[i]));
        i = (i + 1) % queries.size();
    }
    state.SetComplexityN(mesh.face_count());
}
BENCHMARK(bm_bvh_query)->Range(256, 16384)->Complexity();

void bm_armse(benchmark::State& state)
{
    Rng rng(4);
    const Mesh gt = smooth_deform(sphere_of_size(static_cast<int>(state.range(0))), rng, 2.0);
    const Mesh pred = smooth_deform(gt, rng, 2.0);
    for (auto _ : state) benchmark::DoNotOptimize(armse(gt, pred));
}
BENCHMARK(bm_armse)->Range(512, 8192);

void bm_icp(benchmark::State& state)
{
    Rng rng(5);
    const Mesh dst = smooth_deform(sphere_of_size(static_cast<int>(state.range(0))), rng, 10.0);
    Mesh src = dst;
    const Eigen::Matrix3d R = random_rotation(rng, 0.03);
    for (auto& v : src.vertices) v = R * v + Eigen::Vector3d(1.0, -0.5, 0.7);
    for (auto _ : state) benchmark::DoNotOptimize(icp_refine(src, dst, AlignmentResult{}, 10));
}
BENCHMARK(bm_icp)->Range(512, 8192);

void bm_poisson_blend(benchmark::State& state)
{
    Rng rng(6);
    const int res = static_cast<int>(state.range(0));
    std::uniform_real_distribution<double> level(0.0, 255.0);
    UVTexture fg(res), bg(res);
    for (auto& v : fg.pixels.data) v = level(rng);
    for (auto& v : bg.pixels.data) v = level(rng);
    const double c = 0.5 * res, r2 = 0.16 * res * res;
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
            if ((x - c) * (x - c) + (y - c) * (y - c) < r2)
                fg.set_state(x, y, TexelState::Projected);
    for (auto _ : state) benchmark::DoNotOptimize(poisson_blend(fg, bg));
}
BENCHMARK(bm_poisson_blend)->Range(64, 512);

void bm_residual_assembly(benchmark::State& state)
{
    Rng rng(7);
    FitScenario sc = FitScenario::make(rng);
    sc.synthesize(rng, 0.5);
    const SolverConfig config;
    const FitWorkspace ws = make_fit_workspace(sc.neutral, sc.basis);
    FitState st;
    st.beta = Eigen::VectorXd::Zero(sc.basis.count());
    st.delta = Eigen::MatrixX3d::Zero(sc.neutral.vertex_count(), 3);
    st.q0 = sc.gt_pose.rotation;
    st.t = sc.gt_pose.translation;
    const bool with_jacobian = state.range(0) != 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_residuals(st, sc.neutral, sc.basis, sc.landmarks,
                                                    sc.intrinsics, config, st.beta, ws,
                                                    with_jacobian));
}
BENCHMARK(bm_residual_assembly)->Arg(0)->Arg(1);

void bm_sample_face(benchmark::State& state)
{
    Rng rng(8);
    ShapeDataset dataset;
    dataset.reference = sphere_of_size(1024);
    dataset.reference_weights = cotangent_weights(dataset.reference);
    const GroupTag group{"male", "asian"};
    for (int i = 0; i < 8; ++i)
    {
        ShapeEntry entry;
        entry.feature = encode_dr(smooth_deform(dataset.reference, rng, 5.0), dataset.reference,
                                  dataset.reference_weights);
        entry.group = group;
        dataset.entries.push_back(std::move(entry));
    }
    for (auto _ : state) benchmark::DoNotOptimize(sample_face(dataset, group, 5, rng));
}
BENCHMARK(bm_sample_face);

} // namespace

BENCHMARK_MAIN();
