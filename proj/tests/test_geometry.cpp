/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tests/test_geometry.cpp
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
#include "facekit/geometry.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace facekit;
using namespace facekit::testing;

namespace {

// Dense-matrix Laplacian oracle: builds L explicitly from the weights and
// multiplies. Deliberately ignores the sparse code paths under test.
std::vector<Eigen::Vector3d> dense_laplacian_oracle(const Mesh& mesh, const SparseWeights& w)
{
    const int n = mesh.vertex_count();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (const auto& [j, c] : w.neighbors[i])
        {
            L(i, i) += c;
            L(i, j) -= c;
        }
    Eigen::MatrixXd P(n, 3);
    for (int i = 0; i < n; ++i) P.row(i) = mesh.vertices[i].transpose();
    const Eigen::MatrixXd D = L * P;
    std::vector<Eigen::Vector3d> out(n);
    for (int i = 0; i < n; ++i) out[i] = D.row(i).transpose();
    return out;
}

} // namespace

TEST_CASE("cotangent weight of a single equilateral triangle edge")
{
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}};
    mesh.faces = {{0, 1, 2}};
    const SparseWeights w = cotangent_weights(mesh);
    // boundary edge: single half-cotangent, cot(60 deg)/2
    CHECK(w.weight(0, 1) == doctest::Approx(0.5 / std::tan(M_PI / 3.0)).epsilon(1e-12));
    CHECK(doctest::Approx(w.weight(0, 1)).epsilon(1e-5) == 0.28868);
}

TEST_CASE("interior edge of two equilateral triangles sums both cotangents")
{
    Mesh mesh;
    const double h = std::sqrt(3.0) / 2.0;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, h, 0}, {0.5, -h, 0}};
    mesh.faces = {{0, 1, 2}, {0, 3, 1}};
    const SparseWeights w = cotangent_weights(mesh);
    CHECK(w.weight(0, 1) == doctest::Approx(1.0 / std::tan(M_PI / 3.0)).epsilon(1e-12));
}

TEST_CASE("right angle cotangent hits the clamp floor, not zero")
{
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.faces = {{0, 1, 2}};
    const SparseWeights w = cotangent_weights(mesh);
    // cot(90 deg) = 0 clamps to kCotanClampMin, so the half-weight is 5e-7
    CHECK(w.weight(1, 2) == doctest::Approx(0.5 * kCotanClampMin).epsilon(1e-12));
    CHECK(w.weight(1, 2) > 0.0);
}

TEST_CASE("cotangent weights are exactly symmetric")
{
    Rng rng(11);
    const Mesh mesh = smooth_deform(make_sphere(8, 10), rng);
    const SparseWeights w = cotangent_weights(mesh);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        for (const auto& [j, c] : w.neighbors[i]) CHECK(c == w.weight(j, i));
}

TEST_CASE("non-manifold edge is rejected")
{
    Mesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, -1, 0}};
    mesh.faces = {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}}; // edge (0,1) in 3 triangles
    CHECK_THROWS_AS(cotangent_weights(mesh), numeric_error);
}

TEST_CASE("laplacian coords are translation invariant")
{
    Rng rng(3);
    const Mesh mesh = smooth_deform(make_sphere(7, 9), rng);
    const SparseWeights w = cotangent_weights(mesh);
    const auto base = laplacian_coords(mesh, w);

    Mesh moved = mesh;
    const Eigen::Vector3d t(12.5, -3.25, 0.75);
    for (auto& v : moved.vertices) v += t;
    const auto shifted = laplacian_coords(moved, w);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK((base[i] - shifted[i]).norm() <= 1e-12 * (1.0 + base[i].norm()));
}

TEST_CASE("symmetric planar 1-ring has zero laplacian coordinate")
{
    // regular hexagon around the origin
    Mesh mesh;
    mesh.vertices.push_back({0, 0, 0});
    for (int k = 0; k < 6; ++k)
        mesh.vertices.push_back({std::cos(k * M_PI / 3.0), std::sin(k * M_PI / 3.0), 0.0});
    for (int k = 0; k < 6; ++k) mesh.faces.push_back({0, 1 + k, 1 + (k + 1) % 6});
    const SparseWeights w = cotangent_weights(mesh);
    const auto lap = laplacian_coords(mesh, w);
    CHECK(lap[0].norm() <= 1e-12);
}

TEST_CASE("laplacian coords match the dense oracle on a random mesh")
{
    Rng rng(29);
    const Mesh mesh = smooth_deform(make_sphere(6, 9), rng); // 50+ vertices
    const SparseWeights w = cotangent_weights(mesh);
    const auto fast = laplacian_coords(mesh, w);
    const auto oracle = dense_laplacian_oracle(mesh, w);
    REQUIRE(fast.size() == oracle.size());
    for (std::size_t i = 0; i < fast.size(); ++i)
        CHECK((fast[i] - oracle[i]).norm() <= 1e-12 * (1.0 + oracle[i].norm()));
}

TEST_CASE("laplacian_matrix agrees with laplacian_coords")
{
    Rng rng(5);
    const Mesh mesh = smooth_deform(make_sphere(5, 7), rng);
    const SparseWeights w = cotangent_weights(mesh);
    const Eigen::SparseMatrix<double> L = w.laplacian_matrix();
    Eigen::MatrixXd P(mesh.vertex_count(), 3);
    for (int i = 0; i < mesh.vertex_count(); ++i) P.row(i) = mesh.vertices[i].transpose();
    const Eigen::MatrixXd D = L * P;
    const auto coords = laplacian_coords(mesh, w);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        CHECK((D.row(i).transpose() - coords[i]).norm() <= 1e-12);
}

TEST_CASE("sample_surface corner, centroid and linearity")
{
    const Mesh mesh = make_tetrahedron();

    BarycentricAnchor corner{0, {1, 0, 0}};
    CHECK(sample_surface(mesh, corner) == mesh.vertices[mesh.faces[0][0]]);

    BarycentricAnchor centroid{0, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    const Eigen::Vector3d expected =
        (mesh.vertices[0] + mesh.vertices[1] + mesh.vertices[2]) / 3.0;
    CHECK((sample_surface(mesh, centroid) - expected).norm() <= 1e-12);

    Rng rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial)
    {
        double b0 = unit(rng), b1 = unit(rng) * (1.0 - b0);
        BarycentricAnchor a{0, {b0, b1, 1.0 - b0 - b1}};
        const Eigen::Vector3d direct = a.bary[0] * mesh.vertices[mesh.faces[0][0]] +
                                       a.bary[1] * mesh.vertices[mesh.faces[0][1]] +
                                       a.bary[2] * mesh.vertices[mesh.faces[0][2]];
        CHECK((sample_surface(mesh, a) - direct).norm() <= 1e-12);
    }
}

TEST_CASE("anchor validation catches bad barycentrics and face indices")
{
    const Mesh mesh = make_tetrahedron();
    CHECK_THROWS_AS((BarycentricAnchor{9, {1, 0, 0}}.validate(mesh)), input_error);
    CHECK_THROWS_AS((BarycentricAnchor{0, {0.7, 0.7, -0.4}}.validate(mesh)), input_error);
    CHECK_THROWS_AS((BarycentricAnchor{0, {0.5, 0.5, 0.5}}.validate(mesh)), input_error);
    CHECK_NOTHROW((BarycentricAnchor{0, {0.2, 0.3, 0.5}}.validate(mesh)));
}
