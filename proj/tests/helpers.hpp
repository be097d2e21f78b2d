/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tests/helpers.hpp
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

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <random>

namespace facekit::testing {

using Rng = std::mt19937_64;

inline Mesh make_tetrahedron()
{
    Mesh mesh;
    mesh.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    mesh.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return mesh;
}

/// UV sphere of the given resolution: (stacks-1)*slices + 2 vertices, with
/// a latitude/longitude UV parameterization. With `duplicate_seam` the
/// theta = 2*pi column is duplicated (rings hold slices+1 vertices) so no
/// triangle wraps across the UV seam; required whenever the UVs are
/// actually rasterized.
inline Mesh make_sphere(int stacks, int slices, double radius = 1.0, bool duplicate_seam = false)
{
    Mesh mesh;
    const int ring_size = duplicate_seam ? slices + 1 : slices;
    mesh.vertices.push_back({0, 0, radius}); // north pole
    mesh.uv.push_back({0.5, 1.0});
    for (int s = 1; s < stacks; ++s)
    {
        const double phi = M_PI * s / stacks;
        for (int t = 0; t < ring_size; ++t)
        {
            const double theta = 2.0 * M_PI * (t % slices) / slices;
            mesh.vertices.push_back({radius * std::sin(phi) * std::cos(theta),
                                     radius * std::sin(phi) * std::sin(theta),
                                     radius * std::cos(phi)});
            mesh.uv.push_back({static_cast<double>(t) / slices, 1.0 - static_cast<double>(s) / stacks});
        }
    }
    mesh.vertices.push_back({0, 0, -radius}); // south pole
    mesh.uv.push_back({0.5, 0.0});
    const int south = mesh.vertex_count() - 1;
    auto ring = [&](int s, int t) {
        return 1 + (s - 1) * ring_size + (duplicate_seam ? t : t % slices);
    };
    for (int t = 0; t < slices; ++t) mesh.faces.push_back({0, ring(1, t), ring(1, t + 1)});
    for (int s = 1; s + 1 < stacks; ++s)
        for (int t = 0; t < slices; ++t)
        {
            mesh.faces.push_back({ring(s, t), ring(s + 1, t), ring(s + 1, t + 1)});
            mesh.faces.push_back({ring(s, t), ring(s + 1, t + 1), ring(s, t + 1)});
        }
    for (int t = 0; t < slices; ++t)
        mesh.faces.push_back({south, ring(stacks - 1, t + 1), ring(stacks - 1, t)});
    return mesh;
}

/// Planar grid in the z=0 plane with unit-square UVs; nx*ny vertices.
inline Mesh make_grid(int nx, int ny, double spacing = 1.0)
{
    Mesh mesh;
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
        {
            mesh.vertices.push_back({x * spacing, y * spacing, 0.0});
            mesh.uv.push_back({static_cast<double>(x) / (nx - 1), static_cast<double>(y) / (ny - 1)});
        }
    auto at = [&](int x, int y) { return y * nx + x; };
    for (int y = 0; y + 1 < ny; ++y)
        for (int x = 0; x + 1 < nx; ++x)
        {
            mesh.faces.push_back({at(x, y), at(x + 1, y), at(x + 1, y + 1)});
            mesh.faces.push_back({at(x, y), at(x + 1, y + 1), at(x, y + 1)});
        }
    return mesh;
}

inline Eigen::Matrix3d random_rotation(Rng& rng, double max_angle = M_PI * 0.9)
{
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::Vector3d axis;
    do
        axis = {unit(rng), unit(rng), unit(rng)};
    while (axis.norm() < 1e-6);
    std::uniform_real_distribution<double> ang(0.0, max_angle);
    return Eigen::AngleAxisd(ang(rng), axis.normalized()).toRotationMatrix();
}

/**
 * Smooth low-frequency deformation: a sinusoidal warp plus a gentle global
 * rotation/scale, keeping per-vertex local rotations well below pi so DR
 * round trips are well posed.
 */
inline Mesh smooth_deform(const Mesh& mesh, Rng& rng, double amplitude = 0.15)
{
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const Eigen::Vector3d freq(0.5 + 0.5 * unit(rng), 0.5 + 0.5 * unit(rng),
                               0.5 + 0.5 * unit(rng));
    const Eigen::Vector3d phase(M_PI * unit(rng), M_PI * unit(rng), M_PI * unit(rng));
    const Eigen::Matrix3d R = random_rotation(rng, 0.4);
    const double scale = 1.0 + 0.2 * unit(rng);
    Mesh out = mesh;
    for (auto& v : out.vertices)
    {
        Eigen::Vector3d warped = v;
        for (int k = 0; k < 3; ++k)
            warped[k] += amplitude * std::sin(freq[k] * v[(k + 1) % 3] + phase[k]);
        v = scale * (R * warped);
    }
    return out;
}

/**
 * Random smooth deformation projected onto the set of DR-representable
 * meshes. The per-vertex deformation gradients are weighted least-squares
 * fits over 1-rings, so an arbitrary warp is reconstructed only up to its
 * local fitting residual; alternating encode/decode (a local/global
 * iteration) converges to a nearby deformation the codec reproduces
 * exactly. Used wherever a lossless round trip is asserted.
 */
Mesh representable_deformation(const Mesh& reference, Rng& rng, double amplitude = 0.15,
                               double rel_tol = 2e-7, int max_iterations = 600);

inline double max_vertex_distance(const Mesh& a, const Mesh& b)
{
    double d = 0.0;
    for (int i = 0; i < a.vertex_count(); ++i)
        d = std::max(d, (a.vertices[i] - b.vertices[i]).norm());
    return d;
}

/// RAII temp directory for file round-trip tests.
class TempDir
{
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    std::string path(const std::string& name) const { return root_ + "/" + name; }

private:
    std::string root_;
};

} // namespace facekit::testing
