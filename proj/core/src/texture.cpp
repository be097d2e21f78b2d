/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/texture.cpp
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
#include "facekit/texture.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>

namespace facekit {

Image mask_to_image(const UVTexture& texture)
{
    Image out(texture.width(), texture.height(), 1, 255);
    for (int y = 0; y < texture.height(); ++y)
        for (int x = 0; x < texture.width(); ++x)
        {
            const TexelState s = texture.state(x, y);
            out.at(x, y, 0) = s == TexelState::Projected ? 1.0
                              : s == TexelState::Boundary ? 128.0 / 255.0
                                                          : 0.0;
        }
    return out;
}

void apply_mask_image(UVTexture& texture, const Image& mask)
{
    if (mask.width != texture.width() || mask.height != texture.height() || mask.channels != 1)
        throw input_error("mask image resolution does not match texture");
    for (int y = 0; y < texture.height(); ++y)
        for (int x = 0; x < texture.width(); ++x)
        {
            const double v = mask.at(x, y, 0);
            texture.set_state(x, y, v > 0.75  ? TexelState::Projected
                                    : v > 0.25 ? TexelState::Boundary
                                               : TexelState::Background);
        }
}

namespace {

struct ScreenVertex
{
    Eigen::Vector2d pos; // continuous pixel coordinates
    double z;            // camera-space depth
    bool valid;
};

double edge_function(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& p)
{
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

/**
 * Depth-buffer lookup at a continuous image position (u, v). Bilinear
 * interpolation between the four surrounding pixel centers keeps the
 * comparison against a smooth surface second-order accurate (a plain
 * nearest-pixel fetch differs by the full intra-pixel depth slope and
 * rejects valid texels on curved geometry). When a neighbor is empty (+inf)
 * or off the buffer the position is at the rasterized footprint's edge:
 * there is no reliable occluder depth to compare against there, and an
 * occluder in front of the surface would have covered the pixel, so the
 * lookup returns +inf (no occlusion). Back sides are rejected by the facing
 * test, not the depth test, so this stays conservative only against the
 * one-pixel silhouette ring.
 */
double sample_depth(const Image& depth, double u, double v)
{
    const double x = u - 0.5, y = v - 0.5; // pixel-center coordinates
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    if (x0 >= 0 && y0 >= 0 && x0 + 1 < depth.width && y0 + 1 < depth.height)
    {
        const double d00 = depth.at(x0, y0, 0), d10 = depth.at(x0 + 1, y0, 0);
        const double d01 = depth.at(x0, y0 + 1, 0), d11 = depth.at(x0 + 1, y0 + 1, 0);
        if (std::isfinite(d00) && std::isfinite(d10) && std::isfinite(d01) && std::isfinite(d11))
        {
            const double fx = x - x0, fy = y - y0;
            return (1 - fy) * ((1 - fx) * d00 + fx * d10) + fy * ((1 - fx) * d01 + fx * d11);
        }
    }
    return std::numeric_limits<double>::infinity();
}

} // namespace

Image rasterize_depth(const Mesh& mesh, const Extrinsics& extr, const Intrinsics& intr, int width,
                      int height)
{
    Image depth(width, height, 1, 255);
    std::fill(depth.data.begin(), depth.data.end(), std::numeric_limits<double>::infinity());

    const double g = intr.effective_focal();
    std::vector<ScreenVertex> screen(mesh.vertex_count());
    for (int i = 0; i < mesh.vertex_count(); ++i)
    {
        const Eigen::Vector3d p = extr.transform(mesh.vertices[i]);
        screen[i].valid = p.z() > 1e-12;
        screen[i].z = p.z();
        if (screen[i].valid)
            screen[i].pos = {g * p.x() / p.z() + intr.cx, g * p.y() / p.z() + intr.cy};
    }

    for (const auto& face : mesh.faces)
    {
        const ScreenVertex& a = screen[face[0]];
        const ScreenVertex& b = screen[face[1]];
        const ScreenVertex& c = screen[face[2]];
        if (!a.valid || !b.valid || !c.valid) continue;
        const double area = edge_function(a.pos, b.pos, c.pos);
        if (std::abs(area) < 1e-14) continue;

        const int x0 = std::max(0, static_cast<int>(std::floor(
                                       std::min({a.pos.x(), b.pos.x(), c.pos.x()}) - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(
                                               std::max({a.pos.x(), b.pos.x(), c.pos.x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(
                                       std::min({a.pos.y(), b.pos.y(), c.pos.y()}) - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(
                                                std::max({a.pos.y(), b.pos.y(), c.pos.y()}))));
        for (int py = y0; py <= y1; ++py)
            for (int px = x0; px <= x1; ++px)
            {
                const Eigen::Vector2d p(px + 0.5, py + 0.5);
                const double w0 = edge_function(b.pos, c.pos, p) / area;
                const double w1 = edge_function(c.pos, a.pos, p) / area;
                const double w2 = edge_function(a.pos, b.pos, p) / area;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                // perspective-correct: 1/z interpolates linearly in screen space
                const double inv_z = w0 / a.z + w1 / b.z + w2 / c.z;
                if (inv_z <= 0.0) continue;
                const double z = 1.0 / inv_z;
                if (z < depth.at(px, py, 0)) depth.at(px, py, 0) = z;
            }
    }
    return depth;
}

ProjectionContext make_projection_context(Mesh posed_mesh, const Extrinsics& extr,
                                          const Intrinsics& intr, Image source)
{
    ProjectionContext ctx;
    ctx.depth = rasterize_depth(posed_mesh, extr, intr, source.width, source.height);
    ctx.posed_mesh = std::move(posed_mesh);
    ctx.extrinsics = extr;
    ctx.intrinsics = intr;
    ctx.source = std::move(source);
    return ctx;
}

UVTexture project_texture(const ProjectionContext& ctx, int uv_resolution)
{
    const Mesh& mesh = ctx.posed_mesh;
    if (!mesh.has_uv()) throw input_error("mesh has no UV coordinates");
    const int res = uv_resolution;
    UVTexture texture(res, ctx.source.maxval);

    // Depth range over the rasterized buffer sets the visibility epsilon.
    double zmin = std::numeric_limits<double>::infinity(), zmax = 0.0;
    for (double z : ctx.depth.data)
        if (std::isfinite(z))
        {
            zmin = std::min(zmin, z);
            zmax = std::max(zmax, z);
        }
    const double eps = std::isfinite(zmin) ? std::max(kVisibilityEpsilonRatio * (zmax - zmin),
                                                      1e-12 * std::max(zmax, 1.0))
                                           : 0.0;

    const double gf = ctx.intrinsics.effective_focal();
    const Eigen::Matrix3d R = ctx.extrinsics.rotation.toRotationMatrix();

    for (const auto& face : mesh.faces)
    {
        // texel-space UV corners; texel (i,j) center maps to uv ((i+.5)/res, (j+.5)/res)
        Eigen::Vector2d q[3];
        for (int c = 0; c < 3; ++c)
            q[c] = {mesh.uv[face[c]].x() * res - 0.5, mesh.uv[face[c]].y() * res - 0.5};
        const double area = edge_function(q[0], q[1], q[2]);
        if (std::abs(area) < 1e-14) continue;

        // camera-facing test on the triangle's winding normal
        const Eigen::Vector3d p0 = ctx.extrinsics.transform(mesh.vertices[face[0]]);
        const Eigen::Vector3d normal_cam =
            R * (mesh.vertices[face[1]] - mesh.vertices[face[0]])
                .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
        const bool facing = normal_cam.dot(p0) < 0.0;

        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].x(), q[1].x(), q[2].x()}))));
        const int x1 = std::min(res - 1, static_cast<int>(std::ceil(std::max({q[0].x(), q[1].x(), q[2].x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].y(), q[1].y(), q[2].y()}))));
        const int y1 = std::min(res - 1, static_cast<int>(std::ceil(std::max({q[0].y(), q[1].y(), q[2].y()}))));
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx)
            {
                const Eigen::Vector2d p(tx, ty);
                const double w0 = edge_function(q[1], q[2], p) / area;
                const double w1 = edge_function(q[2], q[0], p) / area;
                const double w2 = edge_function(q[0], q[1], p) / area;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                if (!facing) continue; // stays Background

                const Eigen::Vector3d X = w0 * mesh.vertices[face[0]] +
                                          w1 * mesh.vertices[face[1]] +
                                          w2 * mesh.vertices[face[2]];
                const Eigen::Vector3d pc = ctx.extrinsics.transform(X);
                if (pc.z() <= 0.0) continue;
                const double u = gf * pc.x() / pc.z() + ctx.intrinsics.cx;
                const double v = gf * pc.y() / pc.z() + ctx.intrinsics.cy;
                if (u < 0.0 || u >= ctx.source.width || v < 0.0 || v >= ctx.source.height)
                    continue;
                if (pc.z() > sample_depth(ctx.depth, u, v) + eps) continue; // occluded

                const Eigen::Vector3d color = ctx.source.sample_bilinear(u - 0.5, v - 0.5);
                for (int c = 0; c < 3; ++c) texture.pixels.at(tx, ty, c) = color[c];
                texture.set_state(tx, ty, TexelState::Projected);
            }
    }

    // annotate boundary texels (projected, touching background or the border)
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
        {
            if (texture.state(x, y) != TexelState::Projected) continue;
            const bool at_border = x == 0 || y == 0 || x == res - 1 || y == res - 1;
            const bool touches_bg =
                at_border || texture.state(x - 1, y) == TexelState::Background ||
                texture.state(x + 1, y) == TexelState::Background ||
                texture.state(x, y - 1) == TexelState::Background ||
                texture.state(x, y + 1) == TexelState::Background;
            if (touches_bg) texture.set_state(x, y, TexelState::Boundary);
        }
    return texture;
}

void exclude_uv_polygons(UVTexture& texture,
                         const std::vector<std::vector<Eigen::Vector2d>>& polygons)
{
    const int res = texture.width();
    auto inside = [](const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& p) {
        bool in = false;
        for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        {
            if ((poly[i].y() > p.y()) != (poly[j].y() > p.y()) &&
                p.x() < (poly[j].x() - poly[i].x()) * (p.y() - poly[i].y()) /
                                (poly[j].y() - poly[i].y()) +
                            poly[i].x())
                in = !in;
        }
        return in;
    };
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < texture.width(); ++x)
        {
            const Eigen::Vector2d uv((x + 0.5) / texture.width(), (y + 0.5) / texture.height());
            for (const auto& poly : polygons)
                if (poly.size() >= 3 && inside(poly, uv))
                {
                    texture.set_state(x, y, TexelState::Background);
                    break;
                }
        }
}

UVTexture poisson_blend(const UVTexture& foreground, const UVTexture& background)
{
    const int w = foreground.width(), h = foreground.height();
    if (background.width() != w || background.height() != h)
        throw input_error("foreground/background texture resolutions differ");

    // Unknowns: masked texels off the texture border. Border texels and all
    // background texels are Dirichlet values taken from the background.
    std::vector<int> index(static_cast<std::size_t>(w) * h, -1);
    std::vector<std::pair<int, int>> unknowns;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x)
            if (foreground.state(x, y) != TexelState::Background)
            {
                index[static_cast<std::size_t>(y) * w + x] = static_cast<int>(unknowns.size());
                unknowns.emplace_back(x, y);
            }

    UVTexture out = background;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.set_state(x, y, index[static_cast<std::size_t>(y) * w + x] >= 0
                                    ? foreground.state(x, y)
                                    : TexelState::Background);
    if (unknowns.empty()) return out;

    const int n = static_cast<int>(unknowns.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(5 * n);
    static const int dx[4] = {1, -1, 0, 0};
    static const int dy[4] = {0, 0, 1, -1};
    for (int i = 0; i < n; ++i)
    {
        const auto [x, y] = unknowns[i];
        trips.emplace_back(i, i, 4.0);
        for (int k = 0; k < 4; ++k)
        {
            const int j = index[static_cast<std::size_t>(y + dy[k]) * w + (x + dx[k])];
            if (j >= 0) trips.emplace_back(i, j, -1.0);
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(10000);
    cg.compute(A);

    for (int c = 0; c < 3; ++c)
    {
        Eigen::VectorXd b(n), x0(n);
        for (int i = 0; i < n; ++i)
        {
            const auto [x, y] = unknowns[i];
            double rhs = 0.0;
            for (int k = 0; k < 4; ++k)
            {
                const int nx = x + dx[k], ny = y + dy[k];
                rhs += foreground.pixels.at(x, y, c) - foreground.pixels.at(nx, ny, c);
                if (index[static_cast<std::size_t>(ny) * w + nx] < 0)
                    rhs += background.pixels.at(nx, ny, c);
            }
            b[i] = rhs;
            x0[i] = background.pixels.at(x, y, c);
        }
        const Eigen::VectorXd solution = cg.solveWithGuess(b, x0);
        for (int i = 0; i < n; ++i)
        {
            const auto [x, y] = unknowns[i];
            out.pixels.at(x, y, c) = solution[i];
        }
    }
    return out;
}

const TextureLibraryEntry& choose_background_texture(
    const std::vector<TextureLibraryEntry>& library, const DRFeature* query,
    const std::string& explicit_id)
{
    if (library.empty()) throw input_error("background texture library is empty");
    if (!explicit_id.empty())
    {
        for (const auto& entry : library)
            if (entry.id == explicit_id) return entry;
        throw input_error("no texture with id '" + explicit_id + "' in the library");
    }
    if (!query) throw input_error("neither explicit id nor query feature given");
    const TextureLibraryEntry* best = nullptr;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& entry : library)
    {
        if (entry.feature.data.size() != query->data.size())
            throw input_error("library feature length does not match query");
        const double d = (entry.feature.data - query->data).cwiseAbs().sum();
        if (d < best_dist)
        {
            best_dist = d;
            best = &entry;
        }
    }
    return *best;
}

} // namespace facekit
