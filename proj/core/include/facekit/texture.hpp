/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/texture.hpp
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
#include "facekit/dr.hpp"
#include "facekit/image.hpp"
#include "facekit/mesh.hpp"

#include <string>
#include <vector>

namespace facekit {

enum class TexelState : unsigned char
{
    Background = 0,
    Projected = 1,
    Boundary = 2, // projected texel adjacent to background
};

/// Image in the template's UV parameterization plus a per-texel validity mask.
struct UVTexture
{
    Image pixels; // RGB
    std::vector<TexelState> mask;

    UVTexture() = default;
    explicit UVTexture(int resolution, int maxval = 255)
        : pixels(resolution, resolution, 3, maxval),
          mask(static_cast<std::size_t>(resolution) * resolution, TexelState::Background)
    {
    }

    int width() const { return pixels.width; }
    int height() const { return pixels.height; }
    TexelState state(int x, int y) const { return mask[static_cast<std::size_t>(y) * width() + x]; }
    void set_state(int x, int y, TexelState s)
    {
        mask[static_cast<std::size_t>(y) * width() + x] = s;
    }
};

/// Mask image interchange: background = 0, projected = 255, boundary = 128.
Image mask_to_image(const UVTexture& texture);
void apply_mask_image(UVTexture& texture, const Image& mask);

/// Everything needed to sample the photograph from the fitted model.
struct ProjectionContext
{
    Mesh posed_mesh; // P_F in world coordinates, with UV
    Extrinsics extrinsics;
    Intrinsics intrinsics;
    Image source;      // the photograph
    Image depth;       // z-buffer at source resolution, +inf where empty
};

/// Relative visibility epsilon: ratio of the scene depth range.
inline constexpr double kVisibilityEpsilonRatio = 1e-3;

/**
 * Z-buffer rasterization of the mesh under the fitted camera at the given
 * image size. Depth is the camera-space z of the nearest surface at each
 * pixel center (perspective-correct interpolation); empty pixels hold +inf.
 */
Image rasterize_depth(const Mesh& mesh, const Extrinsics& extr, const Intrinsics& intr, int width,
                      int height);

/// Builds a ProjectionContext, rasterizing the depth buffer internally.
ProjectionContext make_projection_context(Mesh posed_mesh, const Extrinsics& extr,
                                          const Intrinsics& intr, Image source);

/**
 * Projects the source photograph into UV space. A texel is marked Projected
 * iff its surface point projects inside the image, survives the depth test
 * within eps = kVisibilityEpsilonRatio * depth range, and its triangle faces
 * the camera; its color is a bilinear sample of the source. Everything else
 * is Background.
 */
UVTexture project_texture(const ProjectionContext& ctx, int uv_resolution);

/// Marks texels whose UV center lies inside any of the given polygons
/// (e.g. eye regions) back to Background so the blend fills them.
void exclude_uv_polygons(UVTexture& texture,
                         const std::vector<std::vector<Eigen::Vector2d>>& polygons);

/**
 * Gradient-domain composite: inside the foreground's projected mask, solves
 * the discrete Poisson equation (5-point stencil, conjugate gradient to
 * 1e-8) with the foreground's gradients as guidance and background values
 * as Dirichlet boundary, per channel. Texels outside the mask are copied
 * from the background untouched; mask texels on the texture border are
 * treated as Dirichlet background.
 */
UVTexture poisson_blend(const UVTexture& foreground, const UVTexture& background);

/// A background texture candidate with its subject's DR feature.
struct TextureLibraryEntry
{
    std::string id;
    DRFeature feature;
    std::string path;
};

/// Explicit id wins; otherwise nearest by L1 distance in DR-feature space.
const TextureLibraryEntry& choose_background_texture(
    const std::vector<TextureLibraryEntry>& library, const DRFeature* query,
    const std::string& explicit_id = {});

} // namespace facekit
