/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/image.hpp
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

#include <Eigen/Core>

#include <string>
#include <vector>

namespace facekit {

/**
 * Dense pixel grid with 1 (gray) or 3 (RGB) channels. Values are stored as
 * doubles in [0,1]; `maxval` records the integer quantization used on disk
 * (255 for 8-bit, 65535 for 16-bit).
 */
struct Image
{
    int width = 0;
    int height = 0;
    int channels = 0;
    int maxval = 255;
    std::vector<double> data; // row-major, interleaved channels

    Image() = default;
    Image(int w, int h, int c, int maxval = 255)
        : width(w), height(h), channels(c), maxval(maxval),
          data(static_cast<std::size_t>(w) * h * c, 0.0)
    {
    }

    double& at(int x, int y, int c)
    {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const
    {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    /// Bilinear sample at a continuous pixel position (pixel centers at
    /// integer coordinates), clamped to the image border.
    Eigen::Vector3d sample_bilinear(double x, double y) const;
};

/// Binary portable pixmap/graymap I/O: P6 for 3-channel, P5 for 1-channel,
/// 8- or 16-bit (big-endian sample order per the format). Round trips are
/// bitwise stable.
Image load_image(const std::string& path);
void save_image(const Image& image, const std::string& path);

} // namespace facekit
