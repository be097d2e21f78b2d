/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/image.cpp
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
#include "facekit/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace facekit {

Eigen::Vector3d Image::sample_bilinear(double x, double y) const
{
    const double cx = std::clamp(x, 0.0, static_cast<double>(width - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(height - 1));
    const int x0 = static_cast<int>(std::floor(cx));
    const int y0 = static_cast<int>(std::floor(cy));
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double fx = cx - x0;
    const double fy = cy - y0;

    Eigen::Vector3d out = Eigen::Vector3d::Zero();
    for (int c = 0; c < std::min(channels, 3); ++c)
    {
        const double v = (1 - fx) * (1 - fy) * at(x0, y0, c) + fx * (1 - fy) * at(x1, y0, c) +
                         (1 - fx) * fy * at(x0, y1, c) + fx * fy * at(x1, y1, c);
        out[c] = v;
    }
    if (channels == 1) out.y() = out.z() = out.x();
    return out;
}

namespace {

int read_pnm_token(std::istream& in, const std::string& path)
{
    // Skips whitespace and '#' comments per the PNM grammar.
    int c;
    while ((c = in.peek()) != EOF)
    {
        if (c == '#')
        {
            std::string line;
            std::getline(in, line);
        }
        else if (std::isspace(c))
            in.get();
        else
            break;
    }
    int value;
    if (!(in >> value)) throw input_error(path + ": malformed PNM header");
    return value;
}

} // namespace

Image load_image(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open image file: " + path);
    char p, type;
    in.get(p);
    in.get(type);
    if (p != 'P' || (type != '5' && type != '6'))
        throw input_error(path + ": expected binary PGM (P5) or PPM (P6)");
    const int channels = type == '6' ? 3 : 1;
    const int width = read_pnm_token(in, path);
    const int height = read_pnm_token(in, path);
    const int maxval = read_pnm_token(in, path);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
        throw input_error(path + ": bad PNM dimensions");
    in.get(); // single whitespace byte after maxval

    Image image(width, height, channels, maxval);
    const std::size_t samples = image.data.size();
    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(samples * bytes_per_sample);
    in.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (!in) throw input_error(path + ": truncated pixel data");
    for (std::size_t i = 0; i < samples; ++i)
    {
        const int v = bytes_per_sample == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
        image.data[i] = static_cast<double>(v) / maxval;
    }
    return image;
}

void save_image(const Image& image, const std::string& path)
{
    if (image.channels != 1 && image.channels != 3)
        throw input_error("only 1- or 3-channel images can be written");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write image file: " + path);
    out << (image.channels == 3 ? "P6" : "P5") << '\n'
        << image.width << ' ' << image.height << '\n'
        << image.maxval << '\n';
    const int bytes_per_sample = image.maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(image.data.size() * bytes_per_sample);
    for (std::size_t i = 0; i < image.data.size(); ++i)
    {
        const long v = std::lround(std::clamp(image.data[i], 0.0, 1.0) * image.maxval);
        if (bytes_per_sample == 2)
        {
            raw[2 * i] = static_cast<unsigned char>(v >> 8);
            raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
        }
        else
            raw[i] = static_cast<unsigned char>(v);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
    if (!out) throw input_error("short write on image file: " + path);
}

} // namespace facekit
