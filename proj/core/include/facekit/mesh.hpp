/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/mesh.hpp
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

#include <Eigen/Core>

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace facekit {

/// Raised on malformed input files or inconsistent arguments (CLI exit code 2).
class input_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a numerical routine cannot produce a result (CLI exit code 1).
class numeric_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/**
 * Triangle mesh with optional per-vertex UV coordinates and named vertex
 * sets ("labels"). Positions are in millimeters. The triangulation is fixed
 * after construction; all per-vertex companion arrays must match the vertex
 * count.
 */
struct Mesh
{
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Eigen::Vector2d> uv; ///< empty or one entry per vertex, in [0,1]^2
    std::map<std::string, std::vector<int>> labels;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    bool has_uv() const { return !uv.empty(); }

    /// Throws input_error on out-of-range face indices, degenerate faces, or
    /// a uv array whose length does not match the vertex count.
    void validate() const;

    /// Diagonal length of the axis-aligned bounding box.
    double bounding_box_diagonal() const;

    /// Flattened (x0,y0,z0,x1,...) copy of the vertex positions.
    Eigen::VectorXd flatten() const;

    /// Replaces vertex positions from a flattened coordinate vector.
    void set_from_flat(const Eigen::VectorXd& coords);
};

/// Radius (mm) around the nose tip that defines the "facial_area" label.
inline constexpr double kFacialAreaRadiusMm = 95.0;

/// Populates mesh.labels["facial_area"] with all vertices within
/// kFacialAreaRadiusMm of the vertex labeled "nose_tip". No-op when the
/// label already exists or no nose tip is labeled.
void compute_facial_area_label(Mesh& mesh);

} // namespace facekit
