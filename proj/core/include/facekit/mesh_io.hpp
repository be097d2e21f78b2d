/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/mesh_io.hpp
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

#include <string>

namespace facekit {

/**
 * Loads a Wavefront-style ASCII triangle mesh (v / vt / f records; 1-based
 * face indices, optionally "f a/at b/bt c/ct"). Vertex order is preserved
 * exactly. Non-triangle faces are rejected. If a file named
 * "<path>.labels" exists it is read as the label sidecar, and the
 * "facial_area" label is derived from "nose_tip" when absent.
 *
 * Throws input_error with a line number on malformed input.
 */
Mesh load_mesh(const std::string& path);

/**
 * Writes the mesh in the same ASCII format. Floats are serialized with 9
 * significant digits, so load -> save -> load is bitwise stable on the
 * vertex/face arrays. Labels, when present, go to "<path>.labels".
 */
void save_mesh(const Mesh& mesh, const std::string& path);

/// Writes a mesh with per-vertex colors as extended "v x y z r g b" records.
void save_colored_mesh(const Mesh& mesh, const std::vector<Eigen::Vector3d>& colors,
                       const std::string& path);

/// Reads a label sidecar file: one "name: i0 i1 i2 ..." line per label.
std::map<std::string, std::vector<int>> load_labels(const std::string& path);
void save_labels(const std::map<std::string, std::vector<int>>& labels, const std::string& path);

/// Canonical 9-significant-digit float formatting used by all text writers.
std::string format_float(double value);

} // namespace facekit
