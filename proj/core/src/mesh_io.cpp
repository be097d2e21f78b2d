/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/mesh_io.cpp
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
#include "facekit/mesh_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace facekit {

std::string format_float(double value)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what)
{
    throw input_error(path + ":" + std::to_string(line) + ": " + what);
}

// "3", "3/1" and "3/1/2" all resolve to vertex index 3.
int parse_face_index(const std::string& token, int vertex_count, const std::string& path, int line)
{
    std::size_t slash = token.find('/');
    int idx = 0;
    try
    {
        idx = std::stoi(slash == std::string::npos ? token : token.substr(0, slash));
    }
    catch (const std::exception&)
    {
        parse_fail(path, line, "bad face index '" + token + "'");
    }
    if (idx < 0) idx = vertex_count + idx + 1; // negative = relative indexing
    if (idx < 1 || idx > vertex_count) parse_fail(path, line, "face index out of range");
    return idx - 1;
}

} // namespace

Mesh load_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw input_error("cannot open mesh file: " + path);

    Mesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v")
        {
            Eigen::Vector3d p;
            if (!(ss >> p.x() >> p.y() >> p.z())) parse_fail(path, line_no, "malformed vertex record");
            mesh.vertices.push_back(p);
        }
        else if (tag == "vt")
        {
            Eigen::Vector2d t;
            if (!(ss >> t.x() >> t.y())) parse_fail(path, line_no, "malformed texture coordinate record");
            mesh.uv.push_back(t);
        }
        else if (tag == "f")
        {
            std::vector<std::string> tokens;
            std::string tok;
            while (ss >> tok) tokens.push_back(tok);
            if (tokens.size() != 3)
                parse_fail(path, line_no, tokens.size() > 3 ? "non-triangular face" : "malformed face record");
            std::array<int, 3> f;
            for (int k = 0; k < 3; ++k)
                f[k] = parse_face_index(tokens[k], mesh.vertex_count(), path, line_no);
            mesh.faces.push_back(f);
        }
        // other record types (vn, o, g, s, usemtl, ...) are ignored
    }
    if (!mesh.uv.empty() && mesh.uv.size() != mesh.vertices.size())
        throw input_error(path + ": vt record count does not match vertex count");
    mesh.validate();

    const std::string sidecar = path + ".labels";
    if (std::filesystem::exists(sidecar)) mesh.labels = load_labels(sidecar);
    compute_facial_area_label(mesh);
    return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw input_error("cannot write mesh file: " + path);
    for (const auto& v : mesh.vertices)
        out << "v " << format_float(v.x()) << ' ' << format_float(v.y()) << ' '
            << format_float(v.z()) << '\n';
    for (const auto& t : mesh.uv)
        out << "vt " << format_float(t.x()) << ' ' << format_float(t.y()) << '\n';
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!mesh.labels.empty()) save_labels(mesh.labels, path + ".labels");
}

void save_colored_mesh(const Mesh& mesh, const std::vector<Eigen::Vector3d>& colors,
                       const std::string& path)
{
    if (colors.size() != mesh.vertices.size())
        throw input_error("color array length does not match vertex count");
    std::ofstream out(path);
    if (!out) throw input_error("cannot write mesh file: " + path);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    {
        const auto& v = mesh.vertices[i];
        const auto& c = colors[i];
        out << "v " << format_float(v.x()) << ' ' << format_float(v.y()) << ' '
            << format_float(v.z()) << ' ' << format_float(c.x()) << ' ' << format_float(c.y())
            << ' ' << format_float(c.z()) << '\n';
    }
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

std::map<std::string, std::vector<int>> load_labels(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw input_error("cannot open label file: " + path);
    std::map<std::string, std::vector<int>> labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::size_t colon = line.find(':');
        if (colon == std::string::npos) parse_fail(path, line_no, "expected 'name: indices...'");
        std::string name = line.substr(0, colon);
        while (!name.empty() && name.back() == ' ') name.pop_back();
        std::istringstream ss(line.substr(colon + 1));
        std::vector<int> indices;
        int idx;
        while (ss >> idx) indices.push_back(idx);
        if (!ss.eof()) parse_fail(path, line_no, "bad index list");
        labels[name] = std::move(indices);
    }
    return labels;
}

void save_labels(const std::map<std::string, std::vector<int>>& labels, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw input_error("cannot write label file: " + path);
    for (const auto& [name, indices] : labels)
    {
        out << name << ':';
        for (int i : indices) out << ' ' << i;
        out << '\n';
    }
}

} // namespace facekit
