/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tests/test_mesh.cpp
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
#include "facekit/mesh.hpp"
#include "facekit/mesh_io.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <fstream>

using namespace facekit;
using namespace facekit::testing;

TEST_CASE("load_mesh parses a regular tetrahedron")
{
    TempDir dir;
    const std::string path = dir.path("tet.obj");
    {
        std::ofstream out(path);
        out << "v 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\n"
               "f 1 2 3\nf 1 4 2\nf 1 3 4\nf 2 4 3\n";
    }
    const Mesh mesh = load_mesh(path);
    CHECK(mesh.vertex_count() == 4);
    CHECK(mesh.face_count() == 4);
    CHECK(mesh.vertices[1] == Eigen::Vector3d(1, -1, -1));
    CHECK(mesh.faces[1] == std::array<int, 3>{0, 3, 1});
}

TEST_CASE("load_mesh rejects a quad face with a line number")
{
    TempDir dir;
    const std::string path = dir.path("quad.obj");
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
    }
    CHECK_THROWS_WITH_AS(load_mesh(path), doctest::Contains("non-triangular face"), input_error);
    try
    {
        load_mesh(path);
    }
    catch (const input_error& e)
    {
        CHECK(std::string(e.what()).find(":5") != std::string::npos);
    }
}

TEST_CASE("load_mesh supports vt records and negative relative indices")
{
    TempDir dir;
    const std::string path = dir.path("uv.obj");
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
               "vt 0 0\nvt 1 0\nvt 0 1\n"
               "f 1/1 2/2 3/3\nf -3/-3 -2/-2 -1/-1\n";
    }
    const Mesh mesh = load_mesh(path);
    REQUIRE(mesh.has_uv());
    CHECK(mesh.uv[1] == Eigen::Vector2d(1, 0));
    CHECK(mesh.faces[0] == mesh.faces[1]);
}

TEST_CASE("mesh save/load round trip is bitwise stable")
{
    Rng rng(7);
    Mesh mesh = make_sphere(6, 8, 123.456789);
    mesh = smooth_deform(mesh, rng);
    mesh.labels["nose_tip"] = {0};

    TempDir dir;
    save_mesh(mesh, dir.path("a.obj"));
    const Mesh once = load_mesh(dir.path("a.obj"));
    save_mesh(once, dir.path("b.obj"));
    const Mesh twice = load_mesh(dir.path("b.obj"));

    REQUIRE(once.vertex_count() == twice.vertex_count());
    for (int i = 0; i < once.vertex_count(); ++i)
        CHECK(once.vertices[i] == twice.vertices[i]); // bitwise
    CHECK(once.faces == twice.faces);

    // and the two serialized files agree byte for byte
    std::ifstream fa(dir.path("a.obj"), std::ios::binary);
    std::ifstream fb(dir.path("b.obj"), std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
}

TEST_CASE("validate rejects out-of-range and degenerate faces")
{
    Mesh mesh = make_tetrahedron();
    CHECK_NOTHROW(mesh.validate());

    Mesh bad = mesh;
    bad.faces.push_back({0, 1, 9});
    CHECK_THROWS_AS(bad.validate(), input_error);

    bad = mesh;
    bad.faces.push_back({1, 1, 2});
    CHECK_THROWS_AS(bad.validate(), input_error);

    bad = mesh;
    bad.uv = {{0, 0}}; // wrong length
    CHECK_THROWS_AS(bad.validate(), input_error);
}

TEST_CASE("facial_area label collects vertices within 95 mm of the nose tip")
{
    Mesh mesh = make_sphere(10, 12, 200.0); // mm-scale head stand-in
    mesh.labels["nose_tip"] = {0};
    compute_facial_area_label(mesh);
    REQUIRE(mesh.labels.count("facial_area") == 1);
    const Eigen::Vector3d tip = mesh.vertices[0];
    for (int i : mesh.labels["facial_area"])
        CHECK((mesh.vertices[i] - tip).norm() <= kFacialAreaRadiusMm);
    int inside = 0;
    for (const auto& v : mesh.vertices)
        if ((v - tip).norm() <= kFacialAreaRadiusMm) ++inside;
    CHECK(static_cast<int>(mesh.labels["facial_area"].size()) == inside);
}

TEST_CASE("label sidecar round trip")
{
    TempDir dir;
    std::map<std::string, std::vector<int>> labels{{"nose_tip", {3}}, {"eyes", {1, 2, 5}}};
    save_labels(labels, dir.path("m.labels"));
    CHECK(load_labels(dir.path("m.labels")) == labels);
}

TEST_CASE("flatten and set_from_flat are inverse")
{
    Mesh mesh = make_tetrahedron();
    const Eigen::VectorXd flat = mesh.flatten();
    REQUIRE(flat.size() == 12);
    CHECK(flat(3) == mesh.vertices[1].x());
    Mesh copy = mesh;
    copy.set_from_flat(flat);
    CHECK(max_vertex_distance(copy, mesh) == 0.0);
}

TEST_CASE("missing mesh file raises input_error")
{
    CHECK_THROWS_AS(load_mesh("/nonexistent/path.obj"), input_error);
}
