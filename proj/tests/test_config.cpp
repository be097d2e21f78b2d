/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tests/test_config.cpp
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
#include "facekit/config.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>

using namespace facekit;
using namespace facekit::testing;

TEST_CASE("defaults reproduce the published solver constants")
{
    const PipelineConfig cfg = make_pipeline_config(ConfigMap{});
    CHECK(cfg.solver.omega_c == 25.0);
    CHECK(cfg.solver.omega_r == 10.0);
    CHECK(cfg.solver.lambda_delta == 4.0);
    CHECK(cfg.solver.lambda_f == 5.0);
    CHECK(cfg.solver.lambda_q == 5.0);
    CHECK(cfg.solver.outer_iterations == 5);
    CHECK(cfg.uv_resolution == 2048);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config file parsing with sections and comments")
{
    TempDir dir;
    {
        std::ofstream out(dir.path("run.cfg"));
        out << "# experiment configuration\n";
        out << "[solver]\n";
        out << "omega_c = 12.5   # overridden weight\n";
        out << "outer_iterations = 3\n";
        out << "\n";
        out << "[run]\n";
        out << "seed = 99\n";
        out << "[camera]\n";
        out << "swap_principal_point = true\n";
    }
    ConfigMap map = load_config(dir.path("run.cfg"));
    CHECK(map.get_double("solver.omega_c", 0) == 12.5);
    const PipelineConfig cfg = make_pipeline_config(map);
    CHECK(cfg.solver.omega_c == 12.5);
    CHECK(cfg.solver.outer_iterations == 3);
    CHECK(cfg.solver.omega_r == 10.0); // untouched default
    CHECK(cfg.seed == 99);
    CHECK(cfg.swap_principal_point);
}

TEST_CASE("malformed config lines carry line numbers")
{
    TempDir dir;
    {
        std::ofstream out(dir.path("bad.cfg"));
        out << "[solver]\nomega_c 25\n";
    }
    CHECK_THROWS_WITH_AS(load_config(dir.path("bad.cfg")), doctest::Contains(":2"), input_error);
    CHECK_THROWS_AS(load_config(dir.path("missing.cfg")), input_error);

    {
        std::ofstream out(dir.path("nan.cfg"));
        out << "[solver]\nomega_c = fast\n";
    }
    const ConfigMap map = load_config(dir.path("nan.cfg"));
    CHECK_THROWS_AS(map.get_double("solver.omega_c", 0), input_error);
}

TEST_CASE("environment variables override file values")
{
    TempDir dir;
    {
        std::ofstream out(dir.path("env.cfg"));
        out << "[run]\nseed = 7\n";
    }
    ::setenv("FACEKIT_RUN_SEED", "1234", 1);
    ConfigMap map = load_config(dir.path("env.cfg"));
    map.apply_env_overrides();
    ::unsetenv("FACEKIT_RUN_SEED");
    CHECK(map.get_uint64("run.seed", 0) == 1234);
}

TEST_CASE("validation rejects bad values and missing files")
{
    PipelineConfig cfg;
    cfg.jobs = 0;
    CHECK_THROWS_AS(cfg.validate(), input_error);

    cfg = PipelineConfig{};
    cfg.template_mesh = "/nonexistent/head.obj";
    CHECK_THROWS_AS(cfg.validate(), input_error);

    cfg = PipelineConfig{};
    cfg.solver.omega_c = -1.0;
    CHECK_THROWS_AS(cfg.validate(), input_error);
}
