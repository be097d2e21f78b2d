/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/include/facekit/config.hpp
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

#include "facekit/solver.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace facekit {

/**
 * Line-oriented key-value configuration with [section] headers. Keys are
 * stored as "section.key" ("" section for keys before any header). '#'
 * starts a comment; values keep internal whitespace.
 */
class ConfigMap
{
public:
    ConfigMap() = default;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback = {}) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Overlays FACEKIT_<SECTION>_<KEY> environment variables; an env value
    /// always wins over the file value.
    void apply_env_overrides();

private:
    std::map<std::string, std::string> values_;
};

/// Parses a config file. Throws input_error with a line number on malformed
/// lines; a missing file is an input_error too.
ConfigMap load_config(const std::string& path);

/// Everything one pipeline invocation needs, with the published defaults.
struct PipelineConfig
{
    // asset paths
    std::string template_mesh;
    std::string anchor_table;
    std::string blendshape_basis;
    std::string dataset_manifest;
    std::string output_dir = ".";

    SolverConfig solver; // omega_c=25, omega_r=10, lambda_delta=4, lambda_f=5, lambda_q=5, N=5
    std::uint64_t seed = 0;
    int jobs = 1;
    bool swap_principal_point = false;
    int uv_resolution = 2048;

    /// Checks constants are in range and every referenced file exists.
    void validate() const;
};

/// Builds a PipelineConfig from a parsed (and env-overlaid) ConfigMap;
/// unset keys keep their defaults.
PipelineConfig make_pipeline_config(const ConfigMap& map);

} // namespace facekit
