/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/config.cpp
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

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace facekit {

namespace {

std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const
{
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try
    {
        std::size_t consumed = 0;
        const double v = std::stod(it->second, &consumed);
        if (trim(it->second.substr(consumed)).empty()) return v;
    }
    catch (const std::logic_error&)
    {
    }
    throw input_error("config key '" + key + "': not a number: " + it->second);
}

int ConfigMap::get_int(const std::string& key, int fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try
    {
        std::size_t consumed = 0;
        const int v = std::stoi(it->second, &consumed);
        if (trim(it->second.substr(consumed)).empty()) return v;
    }
    catch (const std::logic_error&)
    {
    }
    throw input_error("config key '" + key + "': not an integer: " + it->second);
}

std::uint64_t ConfigMap::get_uint64(const std::string& key, std::uint64_t fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try
    {
        std::size_t consumed = 0;
        const std::uint64_t v = std::stoull(it->second, &consumed);
        if (trim(it->second.substr(consumed)).empty()) return v;
    }
    catch (const std::logic_error&)
    {
    }
    throw input_error("config key '" + key + "': not an integer: " + it->second);
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw input_error("config key '" + key + "': not a boolean: " + it->second);
}

void ConfigMap::apply_env_overrides()
{
    for (auto& [key, value] : values_)
    {
        std::string env_name = "FACEKIT_" + key;
        for (char& c : env_name)
            c = c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (const char* env = std::getenv(env_name.c_str())) value = env;
    }
}

ConfigMap load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file: " + path);
    ConfigMap map;
    std::string section, line;
    int line_number = 0;
    while (std::getline(in, line))
    {
        ++line_number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[')
        {
            if (line.back() != ']')
                throw input_error(path + ":" + std::to_string(line_number) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw input_error(path + ":" + std::to_string(line_number) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw input_error(path + ":" + std::to_string(line_number) + ": empty key");
        map.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
    }
    return map;
}

PipelineConfig make_pipeline_config(const ConfigMap& map)
{
    PipelineConfig cfg;
    cfg.template_mesh = map.get_string("paths.template_mesh", cfg.template_mesh);
    cfg.anchor_table = map.get_string("paths.anchor_table", cfg.anchor_table);
    cfg.blendshape_basis = map.get_string("paths.blendshape_basis", cfg.blendshape_basis);
    cfg.dataset_manifest = map.get_string("paths.dataset_manifest", cfg.dataset_manifest);
    cfg.output_dir = map.get_string("paths.output_dir", cfg.output_dir);

    cfg.solver.outer_iterations = map.get_int("solver.outer_iterations", cfg.solver.outer_iterations);
    cfg.solver.inner_iterations = map.get_int("solver.inner_iterations", cfg.solver.inner_iterations);
    cfg.solver.omega_c = map.get_double("solver.omega_c", cfg.solver.omega_c);
    cfg.solver.omega_r = map.get_double("solver.omega_r", cfg.solver.omega_r);
    cfg.solver.lambda_delta = map.get_double("solver.lambda_delta", cfg.solver.lambda_delta);
    cfg.solver.lambda_f = map.get_double("solver.lambda_f", cfg.solver.lambda_f);
    cfg.solver.lambda_q = map.get_double("solver.lambda_q", cfg.solver.lambda_q);
    cfg.solver.damping_init = map.get_double("solver.damping_init", cfg.solver.damping_init);
    cfg.solver.max_damping_retries =
        map.get_int("solver.max_damping_retries", cfg.solver.max_damping_retries);

    cfg.seed = map.get_uint64("run.seed", cfg.seed);
    cfg.jobs = map.get_int("run.jobs", cfg.jobs);
    cfg.swap_principal_point = map.get_bool("camera.swap_principal_point", cfg.swap_principal_point);
    cfg.uv_resolution = map.get_int("texture.uv_resolution", cfg.uv_resolution);
    return cfg;
}

void PipelineConfig::validate() const
{
    solver.validate();
    if (jobs < 1) throw input_error("jobs must be >= 1");
    if (uv_resolution < 1) throw input_error("uv_resolution must be >= 1");
    for (const std::string* path : {&template_mesh, &anchor_table, &blendshape_basis,
                                    &dataset_manifest})
        if (!path->empty() && !std::filesystem::exists(*path))
            throw input_error("configured file does not exist: " + *path);
}

} // namespace facekit
