/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tests/helpers.cpp
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
#include "helpers.hpp"

#include "facekit/dr.hpp"
#include "facekit/geometry.hpp"

#include <atomic>
#include <filesystem>

#include <unistd.h>

namespace facekit::testing {

namespace fs = std::filesystem;

Mesh representable_deformation(const Mesh& reference, Rng& rng, double amplitude,
                               double rel_tol, int max_iterations)
{
    const SparseWeights weights = cotangent_weights(reference);
    Mesh current = smooth_deform(reference, rng, amplitude);
    const double diag = current.bounding_box_diagonal();
    for (int it = 0; it < max_iterations; ++it)
    {
        const DRFeature feature = encode_dr(current, reference, weights);
        Mesh next = decode_dr(feature, reference, weights, 0, current.vertices[0]);
        const double change = max_vertex_distance(next, current);
        current = std::move(next);
        if (change <= rel_tol * diag) break;
    }
    return current;
}

TempDir::TempDir()
{
    static std::atomic<int> counter{0};
    root_ = (fs::temp_directory_path() /
             ("facekit-test-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter.fetch_add(1))))
                .string();
    fs::create_directories(root_);
}

TempDir::~TempDir()
{
    std::error_code ec;
    fs::remove_all(root_, ec);
}

} // namespace facekit::testing
