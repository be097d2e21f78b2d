/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/solver.cpp
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
#include "facekit/solver.hpp"

#include "facekit/dr.hpp"
#include "facekit/mesh_io.hpp"
#include "facekit/rotation_util.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace facekit {

// ---------------------------------------------------------------------------
// blendshape basis I/O

namespace {
constexpr char kBasisMagic[4] = {'B', 'S', 'B', '1'};
}

void save_blendshapes(const BlendshapeBasis& basis, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write blendshape file: " + path);
    out.write(kBasisMagic, 4);
    const std::uint64_t m = basis.count(), v = basis.vertex_count();
    out.write(reinterpret_cast<const char*>(&m), sizeof(m));
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    out.write(reinterpret_cast<const char*>(basis.sigma.data()), m * sizeof(double));
    for (const auto& shape : basis.shapes)
    {
        const Eigen::MatrixX3d& s = shape;
        for (Eigen::Index row = 0; row < s.rows(); ++row)
        {
            const Eigen::Vector3d p = s.row(row);
            out.write(reinterpret_cast<const char*>(p.data()), 3 * sizeof(double));
        }
    }
    if (!out) throw input_error("short write on blendshape file: " + path);
}

BlendshapeBasis load_blendshapes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open blendshape file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kBasisMagic, 4) != 0)
        throw input_error(path + ": not a blendshape file (bad magic)");
    std::uint64_t m = 0, v = 0;
    in.read(reinterpret_cast<char*>(&m), sizeof(m));
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    BlendshapeBasis basis;
    basis.sigma.resize(m);
    in.read(reinterpret_cast<char*>(basis.sigma.data()), m * sizeof(double));
    basis.shapes.resize(m);
    for (auto& shape : basis.shapes)
    {
        shape.resize(v, 3);
        for (std::uint64_t row = 0; row < v; ++row)
        {
            Eigen::Vector3d p;
            in.read(reinterpret_cast<char*>(p.data()), 3 * sizeof(double));
            shape.row(row) = p;
        }
    }
    if (!in) throw input_error(path + ": truncated blendshape file");
    if ((basis.sigma.array() <= 0.0).any())
        throw input_error(path + ": non-positive blendshape sigma");
    return basis;
}

// ---------------------------------------------------------------------------
// landmarks

double LandmarkSet::eye_distance() const
{
    if (eye_left < 0 || eye_right < 0 || eye_left == eye_right)
        throw input_error("eye corner landmarks missing or identical");
    const double d = (points[eye_left] - points[eye_right]).norm();
    if (d <= 0.0) throw input_error("outermost eye landmarks coincide");
    return d;
}

std::vector<std::pair<int, Eigen::Vector2d>> load_landmark_points(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw input_error("cannot open landmark file: " + path);
    std::vector<std::pair<int, Eigen::Vector2d>> points;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        int markup;
        Eigen::Vector2d p;
        if (!(ss >> markup >> p.x() >> p.y()))
            throw input_error(path + ":" + std::to_string(line_no) + ": malformed landmark record");
        points.emplace_back(markup, p);
    }
    return points;
}

void save_landmark_points(const std::vector<std::pair<int, Eigen::Vector2d>>& points,
                          const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw input_error("cannot write landmark file: " + path);
    for (const auto& [markup, p] : points)
        out << markup << ' ' << format_float(p.x()) << ' ' << format_float(p.y()) << '\n';
}

LandmarkSet build_landmark_set(const std::vector<std::pair<int, Eigen::Vector2d>>& points,
                               const std::string& anchor_table_path)
{
    std::ifstream in(anchor_table_path);
    if (!in) throw input_error("cannot open anchor table: " + anchor_table_path);

    struct AnchorEntry
    {
        BarycentricAnchor anchor;
        bool contour = false;
        int strip_id = -1;
    };
    std::map<int, AnchorEntry> table;
    std::map<int, ContourStrip> strips;
    int eye_left_markup = -1, eye_right_markup = -1;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        const std::string where = anchor_table_path + ":" + std::to_string(line_no);
        if (tag == "anchor")
        {
            int markup, contour_flag;
            AnchorEntry entry;
            if (!(ss >> markup >> entry.anchor.face >> entry.anchor.bary[0] >>
                  entry.anchor.bary[1] >> entry.anchor.bary[2] >> contour_flag >> entry.strip_id))
                throw input_error(where + ": malformed anchor record");
            entry.contour = contour_flag != 0;
            table[markup] = entry;
        }
        else if (tag == "strip")
        {
            int id;
            if (!(ss >> id)) throw input_error(where + ": malformed strip record");
            ContourStrip strip;
            int v;
            while (ss >> v) strip.vertices.push_back(v);
            if (strip.vertices.size() < 2) throw input_error(where + ": strip needs >= 2 vertices");
            strips[id] = std::move(strip);
        }
        else if (tag == "eye_corners")
        {
            if (!(ss >> eye_left_markup >> eye_right_markup))
                throw input_error(where + ": malformed eye_corners record");
        }
        else
        {
            throw input_error(where + ": unknown record '" + tag + "'");
        }
    }

    LandmarkSet lms;
    lms.strips = std::move(strips);
    for (const auto& [markup, p] : points)
    {
        auto it = table.find(markup);
        if (it == table.end())
            throw input_error("landmark with mark-up index " + std::to_string(markup) +
                              " has no anchor table entry");
        lms.points.push_back(p);
        lms.markup.push_back(markup);
        lms.anchors.push_back(it->second.anchor);
        lms.contour.push_back(it->second.contour);
        lms.strip_ids.push_back(it->second.strip_id);
        if (it->second.contour && it->second.strip_id >= 0 &&
            !lms.strips.count(it->second.strip_id))
            throw input_error("contour landmark references unknown strip " +
                              std::to_string(it->second.strip_id));
        if (markup == eye_left_markup) lms.eye_left = lms.count() - 1;
        if (markup == eye_right_markup) lms.eye_right = lms.count() - 1;
    }
    if (lms.eye_left < 0 || lms.eye_right < 0)
        throw input_error("anchor table eye_corners do not match any detected landmark");
    return lms;
}

// ---------------------------------------------------------------------------
// fit parameters

Mesh FitParams::reconstruct(const Mesh& neutral, const BlendshapeBasis& basis) const
{
    if (basis.count() != beta.size()) throw input_error("beta length != blendshape count");
    if (delta.rows() != neutral.vertex_count())
        throw input_error("corrective field length != vertex count");
    Mesh out = neutral;
    Eigen::MatrixX3d offset = delta;
    for (int j = 0; j < basis.count(); ++j) offset += beta[j] * basis.shapes[j];
    for (int i = 0; i < out.vertex_count(); ++i)
        out.vertices[i] += offset.row(i).transpose();
    return out;
}

void save_fit_params(const FitParams& params, const Intrinsics& intr, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw input_error("cannot write fit parameter file: " + path);
    const auto& q = params.extrinsics.rotation;
    out << "quaternion " << format_float(q.w()) << ' ' << format_float(q.x()) << ' '
        << format_float(q.y()) << ' ' << format_float(q.z()) << '\n';
    out << "translation " << format_float(params.extrinsics.translation.x()) << ' '
        << format_float(params.extrinsics.translation.y()) << ' '
        << format_float(params.extrinsics.translation.z()) << '\n';
    out << "focal " << format_float(intr.f) << '\n';
    out << "focal_scale " << format_float(params.fs) << '\n';
    out << "principal_point " << format_float(intr.cx) << ' ' << format_float(intr.cy) << '\n';
    out << "beta";
    for (Eigen::Index i = 0; i < params.beta.size(); ++i)
        out << ' ' << format_float(params.beta[i]);
    out << '\n';
    out << "delta " << params.delta.rows() << '\n';
    for (Eigen::Index i = 0; i < params.delta.rows(); ++i)
        out << format_float(params.delta(i, 0)) << ' ' << format_float(params.delta(i, 1)) << ' '
            << format_float(params.delta(i, 2)) << '\n';
}

FitParams load_fit_params(const std::string& path, Intrinsics& intr)
{
    std::ifstream in(path);
    if (!in) throw input_error("cannot open fit parameter file: " + path);
    FitParams params;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        const std::string where = path + ":" + std::to_string(line_no);
        if (key == "quaternion")
        {
            double w, x, y, z;
            if (!(ss >> w >> x >> y >> z)) throw input_error(where + ": malformed quaternion");
            params.extrinsics.rotation = Eigen::Quaterniond(w, x, y, z).normalized();
        }
        else if (key == "translation")
        {
            if (!(ss >> params.extrinsics.translation.x() >> params.extrinsics.translation.y() >>
                  params.extrinsics.translation.z()))
                throw input_error(where + ": malformed translation");
        }
        else if (key == "focal")
            ss >> intr.f;
        else if (key == "focal_scale")
        {
            ss >> params.fs;
            intr.fs = params.fs;
        }
        else if (key == "principal_point")
            ss >> intr.cx >> intr.cy;
        else if (key == "beta")
        {
            std::vector<double> values;
            double v;
            while (ss >> v) values.push_back(v);
            params.beta = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
        }
        else if (key == "delta")
        {
            int rows;
            if (!(ss >> rows)) throw input_error(where + ": malformed delta header");
            params.delta.resize(rows, 3);
            for (int i = 0; i < rows; ++i)
            {
                if (!std::getline(in, line)) throw input_error(path + ": truncated delta block");
                ++line_no;
                std::istringstream row(line);
                if (!(row >> params.delta(i, 0) >> params.delta(i, 1) >> params.delta(i, 2)))
                    throw input_error(path + ":" + std::to_string(line_no) + ": malformed delta row");
            }
        }
        else
            throw input_error(where + ": unknown key '" + key + "'");
    }
    return params;
}

void SolverConfig::validate() const
{
    if (outer_iterations < 1) throw input_error("outer_iterations must be >= 1");
    if (inner_iterations < 1) throw input_error("inner_iterations must be >= 1");
    if (omega_c < 0 || omega_r < 0 || lambda_delta < 0 || lambda_f < 0 || lambda_q < 0)
        throw input_error("energy weights must be nonnegative");
}

// ---------------------------------------------------------------------------
// state and residual assembly

Extrinsics FitState::extrinsics() const
{
    Extrinsics extr;
    extr.rotation = (Eigen::Quaterniond(rotation_exp(w)) * q0).normalized();
    extr.translation = t;
    return extr;
}

FitParams FitState::to_params() const
{
    FitParams params;
    params.beta = beta;
    params.delta = delta;
    params.extrinsics = extrinsics();
    params.fs = fs;
    return params;
}

Eigen::VectorXd FitState::pack() const
{
    const int m = static_cast<int>(beta.size());
    const int v = static_cast<int>(delta.rows());
    Eigen::VectorXd p(m + 3 * v + 7);
    p.head(m) = beta;
    for (int i = 0; i < v; ++i) p.segment<3>(m + 3 * i) = delta.row(i).transpose();
    p.segment<3>(m + 3 * v) = t;
    p.segment<3>(m + 3 * v + 3) = w;
    p[m + 3 * v + 6] = fs;
    return p;
}

void FitState::unpack(const Eigen::VectorXd& p)
{
    const int m = static_cast<int>(beta.size());
    const int v = static_cast<int>(delta.rows());
    if (p.size() != m + 3 * v + 7) throw input_error("packed parameter vector has wrong length");
    beta = p.head(m);
    for (int i = 0; i < v; ++i) delta.row(i) = p.segment<3>(m + 3 * i).transpose();
    t = p.segment<3>(m + 3 * v);
    w = p.segment<3>(m + 3 * v + 3);
    fs = p[m + 3 * v + 6];
}

FitWorkspace make_fit_workspace(const Mesh& neutral, const BlendshapeBasis& basis)
{
    FitWorkspace ws;
    ws.weights = cotangent_weights(neutral);
    ws.laplacian = ws.weights.laplacian_matrix();
    ws.laplacian_of_shapes.reserve(basis.count());
    for (const auto& shape : basis.shapes)
        ws.laplacian_of_shapes.push_back(ws.laplacian * shape);
    return ws;
}

ResidualSystem assemble_residuals(const FitState& state, const Mesh& neutral,
                                  const BlendshapeBasis& basis, const LandmarkSet& lms,
                                  const Intrinsics& intr, const SolverConfig& config,
                                  const Eigen::VectorXd& beta_prev, const FitWorkspace& ws,
                                  bool with_jacobian)
{
    const int M = basis.count();
    const int V = neutral.vertex_count();
    const int K = lms.count();
    const int n_params = M + 3 * V + 7;
    const int col_t = M + 3 * V;
    const int col_w = M + 3 * V + 3;
    const int col_fs = M + 3 * V + 6;

    ResidualSystem sys;
    sys.landmark_rows = 2 * K;
    sys.corrective_rows = 6 * V;
    sys.prior_rows = M + 4;
    const int n_rows = sys.landmark_rows + sys.corrective_rows + sys.prior_rows;
    sys.r.resize(n_rows);

    std::vector<Eigen::Triplet<double>> trips;
    if (with_jacobian) trips.reserve(2 * K * (M + 16) + V * 40 + M + 8);

    const double g = state.fs * intr.f;
    const Eigen::Matrix3d Rc = state.extrinsics().rotation.toRotationMatrix();
    const Eigen::Matrix3d Jl = so3_left_jacobian(state.w);
    const double lm_scale = std::sqrt(100.0 / lms.eye_distance());

    // P_F and the current offset field are shared by landmark sampling.
    Eigen::MatrixX3d offset = state.delta;
    for (int j = 0; j < M; ++j) offset += state.beta[j] * basis.shapes[j];

    for (int k = 0; k < K; ++k)
    {
        const BarycentricAnchor& anchor = lms.anchors[k];
        anchor.validate(neutral);
        const auto& face = neutral.faces[anchor.face];
        Eigen::Vector3d X = Eigen::Vector3d::Zero();
        for (int c = 0; c < 3; ++c)
            X += anchor.bary[c] *
                 (neutral.vertices[face[c]] + offset.row(face[c]).transpose());

        const Eigen::Vector3d v_rot = Rc * X;
        const Eigen::Vector3d p = v_rot + state.t;
        if (p.z() <= 0.0)
        {
            sys.behind_camera = true;
            sys.r[2 * k] = kBehindCameraResidual;
            sys.r[2 * k + 1] = kBehindCameraResidual;
            continue; // zero Jacobian rows: damping recovers the step
        }
        const Eigen::Vector2d proj(g * p.x() / p.z() + intr.cx, g * p.y() / p.z() + intr.cy);
        sys.r.segment<2>(2 * k) = lm_scale * (proj - lms.points[k]);

        if (!with_jacobian) continue;
        Eigen::Matrix<double, 2, 3> P;
        P << g / p.z(), 0.0, -g * p.x() / (p.z() * p.z()),
             0.0, g / p.z(), -g * p.y() / (p.z() * p.z());
        P *= lm_scale;
        const Eigen::Matrix<double, 2, 3> PR = P * Rc;

        for (int j = 0; j < M; ++j)
        {
            Eigen::Vector3d dX = Eigen::Vector3d::Zero();
            for (int c = 0; c < 3; ++c)
                dX += anchor.bary[c] * basis.shapes[j].row(face[c]).transpose();
            const Eigen::Vector2d col = PR * dX;
            trips.emplace_back(2 * k, j, col[0]);
            trips.emplace_back(2 * k + 1, j, col[1]);
        }
        for (int c = 0; c < 3; ++c)
        {
            const Eigen::Matrix<double, 2, 3> block = anchor.bary[c] * PR;
            for (int col = 0; col < 3; ++col)
            {
                trips.emplace_back(2 * k, M + 3 * face[c] + col, block(0, col));
                trips.emplace_back(2 * k + 1, M + 3 * face[c] + col, block(1, col));
            }
        }
        for (int col = 0; col < 3; ++col)
        {
            trips.emplace_back(2 * k, col_t + col, P(0, col));
            trips.emplace_back(2 * k + 1, col_t + col, P(1, col));
        }
        const Eigen::Matrix<double, 2, 3> Jw = P * (-skew(v_rot) * Jl);
        for (int col = 0; col < 3; ++col)
        {
            trips.emplace_back(2 * k, col_w + col, Jw(0, col));
            trips.emplace_back(2 * k + 1, col_w + col, Jw(1, col));
        }
        trips.emplace_back(2 * k, col_fs, lm_scale * intr.f * p.x() / p.z());
        trips.emplace_back(2 * k + 1, col_fs, lm_scale * intr.f * p.y() / p.z());
    }

    // Corrective term: sqrt(omega_c) * L(B(beta - beta_prev) + delta),
    // then sqrt(omega_c * lambda_delta) * delta.
    const double sc = std::sqrt(config.omega_c);
    const double sd = std::sqrt(config.omega_c * config.lambda_delta);
    Eigen::MatrixX3d Q = state.delta;
    for (int j = 0; j < M; ++j) Q += (state.beta[j] - beta_prev[j]) * basis.shapes[j];
    const Eigen::MatrixX3d LQ = ws.laplacian * Q;
    const int lap_base = sys.landmark_rows;
    const int pen_base = lap_base + 3 * V;
    for (int i = 0; i < V; ++i)
        for (int c = 0; c < 3; ++c)
        {
            sys.r[lap_base + 3 * i + c] = sc * LQ(i, c);
            sys.r[pen_base + 3 * i + c] = sd * state.delta(i, c);
        }
    if (with_jacobian)
    {
        for (int outer = 0; outer < ws.laplacian.outerSize(); ++outer)
            for (Eigen::SparseMatrix<double>::InnerIterator it(ws.laplacian, outer); it; ++it)
                for (int c = 0; c < 3; ++c)
                    trips.emplace_back(lap_base + 3 * static_cast<int>(it.row()) + c,
                                       M + 3 * static_cast<int>(it.col()) + c, sc * it.value());
        for (int j = 0; j < M; ++j)
        {
            const Eigen::MatrixX3d& LB = ws.laplacian_of_shapes[j];
            for (int i = 0; i < V; ++i)
                for (int c = 0; c < 3; ++c)
                    trips.emplace_back(lap_base + 3 * i + c, j, sc * LB(i, c));
        }
        for (int i = 0; i < V; ++i)
            for (int c = 0; c < 3; ++c)
                trips.emplace_back(pen_base + 3 * i + c, M + 3 * i + c, sd);
    }

    // Prior term.
    const double sr = std::sqrt(config.omega_r);
    const double sf = std::sqrt(config.omega_r * config.lambda_f);
    const double sq = std::sqrt(config.omega_r * config.lambda_q);
    const int prior_base = pen_base + 3 * V;
    for (int j = 0; j < M; ++j) sys.r[prior_base + j] = sr * state.beta[j] / basis.sigma[j];
    sys.r[prior_base + M] = sf * std::log(state.fs);
    sys.r.segment<3>(prior_base + M + 1) = sq * state.w;
    if (with_jacobian)
    {
        for (int j = 0; j < M; ++j)
            trips.emplace_back(prior_base + j, j, sr / basis.sigma[j]);
        trips.emplace_back(prior_base + M, col_fs, sf / state.fs);
        for (int c = 0; c < 3; ++c)
            trips.emplace_back(prior_base + M + 1 + c, col_w + c, sq);
        sys.J.resize(n_rows, n_params);
        sys.J.setFromTriplets(trips.begin(), trips.end());
    }
    return sys;
}

// ---------------------------------------------------------------------------
// standalone energies

double landmark_energy(const FitParams& params, const Mesh& neutral, const BlendshapeBasis& basis,
                       const LandmarkSet& lms, const Intrinsics& intr, bool* behind_camera)
{
    const Mesh posed = params.reconstruct(neutral, basis);
    Intrinsics eff = intr;
    eff.fs = params.fs;
    const double scale = 100.0 / lms.eye_distance();
    double energy = 0.0;
    bool behind = false;
    for (int k = 0; k < lms.count(); ++k)
    {
        const Eigen::Vector3d X = sample_surface(posed, lms.anchors[k]);
        const Eigen::Vector3d p = params.extrinsics.transform(X);
        if (p.z() <= 0.0)
        {
            behind = true;
            energy += 2.0 * kBehindCameraResidual * kBehindCameraResidual / scale;
            continue;
        }
        const double g = eff.effective_focal();
        const Eigen::Vector2d proj(g * p.x() / p.z() + eff.cx, g * p.y() / p.z() + eff.cy);
        energy += (proj - lms.points[k]).squaredNorm();
    }
    if (behind_camera) *behind_camera = behind;
    return scale * energy;
}

double corrective_energy(const FitParams& params, const Mesh& neutral,
                         const BlendshapeBasis& basis, const FitWorkspace& ws,
                         const Eigen::VectorXd& beta_prev, double lambda_delta)
{
    if (beta_prev.size() != basis.count()) throw input_error("beta_prev length mismatch");
    Eigen::MatrixX3d Q = params.delta;
    for (int j = 0; j < basis.count(); ++j)
        Q += (params.beta[j] - beta_prev[j]) * basis.shapes[j];
    const Eigen::MatrixX3d LQ = ws.laplacian * Q;
    return LQ.squaredNorm() + lambda_delta * params.delta.squaredNorm();
}

double prior_energy(const FitParams& params, const BlendshapeBasis& basis,
                    const SolverConfig& config, const Eigen::Vector3d& rotation_deviation)
{
    double e = (params.beta.array() / basis.sigma.array()).square().sum();
    const double lf = std::log(params.fs);
    e += config.lambda_f * lf * lf;
    e += config.lambda_q * rotation_deviation.squaredNorm();
    return e;
}

double total_energy(double landmark, double corrective, double prior, const SolverConfig& config)
{
    return landmark + config.omega_c * corrective + config.omega_r * prior;
}

// ---------------------------------------------------------------------------
// contour sliding

namespace {

// Candidate anchors along a strip: points at fixed fractions of every
// consecutive vertex pair, expressed on a face shared by the pair.
std::vector<BarycentricAnchor> strip_candidates(const Mesh& mesh, const ContourStrip& strip)
{
    static const double kFractions[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<BarycentricAnchor> candidates;
    for (std::size_t s = 0; s + 1 < strip.vertices.size(); ++s)
    {
        const int a = strip.vertices[s];
        const int b = strip.vertices[s + 1];
        int face_idx = -1, ca = -1, cb = -1;
        for (int f = 0; f < mesh.face_count() && face_idx < 0; ++f)
        {
            const auto& face = mesh.faces[f];
            int pa = -1, pb = -1;
            for (int c = 0; c < 3; ++c)
            {
                if (face[c] == a) pa = c;
                if (face[c] == b) pb = c;
            }
            if (pa >= 0 && pb >= 0)
            {
                face_idx = f;
                ca = pa;
                cb = pb;
            }
        }
        if (face_idx < 0)
            throw input_error("contour strip vertices " + std::to_string(a) + "," +
                              std::to_string(b) + " do not share a face");
        for (double frac : kFractions)
        {
            BarycentricAnchor anchor;
            anchor.face = face_idx;
            anchor.bary.setZero();
            anchor.bary[ca] = 1.0 - frac;
            anchor.bary[cb] = frac;
            candidates.push_back(anchor);
        }
    }
    return candidates;
}

} // namespace

LandmarkSet slide_contour_anchors(const FitParams& params, const Mesh& neutral,
                                  const BlendshapeBasis& basis, const LandmarkSet& lms,
                                  const Intrinsics& intr)
{
    LandmarkSet out = lms;
    const Mesh posed = params.reconstruct(neutral, basis);
    Intrinsics eff = intr;
    eff.fs = params.fs;

    for (int k = 0; k < lms.count(); ++k)
    {
        if (!lms.contour[k] || lms.strip_ids[k] < 0) continue;
        const ContourStrip& strip = lms.strips.at(lms.strip_ids[k]);
        std::vector<BarycentricAnchor> candidates = strip_candidates(posed, strip);
        candidates.push_back(lms.anchors[k]); // sliding never loses ground

        double best = std::numeric_limits<double>::infinity();
        BarycentricAnchor best_anchor = lms.anchors[k];
        for (const auto& cand : candidates)
        {
            const Eigen::Vector3d X = sample_surface(posed, cand);
            const Eigen::Vector3d p = params.extrinsics.transform(X);
            if (p.z() <= 0.0) continue; // behind camera: keep previous anchor
            const double g = eff.effective_focal();
            const Eigen::Vector2d proj(g * p.x() / p.z() + eff.cx, g * p.y() / p.z() + eff.cy);
            const double d = (proj - lms.points[k]).squaredNorm();
            if (d < best)
            {
                best = d;
                best_anchor = cand;
            }
        }
        out.anchors[k] = best_anchor;
    }
    return out;
}

// ---------------------------------------------------------------------------
// fit

FitResult fit(const Mesh& neutral, const LandmarkSet& lms, const BlendshapeBasis& basis,
              const Intrinsics& intr, const SolverConfig& config)
{
    config.validate();
    if (basis.vertex_count() != neutral.vertex_count())
        throw input_error("blendshape basis does not match template vertex count");

    const int M = basis.count();
    const int V = neutral.vertex_count();

    FitResult result;
    FitState state;
    state.beta = Eigen::VectorXd::Zero(M);
    state.delta = Eigen::MatrixX3d::Zero(V, 3);

    // Pose initialization from EPnP over the landmark anchors.
    {
        std::vector<Eigen::Vector3d> pts3;
        std::vector<Eigen::Vector2d> pts2;
        for (int k = 0; k < lms.count(); ++k)
        {
            if (lms.contour[k]) continue; // contour anchors are provisional
            pts3.push_back(sample_surface(neutral, lms.anchors[k]));
            pts2.push_back(lms.points[k]);
        }
        if (pts3.size() < 6)
            for (int k = 0; k < lms.count(); ++k)
                if (lms.contour[k])
                {
                    pts3.push_back(sample_surface(neutral, lms.anchors[k]));
                    pts2.push_back(lms.points[k]);
                }
        try
        {
            const Extrinsics pose = epnp_pose(pts3, pts2, intr);
            state.q0 = pose.rotation;
            state.t = pose.translation;
        }
        catch (const std::exception&)
        {
            // Frontal default: template centered on the optical axis.
            Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
            for (const auto& v : neutral.vertices) centroid += v;
            centroid /= neutral.vertex_count();
            state.q0 = Eigen::Quaterniond::Identity();
            state.t = -centroid + Eigen::Vector3d(0.0, 0.0, 2.5 * neutral.bounding_box_diagonal());
            result.used_frontal_fallback = true;
        }
    }

    const FitWorkspace ws = make_fit_workspace(neutral, basis);
    LandmarkSet current_lms = lms;
    Eigen::VectorXd beta_prev = state.beta;

    FitState best_state = state;
    double best_total = std::numeric_limits<double>::infinity();

    for (int outer = 0; outer < config.outer_iterations; ++outer)
    {
        current_lms = slide_contour_anchors(state.to_params(), neutral, basis, current_lms, intr);
        beta_prev = state.beta;

        double mu = config.damping_init;
        IterationDiagnostics diag;
        diag.outer_iteration = outer + 1;

        ResidualSystem sys = assemble_residuals(state, neutral, basis, current_lms, intr, config,
                                                beta_prev, ws, true);
        double energy = sys.total_energy();
        diag.total_at_start = energy;

        for (int inner = 0; inner < config.inner_iterations; ++inner)
        {
            const Eigen::SparseMatrix<double> H = (sys.J.transpose() * sys.J).pruned();
            const Eigen::VectorXd grad = sys.J.transpose() * sys.r;
            Eigen::VectorXd diag_h(H.rows());
            for (int i = 0; i < H.rows(); ++i) diag_h[i] = H.coeff(i, i);
            const double ridge = 1e-12 * std::max(1.0, diag_h.maxCoeff());

            bool accepted = false;
            for (int retry = 0; retry <= config.max_damping_retries; ++retry)
            {
                Eigen::SparseMatrix<double> Hd = H;
                for (int i = 0; i < H.rows(); ++i)
                    Hd.coeffRef(i, i) = diag_h[i] * (1.0 + mu) + ridge;
                Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hd);
                if (ldlt.info() == Eigen::Success)
                {
                    const Eigen::VectorXd step = ldlt.solve(-grad);
                    FitState trial = state;
                    trial.unpack(state.pack() + step);
                    if (trial.fs > 0.0)
                    {
                        ResidualSystem trial_sys = assemble_residuals(
                            trial, neutral, basis, current_lms, intr, config, beta_prev, ws, true);
                        const double trial_energy = trial_sys.total_energy();
                        if (trial_energy < energy)
                        {
                            const double drop = energy - trial_energy;
                            state = trial;
                            sys = std::move(trial_sys);
                            energy = trial_energy;
                            mu = std::max(mu / 10.0, 1e-15);
                            accepted = true;
                            ++diag.inner_steps;
                            if (drop < config.energy_tolerance * std::max(energy, 1.0) ||
                                step.norm() < config.step_tolerance)
                                inner = config.inner_iterations; // converged
                            break;
                        }
                    }
                }
                mu *= 10.0;
            }
            if (!accepted)
            {
                result.diverged = result.diverged || (diag.inner_steps == 0 && outer == 0);
                break;
            }
        }

        const FitParams params = state.to_params();
        diag.landmark = landmark_energy(params, neutral, basis, current_lms, intr);
        diag.corrective = corrective_energy(params, neutral, basis, ws, beta_prev, config.lambda_delta);
        diag.prior = prior_energy(params, basis, config, state.w);
        diag.total = total_energy(diag.landmark, diag.corrective, diag.prior, config);
        result.diagnostics.push_back(diag);

        if (energy < best_total)
        {
            best_total = energy;
            best_state = state;
        }
    }

    result.params = best_state.to_params();
    result.rotation_deviation = best_state.w;
    result.landmarks = current_lms;
    return result;
}

} // namespace facekit
