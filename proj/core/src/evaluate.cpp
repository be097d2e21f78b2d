/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: core/src/evaluate.cpp
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
#include "facekit/evaluate.hpp"

#include "facekit/mesh_io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace facekit {

AlignmentResult procrustes_align(const std::vector<Eigen::Vector3d>& src,
                                 const std::vector<Eigen::Vector3d>& dst, bool allow_scale)
{
    if (src.size() != dst.size() || src.size() < 3)
        throw input_error("procrustes_align needs >= 3 matched point pairs");
    const int n = static_cast<int>(src.size());

    Eigen::Vector3d src_mean = Eigen::Vector3d::Zero(), dst_mean = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i)
    {
        src_mean += src[i];
        dst_mean += dst[i];
    }
    src_mean /= n;
    dst_mean /= n;

    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
    double src_var = 0.0;
    for (int i = 0; i < n; ++i)
    {
        cross += (dst[i] - dst_mean) * (src[i] - src_mean).transpose();
        src_var += (src[i] - src_mean).squaredNorm();
    }
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // collinear points leave the cross-covariance rank-deficient below rank 2
    const Eigen::Vector3d sv = svd.singularValues();
    if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
        throw numeric_error("degenerate (collinear) correspondences in procrustes_align");

    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2) = -1.0;
    AlignmentResult result;
    result.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    if (allow_scale)
    {
        if (src_var <= 0.0) throw numeric_error("zero-variance source points with allow_scale");
        result.scale = (sv.array() * d.array()).sum() / src_var;
    }
    result.translation = dst_mean - result.scale * (result.rotation * src_mean);

    double pre = 0.0, post = 0.0;
    for (int i = 0; i < n; ++i)
    {
        pre += (dst[i] - src[i]).squaredNorm();
        post += (dst[i] - result.apply(src[i])).squaredNorm();
    }
    result.pre_rmse = std::sqrt(pre / n);
    result.post_rmse = std::sqrt(post / n);
    return result;
}

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c)
{
    const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

    const double denom = va + vb + vc;
    return a + (vb / denom) * ab + (vc / denom) * ac;
}

namespace {

constexpr int kBvhLeafSize = 4;

double aabb_distance_sq(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                        const Eigen::Vector3d& p)
{
    double d = 0.0;
    for (int k = 0; k < 3; ++k)
    {
        const double v = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
        d += v * v;
    }
    return d;
}

} // namespace

Bvh::Bvh(const Mesh& mesh)
{
    if (mesh.face_count() == 0) throw input_error("cannot build a BVH over an empty mesh");
    triangles_.reserve(mesh.faces.size());
    std::vector<Eigen::Vector3d> centroids;
    centroids.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces)
    {
        triangles_.push_back({mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]});
        centroids.push_back((mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0);
    }
    order_.resize(triangles_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * triangles_.size());
    build(centroids, 0, static_cast<int>(order_.size()));
}

int Bvh::build(std::vector<Eigen::Vector3d>& centroids, int begin, int end)
{
    const int node_index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (int i = begin; i < end; ++i)
        for (const auto& corner : triangles_[order_[i]])
        {
            lo = lo.cwiseMin(corner);
            hi = hi.cwiseMax(corner);
        }
    nodes_[node_index].lo = lo;
    nodes_[node_index].hi = hi;

    if (end - begin <= kBvhLeafSize)
    {
        nodes_[node_index].begin = begin;
        nodes_[node_index].end = end;
        return node_index;
    }

    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int x, int y) { return centroids[x][axis] < centroids[y][axis]; });
    const int left = build(centroids, begin, mid);
    const int right = build(centroids, mid, end);
    nodes_[node_index].left = left;
    nodes_[node_index].right = right;
    return node_index;
}

double Bvh::distance(const Eigen::Vector3d& point, Eigen::Vector3d* closest) const
{
    double best_sq = std::numeric_limits<double>::infinity();
    Eigen::Vector3d best_point = Eigen::Vector3d::Zero();

    // explicit stack; children visited nearer-box-first so pruning is tight
    std::vector<int> stack{0};
    while (!stack.empty())
    {
        const int ni = stack.back();
        stack.pop_back();
        const Node& node = nodes_[ni];
        if (aabb_distance_sq(node.lo, node.hi, point) >= best_sq) continue;
        if (node.left < 0)
        {
            for (int i = node.begin; i < node.end; ++i)
            {
                const auto& tri = triangles_[order_[i]];
                const Eigen::Vector3d q = closest_point_on_triangle(point, tri[0], tri[1], tri[2]);
                const double d = (q - point).squaredNorm();
                if (d < best_sq)
                {
                    best_sq = d;
                    best_point = q;
                }
            }
            continue;
        }
        const double dl = aabb_distance_sq(nodes_[node.left].lo, nodes_[node.left].hi, point);
        const double dr = aabb_distance_sq(nodes_[node.right].lo, nodes_[node.right].hi, point);
        if (dl < dr)
        {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
        else
        {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    if (closest) *closest = best_point;
    return std::sqrt(best_sq);
}

double point_to_mesh_distance(const Eigen::Vector3d& point, const Bvh& bvh)
{
    return bvh.distance(point);
}

namespace {

/**
 * Nearest-vertex k-d tree for ICP correspondences. ICP matches points to
 * points: correspondences that slide along the closest surface point leave
 * the tangential error unconstrained and stall the rotation estimate on
 * smooth shapes, so the surface BVH is only used for distance metrics.
 */
class PointKdTree
{
public:
    explicit PointKdTree(const std::vector<Eigen::Vector3d>& points) : points_(points)
    {
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(2 * points.size());
        build(0, static_cast<int>(points.size()));
    }

    double nearest(const Eigen::Vector3d& query, Eigen::Vector3d* closest) const
    {
        double best_sq = std::numeric_limits<double>::infinity();
        Eigen::Vector3d best = Eigen::Vector3d::Zero();
        std::vector<int> stack{0};
        while (!stack.empty())
        {
            const int ni = stack.back();
            stack.pop_back();
            const Node& node = nodes_[ni];
            if (aabb_distance_sq(node.lo, node.hi, query) >= best_sq) continue;
            if (node.left < 0)
            {
                for (int i = node.begin; i < node.end; ++i)
                {
                    const double d = (points_[order_[i]] - query).squaredNorm();
                    if (d < best_sq)
                    {
                        best_sq = d;
                        best = points_[order_[i]];
                    }
                }
                continue;
            }
            const double dl = aabb_distance_sq(nodes_[node.left].lo, nodes_[node.left].hi, query);
            const double dr = aabb_distance_sq(nodes_[node.right].lo, nodes_[node.right].hi, query);
            stack.push_back(dl < dr ? node.right : node.left);
            stack.push_back(dl < dr ? node.left : node.right);
        }
        if (closest) *closest = best;
        return std::sqrt(best_sq);
    }

private:
    struct Node
    {
        Eigen::Vector3d lo, hi;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };

    int build(int begin, int end)
    {
        const int node_index = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
        Eigen::Vector3d hi = -lo;
        for (int i = begin; i < end; ++i)
        {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        nodes_[node_index].lo = lo;
        nodes_[node_index].hi = hi;
        if (end - begin <= kBvhLeafSize)
        {
            nodes_[node_index].begin = begin;
            nodes_[node_index].end = end;
            return node_index;
        }
        int axis;
        (hi - lo).maxCoeff(&axis);
        const int mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int x, int y) { return points_[x][axis] < points_[y][axis]; });
        nodes_[node_index].left = build(begin, mid);
        nodes_[node_index].right = build(mid, end);
        return node_index;
    }

    const std::vector<Eigen::Vector3d>& points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

} // namespace

AlignmentResult icp_refine(const Mesh& src, const Mesh& dst, const AlignmentResult& init,
                           int max_iterations, double tol, std::vector<double>* rmse_history)
{
    const PointKdTree tree(dst.vertices);
    AlignmentResult current = init;
    AlignmentResult best = init;
    double best_rmse = std::numeric_limits<double>::infinity();
    double prev_rmse = std::numeric_limits<double>::infinity();
    const int n = src.vertex_count();
    if (n == 0) throw input_error("empty source mesh in icp_refine");

    for (int iter = 0; iter < max_iterations; ++iter)
    {
        std::vector<Eigen::Vector3d> moved(n), matched(n);
        std::vector<double> dist(n);
        for (int i = 0; i < n; ++i)
        {
            moved[i] = current.apply(src.vertices[i]);
            dist[i] = tree.nearest(moved[i], &matched[i]);
        }

        std::vector<int> kept(n);
        std::iota(kept.begin(), kept.end(), 0);
        if (iter >= kIcpTrimStart && n > 20)
        {
            const int keep = n - static_cast<int>(std::floor(kIcpTrimFraction * n));
            std::nth_element(kept.begin(), kept.begin() + keep - 1, kept.end(),
                             [&](int a, int b) { return dist[a] < dist[b]; });
            kept.resize(keep);
        }

        double sq = 0.0;
        for (int i : kept) sq += dist[i] * dist[i];
        const double rmse = std::sqrt(sq / kept.size());
        if (rmse_history) rmse_history->push_back(rmse);
        if (rmse < best_rmse)
        {
            best_rmse = rmse;
            best = current;
            best.post_rmse = rmse;
        }
        if (prev_rmse - rmse < tol) break;
        prev_rmse = rmse;

        // Procrustes update on the (possibly trimmed) correspondences; it is
        // composed onto the current transform since `moved` is already aligned.
        std::vector<Eigen::Vector3d> s, t;
        s.reserve(kept.size());
        t.reserve(kept.size());
        for (int i : kept)
        {
            s.push_back(moved[i]);
            t.push_back(matched[i]);
        }
        AlignmentResult step;
        try
        {
            step = procrustes_align(s, t, false);
        }
        catch (const numeric_error&)
        {
            break; // degenerate correspondences; keep the best found
        }
        AlignmentResult next;
        next.rotation = step.rotation * current.rotation;
        next.scale = current.scale;
        next.translation = step.rotation * current.translation + step.translation;
        current = next;
    }
    return best;
}

Mesh crop_by_radius(const Mesh& mesh, const Eigen::Vector3d& center, double d)
{
    if (!(d > 0.0)) throw input_error("crop radius must be positive");
    Mesh out;
    std::vector<int> remap(mesh.vertex_count(), -1);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        if ((mesh.vertices[i] - center).norm() <= d)
        {
            remap[i] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(mesh.vertices[i]);
            if (mesh.has_uv()) out.uv.push_back(mesh.uv[i]);
        }
    if (out.vertices.empty()) throw input_error("crop radius leaves no vertices");
    for (const auto& f : mesh.faces)
        if (remap[f[0]] >= 0 && remap[f[1]] >= 0 && remap[f[2]] >= 0)
            out.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
    for (const auto& [name, indices] : mesh.labels)
    {
        std::vector<int> mapped;
        for (int i : indices)
            if (remap[i] >= 0) mapped.push_back(remap[i]);
        if (!mapped.empty()) out.labels[name] = std::move(mapped);
    }
    return out;
}

namespace {

double directed_rmse(const Mesh& from, const Bvh& to)
{
    double sq = 0.0;
    for (const auto& v : from.vertices)
    {
        const double d = to.distance(v);
        sq += d * d;
    }
    return std::sqrt(sq / from.vertex_count());
}

} // namespace

double armse(const Mesh& gt, const Mesh& pred)
{
    if (gt.vertex_count() == 0 || pred.vertex_count() == 0)
        throw input_error("armse on an empty mesh");
    const Bvh gt_bvh(gt), pred_bvh(pred);
    return 0.5 * (directed_rmse(gt, pred_bvh) + directed_rmse(pred, gt_bvh));
}

std::vector<double> vertex_distances(const Mesh& gt, const Mesh& pred)
{
    const Bvh bvh(pred);
    std::vector<double> out(gt.vertex_count());
    for (int i = 0; i < gt.vertex_count(); ++i) out[i] = bvh.distance(gt.vertices[i]);
    return out;
}

Eigen::Vector3d heatmap_color(double distance_mm, double tolerance_mm)
{
    const double t = std::clamp(distance_mm / tolerance_mm, 0.0, 1.0);
    return {t, 0.0, 1.0 - t};
}

void heatmap_export(const Mesh& gt, const Mesh& pred, double tolerance_mm, const std::string& path)
{
    const std::vector<double> dist = vertex_distances(gt, pred);
    std::vector<Eigen::Vector3d> colors(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i)
        colors[i] = heatmap_color(dist[i], tolerance_mm);
    save_colored_mesh(gt, colors, path);
}

void write_report(const std::vector<ErrorReport>& rows, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw input_error("cannot write report file: " + path);
    out << "# facekit evaluation report v1\n";
    out << "# model_id d armse_mm kept_gt discarded_gt kept_pred discarded_pred\n";
    std::map<double, std::vector<double>> by_radius;
    for (const auto& row : rows)
    {
        out << row.model_id << ' ' << format_float(row.d) << ' ' << format_float(row.armse_mm)
            << ' ' << row.kept_gt << ' ' << row.discarded_gt << ' ' << row.kept_pred << ' '
            << row.discarded_pred << '\n';
        by_radius[row.d].push_back(row.armse_mm);
    }
    for (const auto& [d, values] : by_radius)
    {
        const double n = static_cast<double>(values.size());
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        const double se = n > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
        out << "aggregate " << format_float(d) << " mean " << format_float(mean) << " ci95 "
            << format_float(1.96 * se) << " n " << values.size() << '\n';
    }
    if (!out) throw input_error("short write on report file: " + path);
}

} // namespace facekit
