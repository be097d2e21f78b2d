/*
 * facekit - mesh deformation and single-image head fitting toolkit.
 *
 * File: tools/facekit_cli.cpp
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
#include "facekit/dr.hpp"
#include "facekit/evaluate.hpp"
#include "facekit/mesh_io.hpp"
#include "facekit/sampling.hpp"
#include "facekit/solver.hpp"
#include "facekit/texture.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace facekit;

// Exit codes are a stable contract: 0 success, 1 numerical failure,
// 2 input/usage error.
constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitInput = 2;

struct GlobalOptions
{
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 1;
};

PipelineConfig resolve_config(const GlobalOptions& global)
{
    PipelineConfig cfg;
    if (!global.config_path.empty())
    {
        ConfigMap map = load_config(global.config_path);
        map.apply_env_overrides();
        cfg = make_pipeline_config(map);
    }
    if (global.seed_given) cfg.seed = global.seed;
    if (global.jobs > 1) cfg.jobs = global.jobs;
    return cfg;
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& what)
{
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        try
        {
            values.push_back(std::stod(item));
        }
        catch (const std::exception&)
        {
            throw input_error("bad " + what + " list entry: " + item);
        }
    }
    if (values.empty()) throw input_error("empty " + what + " list");
    return values;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what)
{
    std::vector<int> values;
    for (double v : parse_double_list(csv, what)) values.push_back(static_cast<int>(v));
    return values;
}

GroupTag parse_group(const std::string& name)
{
    const auto sep = name.find('_');
    if (sep == std::string::npos)
        throw input_error("group must look like '<ethnicity>_<gender>', got: " + name);
    return GroupTag{name.substr(sep + 1), name.substr(0, sep)};
}

// ---------------------------------------------------------------------------

int cmd_encode(const std::string& reference_path, const std::string& deformed_path,
               const std::string& output_path, bool verify)
{
    const Mesh reference = load_mesh(reference_path);
    const Mesh deformed = load_mesh(deformed_path);
    DRFeature feature = encode_dr(deformed, reference);
    feature.reference_id = std::filesystem::path(reference_path).filename().string();
    save_dr(feature, output_path);
    std::cout << "encoded " << feature.vertex_count() << " vertices -> " << output_path << "\n";
    if (verify)
    {
        const Mesh decoded = decode_dr(feature, reference, 0, deformed.vertices[0]);
        double max_err = 0.0;
        for (int i = 0; i < deformed.vertex_count(); ++i)
            max_err = std::max(max_err, (decoded.vertices[i] - deformed.vertices[i]).norm());
        std::cout << "round-trip max vertex error: "
                  << format_float(max_err / deformed.bounding_box_diagonal())
                  << " (relative to bbox diagonal)\n";
    }
    return kExitOk;
}

int cmd_decode(const std::string& reference_path, const std::string& feature_path,
               const std::string& output_path, const std::string& expected_path)
{
    const Mesh reference = load_mesh(reference_path);
    const DRFeature feature = load_dr(feature_path);
    Eigen::Vector3d anchor = reference.vertices.empty() ? Eigen::Vector3d::Zero()
                                                        : reference.vertices[0];
    Mesh expected;
    if (!expected_path.empty())
    {
        expected = load_mesh(expected_path);
        anchor = expected.vertices[0];
    }
    const Mesh decoded = decode_dr(feature, reference, 0, anchor);
    save_mesh(decoded, output_path);
    std::cout << "decoded " << decoded.vertex_count() << " vertices -> " << output_path << "\n";
    if (!expected_path.empty())
    {
        double max_err = 0.0;
        for (int i = 0; i < expected.vertex_count(); ++i)
            max_err = std::max(max_err, (decoded.vertices[i] - expected.vertices[i]).norm());
        std::cout << "round-trip max vertex error: "
                  << format_float(max_err / expected.bounding_box_diagonal())
                  << " (relative to bbox diagonal)\n";
    }
    return kExitOk;
}

int cmd_sample(const PipelineConfig& cfg, const std::string& manifest_path,
               const std::string& group_name, int count, int m, const std::string& ratios_csv,
               const std::string& output_dir)
{
    const ShapeDataset dataset = load_dataset(manifest_path);
    std::filesystem::create_directories(output_dir);

    // Resolve the per-sample group list up front so the log is complete even
    // for --count 0.
    std::vector<GroupTag> plan;
    if (!ratios_csv.empty())
    {
        const std::vector<double> ratios = parse_double_list(ratios_csv, "ratios");
        if (ratios.size() != 3)
            throw input_error("--ratios expects three values (asian,caucasian,black)");
        const std::string gender = group_name.empty() ? "male" : parse_group(group_name).gender;
        static const char* ethnicities[3] = {"asian", "caucasian", "black"};
        int assigned = 0;
        for (int e = 0; e < 3; ++e)
        {
            const int n = e == 2 ? count - assigned
                                 : static_cast<int>(std::lround(ratios[e] * count));
            for (int i = 0; i < n && assigned < count; ++i, ++assigned)
                plan.push_back(GroupTag{gender, ethnicities[e]});
        }
    }
    else
    {
        if (group_name.empty()) throw input_error("either --group or --ratios is required");
        plan.assign(count, parse_group(group_name));
    }

    std::ofstream log(output_dir + "/sampling.log");
    if (!log) throw input_error("cannot write sampling log");
    log << "# facekit sampling log v1\n";
    log << "seed = " << cfg.seed << "\n";
    log << "m = " << m << "\n";
    std::map<std::string, int> group_counts;
    for (std::size_t i = 0; i < plan.size(); ++i)
    {
        Rng rng(derive_seed(cfg.seed, i));
        const SampledFace face = sample_face(dataset, plan[i], m, rng);
        std::ostringstream name;
        name << "sample_" << std::setw(5) << std::setfill('0') << i << ".obj";
        save_mesh(face.mesh, output_dir + "/" + name.str());
        log << "sample " << i << " group " << plan[i].str() << " members";
        for (int member : face.member_indices) log << ' ' << member;
        log << " weights";
        for (int k = 0; k < face.weights.size(); ++k) log << ' ' << format_float(face.weights[k]);
        log << " texture " << (face.texture_id.empty() ? "-" : face.texture_id) << " file "
            << name.str() << "\n";
        ++group_counts[plan[i].str()];
    }
    for (const auto& [group, n] : group_counts) log << "group_count " << group << " " << n << "\n";
    std::cout << "wrote " << plan.size() << " samples to " << output_dir << "\n";
    return kExitOk;
}

int cmd_fit(const PipelineConfig& cfg, int width, int height, const std::string& landmarks_path,
            const std::string& template_path, const std::string& anchors_path,
            const std::string& basis_path, const std::string& out_params,
            const std::string& out_mesh, const std::string& out_diag)
{
    const Mesh neutral = load_mesh(template_path);
    const BlendshapeBasis basis = load_blendshapes(basis_path);
    const LandmarkSet lms = build_landmark_set(load_landmark_points(landmarks_path), anchors_path);
    const Intrinsics intr = init_intrinsics(width, height, cfg.swap_principal_point);

    const FitResult result = fit(neutral, lms, basis, intr, cfg.solver);

    save_fit_params(result.params, intr, out_params);
    save_mesh(result.params.reconstruct(neutral, basis), out_mesh);
    std::ofstream diag(out_diag);
    if (!diag) throw input_error("cannot write diagnostics log: " + out_diag);
    diag << "# facekit fit diagnostics v1\n";
    if (result.used_frontal_fallback) diag << "warning = frontal fallback (EPnP degenerate)\n";
    if (result.diverged) diag << "warning = damping retries exhausted, best-so-far returned\n";
    diag << "# iter E_l E_c E_r E E_start inner_steps\n";
    for (const auto& it : result.diagnostics)
        diag << it.outer_iteration << ' ' << format_float(it.landmark) << ' '
             << format_float(it.corrective) << ' ' << format_float(it.prior) << ' '
             << format_float(it.total) << ' ' << format_float(it.total_at_start) << ' '
             << it.inner_steps << '\n';
    std::cout << "fit finished: final E = "
              << format_float(result.diagnostics.empty() ? 0.0
                                                         : result.diagnostics.back().total)
              << "\n";
    return result.diverged ? kExitNumeric : kExitOk;
}

int cmd_texture(const PipelineConfig& cfg, const std::string& mesh_path,
                const std::string& params_path, const std::string& image_path,
                const std::string& background_path, const std::string& out_texture,
                const std::string& out_mask, int resolution)
{
    const Mesh posed = load_mesh(mesh_path);
    Intrinsics intr;
    const FitParams params = load_fit_params(params_path, intr);
    Image source = load_image(image_path);
    const int res = resolution > 0 ? resolution : cfg.uv_resolution;

    UVTexture background(res, source.maxval);
    const Image bg_image = load_image(background_path);
    if (bg_image.width != res || bg_image.height != res || bg_image.channels != 3)
        throw input_error("background texture must be RGB at the working resolution");
    background.pixels = bg_image;

    const ProjectionContext ctx =
        make_projection_context(posed, params.extrinsics, intr, std::move(source));
    const UVTexture projected = project_texture(ctx, res);
    const UVTexture blended = poisson_blend(projected, background);

    save_image(blended.pixels, out_texture);
    if (!out_mask.empty()) save_image(mask_to_image(blended), out_mask);
    std::cout << "wrote blended texture -> " << out_texture << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& gt_path, const std::string& pred_path,
             const std::string& gt_indices_csv, const std::string& pred_indices_csv,
             const std::string& d_csv, bool allow_scale, bool center_mean,
             const std::string& report_path, const std::string& heatmap_path, double tolerance)
{
    const Mesh gt = load_mesh(gt_path);
    Mesh pred = load_mesh(pred_path);

    const std::vector<int> gt_idx = parse_int_list(gt_indices_csv, "landmark index");
    const std::vector<int> pred_idx =
        pred_indices_csv.empty() ? gt_idx : parse_int_list(pred_indices_csv, "landmark index");
    if (gt_idx.size() != 7 || pred_idx.size() != 7)
        throw input_error("exactly 7 alignment landmark indices are required");
    std::vector<Eigen::Vector3d> src, dst;
    for (int i : pred_idx)
    {
        if (i < 0 || i >= pred.vertex_count()) throw input_error("pred landmark index out of range");
        src.push_back(pred.vertices[i]);
    }
    for (int i : gt_idx)
    {
        if (i < 0 || i >= gt.vertex_count()) throw input_error("gt landmark index out of range");
        dst.push_back(gt.vertices[i]);
    }

    AlignmentResult align = procrustes_align(src, dst, allow_scale);
    align = icp_refine(pred, gt, align);
    for (auto& v : pred.vertices) v = align.apply(v);

    // crop center: the gt nose tip label when present, else the 7-landmark mean
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    const auto nose = gt.labels.find("nose_tip");
    if (!center_mean && nose != gt.labels.end() && !nose->second.empty())
        center = gt.vertices[nose->second.front()];
    else
    {
        for (const auto& p : dst) center += p;
        center /= 7.0;
    }

    std::vector<double> radii{std::numeric_limits<double>::infinity()};
    if (!d_csv.empty()) radii = parse_double_list(d_csv, "crop radius");

    std::vector<ErrorReport> rows;
    const std::string model_id = std::filesystem::path(pred_path).stem().string();
    for (double d : radii)
    {
        const Mesh gt_crop = crop_by_radius(gt, center, d);
        const Mesh pred_crop = crop_by_radius(pred, center, d);
        ErrorReport row;
        row.model_id = model_id;
        row.d = d;
        row.armse_mm = armse(gt_crop, pred_crop);
        row.kept_gt = gt_crop.vertex_count();
        row.discarded_gt = gt.vertex_count() - gt_crop.vertex_count();
        row.kept_pred = pred_crop.vertex_count();
        row.discarded_pred = pred.vertex_count() - pred_crop.vertex_count();
        rows.push_back(row);
        std::cout << model_id << " d=" << format_float(d)
                  << " armse=" << format_float(row.armse_mm) << " mm\n";
    }
    if (!report_path.empty()) write_report(rows, report_path);
    if (!heatmap_path.empty()) heatmap_export(gt, pred, tolerance, heatmap_path);
    return kExitOk;
}

int cmd_heatmap(const std::string& gt_path, const std::string& pred_path, double tolerance,
                const std::string& output_path)
{
    heatmap_export(load_mesh(gt_path), load_mesh(pred_path), tolerance, output_path);
    std::cout << "wrote heatmap -> " << output_path << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"facekit - mesh deformation and single-image head fitting toolkit"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--config", global.config_path, "pipeline config file");
    app.add_option("--seed", global.seed, "master RNG seed")
        ->each([&](const std::string&) { global.seed_given = true; });
    app.add_option("--jobs", global.jobs, "parallel jobs across independent inputs");

    // encode-dr
    auto* encode = app.add_subcommand("encode-dr", "encode a mesh into a DR feature");
    std::string enc_ref, enc_def, enc_out;
    bool enc_verify = false;
    encode->add_option("--reference", enc_ref, "reference mesh")->required();
    encode->add_option("--deformed", enc_def, "deformed mesh")->required();
    encode->add_option("--output", enc_out, "output feature file")->required();
    encode->add_flag("--verify", enc_verify, "decode back and print the round-trip error");

    // decode-dr
    auto* decode = app.add_subcommand("decode-dr", "reconstruct a mesh from a DR feature");
    std::string dec_ref, dec_feat, dec_out, dec_expected;
    decode->add_option("--reference", dec_ref, "reference mesh")->required();
    decode->add_option("--feature", dec_feat, "DR feature file")->required();
    decode->add_option("--output", dec_out, "output mesh file")->required();
    decode->add_option("--expected", dec_expected,
                       "original mesh; anchors the decode and prints the round-trip error");

    // sample
    auto* sample = app.add_subcommand("sample", "generate augmented face shapes");
    std::string smp_manifest, smp_group, smp_ratios, smp_outdir = ".";
    int smp_count = 1, smp_m = 5;
    sample->add_option("--manifest", smp_manifest, "dataset manifest")->required();
    sample->add_option("--group", smp_group, "group tag, e.g. asian_male");
    sample->add_option("--count", smp_count, "number of samples")->required();
    sample->add_option("--m", smp_m, "features mixed per sample");
    sample->add_option("--ratios", smp_ratios, "ethnicity ratios asian,caucasian,black");
    sample->add_option("--output-dir", smp_outdir, "output directory");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit the template to 2D landmarks");
    std::string fit_landmarks, fit_template, fit_anchors, fit_basis;
    std::string fit_out_params = "fit_params.txt", fit_out_mesh = "fit_mesh.obj",
                fit_out_diag = "fit_diagnostics.log";
    int fit_width = 0, fit_height = 0;
    fit_cmd->add_option("--image-width", fit_width, "source image width")->required();
    fit_cmd->add_option("--image-height", fit_height, "source image height")->required();
    fit_cmd->add_option("--landmarks", fit_landmarks, "detected landmark file")->required();
    fit_cmd->add_option("--template", fit_template, "neutral template mesh")->required();
    fit_cmd->add_option("--anchors", fit_anchors, "landmark anchor table")->required();
    fit_cmd->add_option("--basis", fit_basis, "blendshape basis file")->required();
    fit_cmd->add_option("--output-params", fit_out_params, "fitted parameter file");
    fit_cmd->add_option("--output-mesh", fit_out_mesh, "posed mesh file");
    fit_cmd->add_option("--diagnostics", fit_out_diag, "per-iteration energy log");

    // texture
    auto* texture = app.add_subcommand("texture", "project and blend the UV texture");
    std::string tex_mesh, tex_params, tex_image, tex_background, tex_out, tex_mask;
    int tex_resolution = 0;
    texture->add_option("--mesh", tex_mesh, "posed mesh with UV coordinates")->required();
    texture->add_option("--params", tex_params, "fitted parameter file")->required();
    texture->add_option("--image", tex_image, "source photograph (PPM)")->required();
    texture->add_option("--background", tex_background, "background UV texture (PPM)")->required();
    texture->add_option("--output", tex_out, "blended texture output")->required();
    texture->add_option("--output-mask", tex_mask, "texel mask output (PGM)");
    texture->add_option("--resolution", tex_resolution, "UV resolution (default from config)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a reconstruction against ground truth");
    std::string ev_gt, ev_pred, ev_gt_idx, ev_pred_idx, ev_d, ev_report, ev_heatmap;
    bool ev_allow_scale = false, ev_center_mean = false;
    double ev_tolerance = kHeatmapToleranceMm;
    eval_cmd->add_option("--gt", ev_gt, "ground-truth mesh")->required();
    eval_cmd->add_option("--pred", ev_pred, "predicted mesh")->required();
    eval_cmd->add_option("--landmarks", ev_gt_idx, "7 gt alignment vertex indices")->required();
    eval_cmd->add_option("--pred-landmarks", ev_pred_idx,
                         "7 pred alignment vertex indices (default: same as --landmarks)");
    eval_cmd->add_option("--d", ev_d, "crop radii in mm, comma separated");
    eval_cmd->add_flag("--allow-scale", ev_allow_scale, "estimate a uniform scale too");
    eval_cmd->add_flag("--center-mean", ev_center_mean,
                       "crop around the 7-landmark mean instead of the nose tip");
    eval_cmd->add_option("--report", ev_report, "report file");
    eval_cmd->add_option("--heatmap", ev_heatmap, "per-vertex error heatmap mesh");
    eval_cmd->add_option("--tolerance", ev_tolerance, "heatmap red threshold, mm");

    // heatmap
    auto* heatmap = app.add_subcommand("heatmap", "per-vertex error heatmap of aligned meshes");
    std::string hm_gt, hm_pred, hm_out;
    double hm_tolerance = kHeatmapToleranceMm;
    heatmap->add_option("--gt", hm_gt, "ground-truth mesh")->required();
    heatmap->add_option("--pred", hm_pred, "predicted mesh")->required();
    heatmap->add_option("--output", hm_out, "colored mesh output")->required();
    heatmap->add_option("--tolerance", hm_tolerance, "red threshold, mm");

    try
    {
        app.parse(argc, argv);
        const PipelineConfig cfg = resolve_config(global);
        if (*encode) return cmd_encode(enc_ref, enc_def, enc_out, enc_verify);
        if (*decode) return cmd_decode(dec_ref, dec_feat, dec_out, dec_expected);
        if (*sample)
            return cmd_sample(cfg, smp_manifest, smp_group, smp_count, smp_m, smp_ratios,
                              smp_outdir);
        if (*fit_cmd)
            return cmd_fit(cfg, fit_width, fit_height, fit_landmarks, fit_template, fit_anchors,
                           fit_basis, fit_out_params, fit_out_mesh, fit_out_diag);
        if (*texture)
            return cmd_texture(cfg, tex_mesh, tex_params, tex_image, tex_background, tex_out,
                               tex_mask, tex_resolution);
        if (*eval_cmd)
            return cmd_eval(ev_gt, ev_pred, ev_gt_idx, ev_pred_idx, ev_d, ev_allow_scale,
                            ev_center_mean, ev_report, ev_heatmap, ev_tolerance);
        if (*heatmap) return cmd_heatmap(hm_gt, hm_pred, hm_tolerance, hm_out);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }
    catch (const input_error& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    catch (const numeric_error& e)
    {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumeric;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
