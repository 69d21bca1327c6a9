#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamina/field.hpp"
#include "lamina/field_io.hpp"
#include "lamina/hexer.hpp"
#include "lamina/isosurface.hpp"
#include "lamina/selector.hpp"
#include "lamina/singularity.hpp"
#include "lamina/splatter.hpp"
#include "lamina/surface_io.hpp"
#include "lamina/tracer.hpp"

namespace lamina {

struct PipelineConfig {
    // field source: either a .ffield path or a generator name
    std::string field_path;
    std::string generator;  // cylinder | helicoid | singularity2d
    Index3 gen_dims{64, 64, 64};
    double gen_spacing = 1.0;
    double gen_pitch = 0.05;
    int gen_axis = 2;
    int gen_index = 1;
    double gen_thickness = 0.5;

    double r = 2.0;
    double r_fine = 1.0;
    double gamma = 10.0;
    double epsilon = 0.2;
    double k_sigma = 3.0;
    double mask_dilation = -1.0;  // < 0: defaults to 2r
    double eps_void = 0.01;
    double eps_solid = 0.99;
    std::uint64_t rng_seed = 12345;
    int n_surfaces = -1;  // < 0: from cardinalities
    int layer_pin = -1;
    Index3 out_dims{0, 0, 0};  // 0: match the field grid
    double iso = 0.5;
    int threads = 1;
    std::string out_dir = "out";
    std::string output_mode = "splat";  // splat | hexmesh

    double dilation() const { return mask_dilation < 0.0 ? 2.0 * r : mask_dilation; }

    void validate() const {
        if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidParam, "gamma must be positive");
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw Error(ErrorCode::InvalidParam, "epsilon must be in (0,1)");
        if (!(r_fine < r))
            throw Error(ErrorCode::InvalidParam, "radius-fine must be smaller than radius");
        if (r > epsilon * gamma + 1e-12)
            throw Error(ErrorCode::InvalidParam,
                        "radius must not exceed epsilon*gamma (probe resolution)");
        if (output_mode != "splat" && output_mode != "hexmesh")
            throw Error(ErrorCode::InvalidParam, "output mode must be splat or hexmesh");
    }
};

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open config: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, std::string("bad config JSON: ") + e.what());
    }
    PipelineConfig c;
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("field", c.field_path);
    opt("generator", c.generator);
    if (j.contains("gen_dims")) {
        c.gen_dims = {j["gen_dims"][0].get<int>(), j["gen_dims"][1].get<int>(),
                      j["gen_dims"][2].get<int>()};
    }
    opt("gen_spacing", c.gen_spacing);
    opt("gen_pitch", c.gen_pitch);
    opt("gen_axis", c.gen_axis);
    opt("gen_index", c.gen_index);
    opt("gen_thickness", c.gen_thickness);
    opt("radius", c.r);
    opt("radius_fine", c.r_fine);
    opt("gamma", c.gamma);
    opt("epsilon", c.epsilon);
    opt("k_sigma", c.k_sigma);
    opt("mask_dilation", c.mask_dilation);
    opt("eps_void", c.eps_void);
    opt("eps_solid", c.eps_solid);
    opt("rng_seed", c.rng_seed);
    opt("n_surfaces", c.n_surfaces);
    opt("layer_pin", c.layer_pin);
    if (j.contains("out_dims")) {
        c.out_dims = {j["out_dims"][0].get<int>(), j["out_dims"][1].get<int>(),
                      j["out_dims"][2].get<int>()};
    }
    opt("iso", c.iso);
    opt("threads", c.threads);
    opt("out_dir", c.out_dir);
    opt("output_mode", c.output_mode);
    return c;
}

class StageTimer {
public:
    explicit StageTimer(bool verbose = true) : verbose_(verbose) {}

    template <typename F>
    auto run(const std::string& stage, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                finish(stage, t0);
            } else {
                auto result = f();
                finish(stage, t0);
                return result;
            }
        } catch (Error& e) {
            throw Error(e.code(), "[stage " + stage + "] " + e.what());
        }
    }

    double total_seconds() const { return total_; }
    const std::vector<std::pair<std::string, double>>& stages() const { return stages_; }

private:
    void finish(const std::string& stage, std::chrono::steady_clock::time_point t0) {
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        stages_.emplace_back(stage, dt);
        total_ += dt;
        if (verbose_) std::fprintf(stderr, "  %-14s %8.2f s\n", stage.c_str(), dt);
    }

    bool verbose_;
    double total_ = 0.0;
    std::vector<std::pair<std::string, double>> stages_;
};

inline FrameGrid make_field_from_config(const PipelineConfig& c) {
    if (!c.field_path.empty()) return load_field(c.field_path, c.eps_void, c.eps_solid);
    if (c.generator == "cylinder")
        return gen_cylinder_field(c.gen_dims, c.gen_axis, c.gen_spacing, c.gen_thickness);
    if (c.generator == "helicoid")
        return gen_helicoid_field(c.gen_dims, c.gen_pitch, c.gen_axis, c.gen_spacing,
                                  c.gen_thickness);
    if (c.generator == "singularity2d")
        return gen_embedded_singularity_field(
            c.gen_dims, c.gen_index, c.gen_spacing,
            {c.gen_thickness, c.gen_thickness, c.gen_thickness});
    throw Error(ErrorCode::UnknownGenerator,
                c.generator.empty() ? "no field source configured" : c.generator);
}

inline void print_classification_histogram(const FrameGrid& g) {
    std::size_t counts[3] = {0, 0, 0};
    for (std::size_t v = 0; v < g.spec().voxel_count(); ++v)
        ++counts[std::size_t(g.voxel_class(v))];
    std::fprintf(stderr, "field %dx%dx%d: void %zu, solid %zu, intermediate %zu\n",
                 g.spec().dims.x, g.spec().dims.y, g.spec().dims.z, counts[0], counts[1],
                 counts[2]);
}

struct SelectionReport {
    std::size_t n_s = 0;
    std::size_t n_p = 0;
    double relaxed_objective = 0.0;
    double binary_objective = 0.0;
    double fixed_fraction = 0.0;
    std::vector<int> selected_ids;
};

inline void save_selection_report(const SelectionReport& rep, const std::string& path) {
    nlohmann::json j = {
        {"n_S", rep.n_s},
        {"n_p", rep.n_p},
        {"relaxed_objective", rep.relaxed_objective},
        {"binary_objective", rep.binary_objective},
        {"fixed_fraction", rep.fixed_fraction},
        {"selected_ids", rep.selected_ids},
    };
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    os << j.dump(2) << "\n";
}

// Stage implementations shared by the CLI subcommands and cmd_pipeline. Every
// stage consumes and produces files only, so chaining the subcommands and
// running the whole pipeline are the same code path.

inline void cmd_gen_field(const PipelineConfig& c, const std::string& out_path) {
    const FrameGrid g = make_field_from_config(c);
    print_classification_histogram(g);
    save_field(g, out_path);
}

inline SurfaceManifest cmd_trace(const PipelineConfig& c, const std::string& field_path,
                                 const std::string& out_dir) {
    const FrameGrid g = load_field(field_path, c.eps_void, c.eps_solid);
    const SingularMask mask = compute_singular_mask(g, c.k_sigma, c.dilation());
    int n = c.n_surfaces;
    if (n < 0) {
        const GridSpec& spec = g.spec();
        const Cardinalities card = cardinalities({spec.dims.x * spec.spacing,
                                                  spec.dims.y * spec.spacing,
                                                  spec.dims.z * spec.spacing},
                                                 c.gamma, c.epsilon);
        n = int(card.n_s);
    }
    TracerParams params;
    params.eps_void = c.eps_void;
    std::vector<StreamSurface> surfaces =
        generate_surface_set(g, mask, n, c.r, c.rng_seed, params, c.layer_pin, c.threads);
    SurfaceManifest m;
    m.r = c.r;
    m.r_fine = c.r_fine;
    m.field_hash = field_hash(g);
    for (const StreamSurface& s : surfaces) m.surface_ids.push_back(s.id);
    save_surface_set(surfaces, m, out_dir);
    return m;
}

inline SelectionReport cmd_select(const PipelineConfig& c, const std::string& field_path,
                                  const std::string& surfaces_dir,
                                  const std::string& selected_dir,
                                  const std::string& report_path) {
    const FrameGrid g = load_field(field_path, c.eps_void, c.eps_solid);
    SurfaceManifest manifest;
    std::vector<StreamSurface> surfaces = load_surface_set(surfaces_dir, &manifest);
    const ProbeGrid probes = build_probe_grid(g, c.gamma, c.epsilon, c.rng_seed);
    const ActivationMatrix A = compute_activation(surfaces, probes, g, c.gamma, c.threads);
    if (A.n_rows() == 0)
        throw Error(ErrorCode::InsufficientDomain, "no probe is activated by any surface");
    const RelaxedSolution relaxed = solve_relaxed(A);
    SelectorParams sparams;
    sparams.threads = c.threads;
    const SelectionResult sel = finalize_binary(A, relaxed.w, sparams.tol_fix,
                                                sparams.free_budget);

    SelectionReport rep;
    rep.n_s = surfaces.size();
    rep.n_p = probes.positions.size();
    rep.relaxed_objective = relaxed.objective;
    rep.binary_objective = sel.objective;
    rep.fixed_fraction = surfaces.empty() ? 0.0 : double(sel.fixed_count) / surfaces.size();
    for (int idx : sel.selected) rep.selected_ids.push_back(surfaces[idx].id);
    save_selection_report(rep, report_path);

    std::vector<StreamSurface> chosen;
    for (int idx : sel.selected) chosen.push_back(surfaces[idx]);
    SurfaceManifest pruned = manifest;
    pruned.surface_ids = rep.selected_ids;
    save_surface_set(chosen, pruned, selected_dir);
    return rep;
}

inline std::vector<StreamSurface> supersample_set(const PipelineConfig& c, const FrameGrid& g,
                                                  const SingularMask& mask,
                                                  std::vector<StreamSurface> surfaces) {
    TracerParams params;
    params.eps_void = c.eps_void;
    for (StreamSurface& s : surfaces) {
        if (c.r_fine < s.r)
            s = supersample_surface(g, mask, s, c.r_fine,
                                    hash_combine(c.rng_seed, std::uint64_t(s.id) * 7919u), params);
    }
    return surfaces;
}

inline void cmd_splat(const PipelineConfig& c, const std::string& field_path,
                      const std::string& surfaces_dir, const std::string& out_volume,
                      const std::string& out_mesh) {
    const FrameGrid g = load_field(field_path, c.eps_void, c.eps_solid);
    const SingularMask mask = compute_singular_mask(g, c.k_sigma, c.dilation());
    std::vector<StreamSurface> surfaces = load_surface_set(surfaces_dir);
    surfaces = supersample_set(c, g, mask, std::move(surfaces));
    Index3 dims = c.out_dims.x > 0 ? c.out_dims : g.spec().dims;
    const GridSpec grid = make_output_grid(g.spec(), dims);
    VoxelVolume vol = splat_collection(surfaces, g, grid, c.gamma, c.r_fine, c.threads);
    vol = fill_solid_regions(vol, g);
    save_volume(vol, out_volume);
    const TriMesh mesh = extract_isosurface(vol, c.iso);
    save_obj(mesh, out_mesh);
    std::fprintf(stderr, "volume %dx%dx%d, mesh %zu vertices / %zu triangles\n", grid.dims.x,
                 grid.dims.y, grid.dims.z, mesh.vertices.size(), mesh.triangles.size());
}

inline QualityReport cmd_hexmesh(const PipelineConfig& c, const std::string& field_path,
                                 const std::string& surfaces_dir, const std::string& out_vtk,
                                 const std::string& out_medit, const std::string& out_report) {
    const FrameGrid g = load_field(field_path, c.eps_void, c.eps_solid);
    const SingularMask mask = compute_singular_mask(g, c.k_sigma, c.dilation());
    std::vector<StreamSurface> surfaces = load_surface_set(surfaces_dir);
    surfaces = supersample_set(c, g, mask, std::move(surfaces));
    const ProximityGraph graph = build_proximity_graph(surfaces, c.r_fine, /*strict=*/false);
    if (graph.dropped > 0)
        std::fprintf(stderr, "separation: dropped %zu vertices with 4+ nearby surfaces\n",
                     graph.dropped);
    const STCGraph stc = build_stc(graph);
    DualizeStats stats;
    const HexMesh mesh = dualize(stc, 4.0 * c.r_fine, /*strict=*/false, &stats);
    if (stats.face_conflicts > 0)
        std::fprintf(stderr, "dualize: %zu contested quad faces left unpaired\n",
                     stats.face_conflicts);
    save_vtk(mesh, out_vtk);
    save_medit(mesh, out_medit);
    const QualityReport rep = mesh_quality_report(mesh);
    save_quality_report(rep, out_report);
    std::fprintf(stderr, "hex mesh: %zu cells, scaled jacobian min %.3f mean %.3f\n",
                 rep.cell_count, rep.min_scaled_jacobian, rep.mean_scaled_jacobian);
    return rep;
}

// Full pipeline through the filesystem: field -> mask -> trace -> select ->
// supersample -> splat or hexmesh, with per-stage timings.
inline void cmd_pipeline(const PipelineConfig& c) {
    namespace fs = std::filesystem;
    c.validate();
    fs::create_directories(c.out_dir);
    const std::string field_path = (fs::path(c.out_dir) / "field.ffield").string();
    const std::string traced_dir = (fs::path(c.out_dir) / "surfaces").string();
    const std::string selected_dir = (fs::path(c.out_dir) / "selected").string();
    const std::string report_path = (fs::path(c.out_dir) / "selection.json").string();

    StageTimer timer;
    if (!c.field_path.empty())
        timer.run("field", [&] { fs::copy_file(c.field_path, field_path,
                                               fs::copy_options::overwrite_existing); });
    else
        timer.run("field", [&] { cmd_gen_field(c, field_path); });
    const SurfaceManifest traced =
        timer.run("trace", [&] { return cmd_trace(c, field_path, traced_dir); });
    std::fprintf(stderr, "  traced %zu surfaces\n", traced.surface_ids.size());
    const SelectionReport sel = timer.run("select", [&] {
        return cmd_select(c, field_path, traced_dir, selected_dir, report_path);
    });
    std::fprintf(stderr, "  selected %zu of %zu\n", sel.selected_ids.size(), sel.n_s);
    if (c.output_mode == "hexmesh") {
        timer.run("hexmesh", [&] {
            cmd_hexmesh(c, field_path, selected_dir, (fs::path(c.out_dir) / "mesh.vtk").string(),
                        (fs::path(c.out_dir) / "mesh.mesh").string(),
                        (fs::path(c.out_dir) / "quality.json").string());
        });
    } else {
        timer.run("splat", [&] {
            cmd_splat(c, field_path, selected_dir, (fs::path(c.out_dir) / "solid.vvol").string(),
                      (fs::path(c.out_dir) / "boundary.obj").string());
        });
    }
    std::fprintf(stderr, "pipeline total %.2f s\n", timer.total_seconds());
}

}  // namespace lamina
