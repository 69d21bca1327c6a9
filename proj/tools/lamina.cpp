#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "lamina/pipeline.hpp"

namespace {

// exit codes: 0 success, 1 usage, 2 data error, 3 solver error
int exit_code_for(lamina::ErrorCode code) {
    switch (code) {
        case lamina::ErrorCode::UnknownGenerator:
        case lamina::ErrorCode::InvalidParam:
        case lamina::ErrorCode::InvalidRange:
            return 1;
        case lamina::ErrorCode::SolverFailure:
        case lamina::ErrorCode::TooManyFreeVariables:
            return 3;
        default:
            return 2;
    }
}

struct DimsOption {
    std::string text;
    lamina::Index3 parse(lamina::Index3 fallback) const {
        if (text.empty()) return fallback;
        lamina::Index3 d;
        if (std::sscanf(text.c_str(), "%d,%d,%d", &d.x, &d.y, &d.z) != 3)
            throw lamina::Error(lamina::ErrorCode::InvalidParam,
                                "dims must be nx,ny,nz: " + text);
        return d;
    }
};

}  // namespace

int main(int argc, char** argv) {
    using namespace lamina;
    CLI::App app{"frame-field aligned multi-laminar structure pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    PipelineConfig cfg;
    DimsOption gen_dims, out_dims;

    app.add_option("--config", config_path, "JSON config file; flags override its values");

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--gamma", cfg.gamma, "desired member spacing (world units)");
        cmd->add_option("--epsilon", cfg.epsilon, "placement error fraction in (0,1)");
        cmd->add_option("--radius", cfg.r, "Poisson-disk radius for tracing");
        cmd->add_option("--radius-fine", cfg.r_fine, "super-sampling radius");
        cmd->add_option("--k-sigma", cfg.k_sigma, "singularity spike threshold (stddevs)");
        cmd->add_option("--seed", cfg.rng_seed, "RNG seed");
        cmd->add_option("--threads", cfg.threads, "worker threads");
        cmd->add_option("--out-dims", out_dims.text, "output volume dims nx,ny,nz");
        cmd->add_option("--iso", cfg.iso, "iso value for boundary extraction");
        cmd->add_option("--eps-void", cfg.eps_void, "void thickness threshold");
        cmd->add_option("--eps-solid", cfg.eps_solid, "solid thickness threshold");
        cmd->add_option("--mask-dilation", cfg.mask_dilation,
                        "singular mask dilation radius (default 2*radius)");
        cmd->add_option("--n-surfaces", cfg.n_surfaces,
                        "candidate surface count (default from gamma/epsilon)");
        cmd->add_option("--layer", cfg.layer_pin, "pin the traced layer index 0..2");
    };

    // gen-field
    auto* gen = app.add_subcommand("gen-field", "generate a closed-form frame field");
    std::string gen_name, gen_out = "field.ffield";
    gen->add_option("generator", gen_name, "cylinder | helicoid | singularity2d")->required();
    gen->add_option("--dims", gen_dims.text, "grid dims nx,ny,nz");
    gen->add_option("--spacing", cfg.gen_spacing, "voxel spacing");
    gen->add_option("--pitch", cfg.gen_pitch, "helicoid pitch");
    gen->add_option("--axis", cfg.gen_axis, "cylinder/helicoid axis 0..2");
    gen->add_option("--index", cfg.gen_index, "singularity index +1/-1");
    gen->add_option("--thickness", cfg.gen_thickness, "relative layer thickness");
    gen->add_option("--out", gen_out, "output .ffield path");
    add_common(gen);

    // trace
    auto* trace = app.add_subcommand("trace", "trace candidate stream surfaces");
    std::string field_in, surf_dir = "surfaces";
    trace->add_option("--field", field_in, ".ffield input")->required();
    trace->add_option("--out", surf_dir, "output surface directory");
    add_common(trace);

    // select
    auto* sel = app.add_subcommand("select", "choose a well-spaced subset");
    std::string sel_surfaces = "surfaces", sel_out = "selected", sel_report = "selection.json";
    sel->add_option("--field", field_in, ".ffield input")->required();
    sel->add_option("--surfaces", sel_surfaces, "traced surface directory");
    sel->add_option("--out", sel_out, "selected surface directory");
    sel->add_option("--report", sel_report, "selection report JSON");
    add_common(sel);

    // splat
    auto* splat = app.add_subcommand("splat", "synthesize a voxel solid");
    std::string splat_vol = "solid.vvol", splat_mesh = "boundary.obj";
    splat->add_option("--field", field_in, ".ffield input")->required();
    splat->add_option("--surfaces", sel_surfaces, "surface directory (selected)");
    splat->add_option("--volume", splat_vol, "output .vvol");
    splat->add_option("--mesh", splat_mesh, "output boundary OBJ");
    add_common(splat);

    // hexmesh
    auto* hexm = app.add_subcommand("hexmesh", "dualize surfaces into a hex mesh");
    std::string hex_vtk = "mesh.vtk", hex_medit = "mesh.mesh", hex_report = "quality.json";
    hexm->add_option("--field", field_in, ".ffield input")->required();
    hexm->add_option("--surfaces", sel_surfaces, "surface directory (selected)");
    hexm->add_option("--vtk", hex_vtk, "output VTK legacy mesh");
    hexm->add_option("--medit", hex_medit, "output MEDIT .mesh");
    hexm->add_option("--report", hex_report, "quality report JSON");
    add_common(hexm);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "run the full pipeline");
    pipe->add_option("--field", cfg.field_path, ".ffield input (or use --generator)");
    std::string pipe_gen;
    pipe->add_option("--generator", pipe_gen, "cylinder | helicoid | singularity2d");
    pipe->add_option("--dims", gen_dims.text, "generator dims nx,ny,nz");
    pipe->add_option("--spacing", cfg.gen_spacing, "generator voxel spacing");
    pipe->add_option("--pitch", cfg.gen_pitch, "helicoid pitch");
    pipe->add_option("--axis", cfg.gen_axis, "generator axis");
    pipe->add_option("--index", cfg.gen_index, "singularity index");
    pipe->add_option("--thickness", cfg.gen_thickness, "relative layer thickness");
    pipe->add_option("--out", cfg.out_dir, "output directory");
    pipe->add_option("--mode", cfg.output_mode, "splat | hexmesh");
    add_common(pipe);

    try {
        // config file first, then flags override
        app.preparse_callback([&](std::size_t) {});
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? 0 : 1;
        }
        if (!config_path.empty()) {
            PipelineConfig file_cfg = load_config(config_path);
            // flags already parsed into cfg win over the file for every flag
            // the user passed; reparse onto the file config for simplicity
            std::swap(cfg.field_path, file_cfg.field_path);
            PipelineConfig merged = file_cfg;
            // command-line values overwrite file values where flags were given
            auto count = [&](const CLI::App* cmd, const std::string& name) {
                return cmd->count(name) > 0;
            };
            const CLI::App* active = app.get_subcommands().front();
            if (count(active, "--gamma")) merged.gamma = cfg.gamma;
            if (count(active, "--epsilon")) merged.epsilon = cfg.epsilon;
            if (count(active, "--radius")) merged.r = cfg.r;
            if (count(active, "--radius-fine")) merged.r_fine = cfg.r_fine;
            if (count(active, "--k-sigma")) merged.k_sigma = cfg.k_sigma;
            if (count(active, "--seed")) merged.rng_seed = cfg.rng_seed;
            if (count(active, "--threads")) merged.threads = cfg.threads;
            if (count(active, "--iso")) merged.iso = cfg.iso;
            if (count(active, "--eps-void")) merged.eps_void = cfg.eps_void;
            if (count(active, "--eps-solid")) merged.eps_solid = cfg.eps_solid;
            if (count(active, "--mask-dilation")) merged.mask_dilation = cfg.mask_dilation;
            if (count(active, "--n-surfaces")) merged.n_surfaces = cfg.n_surfaces;
            if (count(active, "--layer")) merged.layer_pin = cfg.layer_pin;
            merged.field_path = cfg.field_path.empty() ? file_cfg.field_path : cfg.field_path;
            merged.out_dir = cfg.out_dir;
            merged.output_mode = cfg.output_mode;
            cfg = merged;
        }
        cfg.gen_dims = gen_dims.parse(cfg.gen_dims);
        cfg.out_dims = out_dims.parse(cfg.out_dims);

        if (gen->parsed()) {
            cfg.generator = gen_name;
            cmd_gen_field(cfg, gen_out);
        } else if (trace->parsed()) {
            cmd_trace(cfg, field_in, surf_dir);
        } else if (sel->parsed()) {
            cmd_select(cfg, field_in, sel_surfaces, sel_out, sel_report);
        } else if (splat->parsed()) {
            cmd_splat(cfg, field_in, sel_surfaces, splat_vol, splat_mesh);
        } else if (hexm->parsed()) {
            cmd_hexmesh(cfg, field_in, sel_surfaces, hex_vtk, hex_medit, hex_report);
        } else if (pipe->parsed()) {
            if (!pipe_gen.empty()) cfg.generator = pipe_gen;
            cmd_pipeline(cfg);
        }
        return 0;
    } catch (const lamina::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
