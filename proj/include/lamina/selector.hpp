#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <thread>
#include <vector>

#include "lamina/field.hpp"
#include "lamina/lp.hpp"
#include "lamina/spatial_hash.hpp"
#include "lamina/tracer.hpp"

namespace lamina {

struct Cardinalities {
    long n_sopt = 0;  // well-spaced members at spacing gamma
    long n_s = 0;     // candidates to trace
    long n_p = 0;     // probe points at spacing eps*gamma
};

// Candidate/probe counts from the domain extent: surfaces are codimension-1
// objects, so |S_opt| grows linearly with the extents while probes grow with
// the d-th power. dims_world holds 2 or 3 extents in world units.
inline Cardinalities cardinalities(const std::vector<double>& dims_world, double gamma,
                                   double eps) {
    if (gamma <= 0.0 || eps <= 0.0 || eps >= 1.0)
        throw Error(ErrorCode::InvalidParam, "need gamma > 0 and 0 < eps < 1");
    if (dims_world.size() != 2 && dims_world.size() != 3)
        throw Error(ErrorCode::InvalidParam, "dims_world must have 2 or 3 extents");
    double sum = 0.0, prod = 1.0;
    for (double d : dims_world) {
        if (d <= 0.0) throw Error(ErrorCode::InvalidParam, "extents must be positive");
        sum += d / gamma;
        prod *= d / (eps * gamma);
    }
    Cardinalities c;
    c.n_sopt = long(std::ceil(sum - 1e-9));
    c.n_s = long(std::ceil(sum / eps - 1e-9));
    c.n_p = long(std::ceil(prod - 1e-9));
    return c;
}

// Probe lattice at spacing eps*gamma over the traceable (Intermediate) part
// of the domain. Every probe carries a fixed pseudo-random assignment of the
// three local frame axes to channels 0..2, deterministic in rng_seed.
struct ProbeGrid {
    std::vector<Vec3> positions;
    std::vector<std::array<std::uint8_t, 3>> channel_of_axis;
    double spacing = 0.0;
};

inline ProbeGrid build_probe_grid(const FrameGrid& g, double gamma, double eps,
                                  std::uint64_t rng_seed) {
    if (gamma <= 0.0 || eps <= 0.0 || eps >= 1.0)
        throw Error(ErrorCode::InvalidParam, "need gamma > 0 and 0 < eps < 1");
    ProbeGrid probes;
    probes.spacing = eps * gamma;
    const GridSpec& spec = g.spec();
    const Vec3 lo = spec.min_corner();
    const Vec3 hi = spec.max_corner();
    const int nx = std::max(1, int(std::floor((hi.x - lo.x) / probes.spacing)));
    const int ny = std::max(1, int(std::floor((hi.y - lo.y) / probes.spacing)));
    const int nz = std::max(1, int(std::floor((hi.z - lo.z) / probes.spacing)));
    std::size_t lattice_index = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i, ++lattice_index) {
                const Vec3 p = lo + Vec3{(i + 0.5), (j + 0.5), (k + 0.5)} * probes.spacing;
                if (!spec.contains(p)) continue;
                if (g.class_at(p) != VoxelClass::Intermediate) continue;
                std::array<std::uint8_t, 3> label = {0, 1, 2};
                std::mt19937_64 rng(hash_combine(rng_seed, lattice_index));
                std::shuffle(label.begin(), label.end(), rng);
                probes.positions.push_back(p);
                probes.channel_of_axis.push_back(label);
            }
    return probes;
}

// Sparse binary activation: rows are the non-empty (probe, channel) pairs in
// (probe, channel) order, columns are surfaces. A surface activates at most
// one channel per probe (its nearest point has one normal), so the per-probe
// channel energies form a disjoint union by construction.
struct ActivationMatrix {
    int n_surfaces = 0;
    std::size_t n_probes = 0;
    std::vector<std::pair<std::uint32_t, std::uint8_t>> row_keys;
    std::vector<std::vector<int>> row_surfaces;

    std::size_t n_rows() const { return row_surfaces.size(); }
};

inline ActivationMatrix compute_activation(const std::vector<StreamSurface>& surfaces,
                                           const ProbeGrid& probes, const FrameGrid& g,
                                           double gamma, int threads = 1) {
    ActivationMatrix A;
    A.n_surfaces = int(surfaces.size());
    A.n_probes = probes.positions.size();

    std::vector<PDSIndex> indexes;
    indexes.reserve(surfaces.size());
    for (const StreamSurface& s : surfaces) {
        indexes.emplace_back(s.r > 0.0 ? s.r : gamma);
        for (const Vec3& p : s.points) indexes.back().insert(p);
    }

    const double band = 0.5 * gamma;  // total band width gamma around the surface
    const std::size_t np = probes.positions.size();
    // per-probe activation: channel id per surface, or -1
    std::vector<std::vector<std::int8_t>> probe_channel(np);

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t pi = begin; pi < end; ++pi) {
            const Vec3& x = probes.positions[pi];
            std::vector<std::int8_t> ch(surfaces.size(), -1);
            Frame f;
            bool have_frame = false;
            for (std::size_t si = 0; si < surfaces.size(); ++si) {
                if (surfaces[si].points.empty()) continue;
                const std::int64_t nearest = indexes[si].nearest_within(x, band);
                if (nearest < 0) continue;
                if (!have_frame) {
                    f = g.sample(x);
                    have_frame = true;
                }
                const Vec3& n = surfaces[si].normals[std::size_t(nearest)];
                const int axis = closest_frame_vector(f, n).axis;
                ch[si] = std::int8_t(probes.channel_of_axis[pi][axis]);
            }
            probe_channel[pi] = std::move(ch);
        }
    };
    if (threads <= 1 || np < 64) {
        worker(0, np);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (np + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const std::size_t b = std::min(np, std::size_t(t) * chunk);
            const std::size_t e = std::min(np, b + chunk);
            if (b < e) pool.emplace_back(worker, b, e);
        }
        for (auto& th : pool) th.join();
    }

    for (std::size_t pi = 0; pi < np; ++pi) {
        std::array<std::vector<int>, 3> per_channel;
        for (std::size_t si = 0; si < surfaces.size(); ++si) {
            const std::int8_t c = probe_channel[pi][si];
            if (c >= 0) per_channel[c].push_back(int(si));
        }
        for (int c = 0; c < 3; ++c) {
            if (per_channel[c].empty()) continue;
            A.row_keys.emplace_back(std::uint32_t(pi), std::uint8_t(c));
            A.row_surfaces.push_back(std::move(per_channel[c]));
        }
    }
    return A;
}

// Rows with identical surface support are interchangeable terms of the L1
// objective; merging them keeps the LP small.
inline LadProblem activation_to_lad(const ActivationMatrix& A) {
    LadProblem prob;
    prob.n_vars = A.n_surfaces;
    std::map<std::vector<int>, double> merged;
    for (const auto& row : A.row_surfaces) merged[row] += 1.0;
    for (auto& [cols, count] : merged) {
        prob.rows.push_back(cols);
        prob.weight.push_back(count);
        prob.target.push_back(1.0);
    }
    return prob;
}

struct RelaxedSolution {
    std::vector<double> w;
    double objective = 0.0;  // relaxed optimum reported from the dual side,
                             // so it lower-bounds every binary completion
    int iterations = 0;
};

// Relaxed program: weights in [0,1], minimize the summed absolute deviation
// of the per-row coverage from one.
inline RelaxedSolution solve_relaxed(const ActivationMatrix& A) {
    if (A.n_rows() == 0 || A.n_surfaces == 0)
        throw Error(ErrorCode::InvalidParam, "empty activation matrix");
    const LadProblem prob = activation_to_lad(A);
    const LadSolution lp = solve_lad_lp(prob);
    return RelaxedSolution{lp.w, lp.lower_bound, lp.iterations};
}

struct SelectionResult {
    std::vector<std::uint8_t> w;  // binary weight per surface
    double objective = 0.0;       // L1 deviation of the binary weights
    double relaxed_objective = 0.0;
    int fixed_count = 0;          // weights pinned by the relaxation
    std::vector<int> selected;    // surface indices with w = 1
};

namespace detail {

// Reduced problem on the free variables given a partial binary assignment:
// assigned-one columns move into the targets, assigned-zero columns drop.
// Rows without free columns contribute the returned constant.
inline double reduce_lad(const LadProblem& base, const std::vector<int>& assign,
                         const std::vector<int>& free_ids, LadProblem& out) {
    std::vector<int> var_pos(assign.size(), -1);
    for (std::size_t i = 0; i < free_ids.size(); ++i) var_pos[free_ids[i]] = int(i);
    out = LadProblem{};
    out.n_vars = int(free_ids.size());
    double constant = 0.0;
    for (std::size_t r = 0; r < base.rows.size(); ++r) {
        double target = base.target[r];
        std::vector<int> cols;
        for (int j : base.rows[r]) {
            if (assign[j] == 1)
                target -= 1.0;
            else if (assign[j] < 0)
                cols.push_back(var_pos[j]);
        }
        if (cols.empty()) {
            constant += base.weight[r] * std::abs(target);
        } else {
            out.rows.push_back(std::move(cols));
            out.weight.push_back(base.weight[r]);
            out.target.push_back(target);
        }
    }
    return constant;
}

inline double eval_lad(const LadProblem& base, const std::vector<int>& assign) {
    double obj = 0.0;
    for (std::size_t r = 0; r < base.rows.size(); ++r) {
        double acc = -base.target[r];
        for (int j : base.rows[r]) acc += assign[j];
        obj += base.weight[r] * std::abs(acc);
    }
    return obj;
}

struct BnbContext {
    const LadProblem& base;
    std::vector<int> order;        // free variables, most fractional first
    std::vector<double> relax_w;   // relaxation values for branch direction
    std::vector<int> assign;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<int> best_assign;
    bool integral;                 // all weights/targets integral: exact pruning
    std::size_t nodes = 0;
};

inline void bnb_recurse(BnbContext& ctx, std::size_t depth) {
    ++ctx.nodes;
    if (depth == ctx.order.size()) {
        const double obj = eval_lad(ctx.base, ctx.assign);
        if (obj < ctx.best_obj) {
            ctx.best_obj = obj;
            ctx.best_assign = ctx.assign;
        }
        return;
    }
    // lower bound from the LP relaxation of the remaining free block
    std::vector<int> remaining(ctx.order.begin() + depth, ctx.order.end());
    std::sort(remaining.begin(), remaining.end());
    LadProblem sub;
    const double constant = reduce_lad(ctx.base, ctx.assign, remaining, sub);
    double bound = constant;
    if (!sub.rows.empty()) {
        try {
            bound += std::max(0.0, solve_lad_lp(sub).lower_bound);
        } catch (const Error&) {
            // keep the constant-only bound; still valid, just weaker
        }
    }
    if (ctx.integral) {
        // binary objectives are integers: prune unless the bound admits a
        // strictly better integer value
        if (std::ceil(bound - 1e-9) >= ctx.best_obj - 1e-9) return;
    } else if (bound >= ctx.best_obj - 1e-12) {
        return;
    }
    const int j = ctx.order[depth];
    const int first = ctx.relax_w[j] >= 0.5 ? 1 : 0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ctx.assign[j] = attempt == 0 ? first : 1 - first;
        bnb_recurse(ctx, depth + 1);
    }
    ctx.assign[j] = -1;
}

}  // namespace detail

// Fix relaxed weights within tol_fix of a bound and solve the small residual
// binary program exactly by branch and bound with LP-relaxation bounds.
inline SelectionResult finalize_binary(const ActivationMatrix& A,
                                       const std::vector<double>& w_relaxed,
                                       double tol_fix = 1e-3, int free_budget = 40) {
    if (int(w_relaxed.size()) != A.n_surfaces)
        throw Error(ErrorCode::DimensionMismatch, "relaxed weight count mismatch");
    const LadProblem base = activation_to_lad(A);

    std::vector<int> assign(A.n_surfaces, -1);
    std::vector<int> free_ids;
    for (int j = 0; j < A.n_surfaces; ++j) {
        if (w_relaxed[j] <= tol_fix)
            assign[j] = 0;
        else if (w_relaxed[j] >= 1.0 - tol_fix)
            assign[j] = 1;
        else
            free_ids.push_back(j);
    }
    if (int(free_ids.size()) > free_budget)
        throw Error(ErrorCode::TooManyFreeVariables,
                    std::to_string(free_ids.size()) + " non-binary weights exceed budget " +
                        std::to_string(free_budget) + "; check epsilon/gamma");

    bool integral = true;
    for (double wt : base.weight) integral = integral && wt == std::floor(wt);
    for (double t : base.target) integral = integral && t == std::floor(t);

    detail::BnbContext ctx{base};
    ctx.order = free_ids;
    std::stable_sort(ctx.order.begin(), ctx.order.end(), [&](int a, int b) {
        return std::abs(w_relaxed[a] - 0.5) < std::abs(w_relaxed[b] - 0.5);
    });
    ctx.relax_w = w_relaxed;
    ctx.assign = assign;
    ctx.integral = integral;
    // rounding incumbent
    for (int j : free_ids) ctx.assign[j] = w_relaxed[j] >= 0.5 ? 1 : 0;
    ctx.best_obj = detail::eval_lad(base, ctx.assign);
    ctx.best_assign = ctx.assign;
    for (int j : free_ids) ctx.assign[j] = -1;

    detail::bnb_recurse(ctx, 0);

    SelectionResult res;
    res.w.assign(A.n_surfaces, 0);
    for (int j = 0; j < A.n_surfaces; ++j) res.w[j] = std::uint8_t(ctx.best_assign[j]);
    res.objective = ctx.best_obj;
    res.fixed_count = A.n_surfaces - int(free_ids.size());
    for (int j = 0; j < A.n_surfaces; ++j)
        if (res.w[j]) res.selected.push_back(j);
    return res;
}

struct SelectorParams {
    double tol_fix = 1e-3;
    int free_budget = 40;
    int threads = 1;
};

// Full subselection: probe grid, activation, relaxation, exact cleanup.
inline SelectionResult select(const std::vector<StreamSurface>& surfaces, const FrameGrid& g,
                              double gamma, double eps, std::uint64_t rng_seed,
                              const SelectorParams& params = {}) {
    const ProbeGrid probes = build_probe_grid(g, gamma, eps, rng_seed);
    const ActivationMatrix A = compute_activation(surfaces, probes, g, gamma, params.threads);
    if (A.n_rows() == 0)
        throw Error(ErrorCode::InsufficientDomain, "no probe is activated by any surface");
    const RelaxedSolution relaxed = solve_relaxed(A);
    SelectionResult res = finalize_binary(A, relaxed.w, params.tol_fix, params.free_budget);
    res.relaxed_objective = relaxed.objective;
    return res;
}

}  // namespace lamina
