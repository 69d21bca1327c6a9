#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "lamina/errors.hpp"

namespace lamina {

// Weighted least-absolute-deviations program over box-constrained weights:
//
//     minimize  sum_r  weight_r * | sum_{j in row_r} w_j  -  target_r |
//     subject to 0 <= w_j <= 1.
//
// Rows are sparse index lists with implicit unit coefficients (binary
// activation rows). Solved as the LP
//
//     min c'(u+v)  s.t.  M w - u + v = b,  0 <= w <= 1,  u, v >= 0
//
// with a Mehrotra predictor-corrector interior point method. The normal
// matrix M D M' + E is inverted through the Woodbury identity, so the dense
// factorization is only n x n in the number of weights regardless of the row
// count.
struct LadProblem {
    int n_vars = 0;
    std::vector<std::vector<int>> rows;  // sorted column ids per row
    std::vector<double> weight;          // c_r > 0
    std::vector<double> target;          // b_r

    std::size_t n_rows() const { return rows.size(); }

    double objective(const std::vector<double>& w) const {
        double obj = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double acc = -target[r];
            for (int j : rows[r]) acc += w[j];
            obj += weight[r] * std::abs(acc);
        }
        return obj;
    }
};

struct LadSolution {
    std::vector<double> w;
    double objective = 0.0;    // primal L1 value of w (upper bound on the optimum)
    double lower_bound = 0.0;  // dual objective: a certified lower bound
    int iterations = 0;
};

namespace detail {

inline LadSolution solve_lad_ipm(const LadProblem& prob, double tol = 1e-8, int max_iter = 200) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    const int n = prob.n_vars;
    const std::size_t R = prob.n_rows();
    if (n <= 0 || R == 0) throw Error(ErrorCode::InvalidParam, "empty LP");

    const auto& rows = prob.rows;
    VectorXd b(R), c(R);
    for (std::size_t r = 0; r < R; ++r) {
        b[r] = prob.target[r];
        c[r] = prob.weight[r];
        if (!(c[r] > 0.0)) throw Error(ErrorCode::InvalidParam, "row weights must be positive");
    }

    auto mat_vec = [&](const VectorXd& w) {  // M w
        VectorXd out = VectorXd::Zero(R);
        for (std::size_t r = 0; r < R; ++r) {
            double acc = 0.0;
            for (int j : rows[r]) acc += w[j];
            out[r] = acc;
        }
        return out;
    };
    auto mat_tvec = [&](const VectorXd& y) {  // M' y
        VectorXd out = VectorXd::Zero(n);
        for (std::size_t r = 0; r < R; ++r)
            for (int j : rows[r]) out[j] += y[r];
        return out;
    };

    // primal: w, box slack s = 1 - w, residual split u, v
    // dual:   y (rows), zw >= 0 (w >= 0), q >= 0 (w <= 1), zu, zv >= 0
    VectorXd w = VectorXd::Constant(n, 0.5);
    VectorXd s = VectorXd::Constant(n, 0.5);
    VectorXd rho = b - mat_vec(w);
    VectorXd u(R), v(R);
    for (std::size_t r = 0; r < R; ++r) {
        u[r] = std::max(-rho[r], 0.0) + 1.0;
        v[r] = std::max(rho[r], 0.0) + 1.0;
    }
    VectorXd y = VectorXd::Zero(R);
    VectorXd zw = VectorXd::Ones(n), q = VectorXd::Ones(n);
    VectorXd zu = 0.5 * c, zv = 0.5 * c;

    const double b_scale = 1.0 + b.cwiseAbs().maxCoeff();
    const double c_scale = 1.0 + c.maxCoeff();

    LadSolution sol;
    VectorXd best_w = w;
    double best_merit = std::numeric_limits<double>::infinity();
    double best_lb = 0.0;
    int stall = 0;
    // endgame rows where both residual slacks vanish make the normal matrix
    // nearly singular; accepting at loose_tol with the best iterate keeps the
    // contract (optimum within 1e-6 relative) without chasing exact zeros
    const double loose_tol = std::max(tol, 1e-6);
    for (int iter = 0; iter < max_iter; ++iter) {
        // residuals
        VectorXd rp = b - (mat_vec(w) - u + v);                  // primal rows
        VectorXd rub = VectorXd::Ones(n) - w - s;                // box rows
        VectorXd rdw = -mat_tvec(y) - zw + q;                    // dual: w columns (c_w = 0)
        VectorXd rdu = c + y - zu;                               // dual: u columns (A_u = -I)
        VectorXd rdv = c - y - zv;                               // dual: v columns (A_v = +I)

        const double mu =
            (w.dot(zw) + s.dot(q) + u.dot(zu) + v.dot(zv)) / double(2 * n + 2 * R);
        const double primal_obj = c.dot(u) + c.dot(v);
        const double dual_obj = b.dot(y) - q.sum();
        const double gap = std::abs(primal_obj - dual_obj) / (1.0 + std::abs(primal_obj));
        const double pinf = std::max(rp.lpNorm<Eigen::Infinity>(),
                                     rub.lpNorm<Eigen::Infinity>()) / b_scale;
        const double dinf = std::max({rdw.lpNorm<Eigen::Infinity>(), rdu.lpNorm<Eigen::Infinity>(),
                                      rdv.lpNorm<Eigen::Infinity>()}) / c_scale;
        const double merit = std::max({gap, pinf, dinf});
        if (merit < best_merit) {
            best_merit = merit;
            best_w = w;
            stall = 0;
        } else if (++stall >= 8 || (merit > 1e3 * best_merit && best_merit < loose_tol)) {
            break;  // endgame numerics no longer improve; keep the best iterate
        }
        if (dinf < 1e-9) best_lb = std::max(best_lb, dual_obj - 1e-9 * (1.0 + std::abs(dual_obj)));
        if (merit < tol) break;
        if (iter == max_iter - 1) break;

        // scaling diagonals with mu-adaptive proximal regularization:
        // duplicated columns and fully satisfied rows drive the raw diagonals
        // to zero together, which would make the normal system numerically
        // singular long before the gap reaches the tolerance
        const double reg = std::max(1e-10, 1e-4 * std::sqrt(mu / c_scale));
        VectorXd dw_inv =
            (zw.cwiseQuotient(w) + q.cwiseQuotient(s)).array() + reg;  // 1/d for w columns
        VectorXd dw = dw_inv.cwiseInverse();
        VectorXd du = u.cwiseQuotient(zu);
        VectorXd dv = v.cwiseQuotient(zv);
        VectorXd E = (du + dv).cwiseMax(reg);
        VectorXd E_inv = E.cwiseInverse();

        // K = diag(1/dw) + M' E^-1 M  (n x n, SPD)
        MatrixXd K = MatrixXd::Zero(n, n);
        for (std::size_t r = 0; r < R; ++r) {
            const double e = E_inv[r];
            const auto& cols = rows[r];
            for (std::size_t a = 0; a < cols.size(); ++a) {
                K(cols[a], cols[a]) += e;
                for (std::size_t bb = a + 1; bb < cols.size(); ++bb) {
                    K(cols[a], cols[bb]) += e;
                    K(cols[bb], cols[a]) += e;
                }
            }
        }
        K.diagonal() += dw_inv;
        Eigen::LLT<MatrixXd> llt(K);
        if (llt.info() != Eigen::Success) {
            K.diagonal().array() += 1e-12 * (1.0 + K.diagonal().maxCoeff());
            llt.compute(K);
            if (llt.info() != Eigen::Success)
                throw Error(ErrorCode::SolverFailure, "normal equations not positive definite");
        }

        // solve (M Dw M' + E) t = g via Woodbury, with iterative refinement
        // to contain cancellation when E is tiny
        auto apply_normal = [&](const VectorXd& t) {
            return VectorXd(mat_vec(dw.cwiseProduct(mat_tvec(t))) + E.cwiseProduct(t));
        };
        auto solve_normal = [&](const VectorXd& g) {
            auto solve_once = [&](const VectorXd& rhs) {
                VectorXd h = E_inv.cwiseProduct(rhs);
                VectorXd inner = llt.solve(mat_tvec(h));
                return VectorXd(h - E_inv.cwiseProduct(mat_vec(inner)));
            };
            VectorXd t = solve_once(g);
            const double g_scale = 1.0 + g.cwiseAbs().maxCoeff();
            for (int ref = 0; ref < 8; ++ref) {
                VectorXd res = g - apply_normal(t);
                if (res.cwiseAbs().maxCoeff() < 1e-14 * g_scale) break;
                t += solve_once(res);
            }
            return t;
        };

        auto newton_step = [&](const VectorXd& rxz_w, const VectorXd& rsq, const VectorXd& rxz_u,
                               const VectorXd& rxz_v, VectorXd& dy, VectorXd& dxw, VectorXd& dxu,
                               VectorXd& dxv, VectorXd& dzw, VectorXd& dq, VectorXd& dzu,
                               VectorXd& dzv, VectorXd& ds) {
            // eliminate all complementarity blocks into the row equations
            VectorXd fw = rdw - rxz_w.cwiseQuotient(w) + (rsq - q.cwiseProduct(rub)).cwiseQuotient(s);
            VectorXd fu = rdu - rxz_u.cwiseQuotient(u);
            VectorXd fv = rdv - rxz_v.cwiseQuotient(v);
            // rhs of A D A' dy = rp + A D f  with column signs (+M, -I, +I)
            VectorXd ADf = mat_vec(dw.cwiseProduct(fw)) - du.cwiseProduct(fu) + dv.cwiseProduct(fv);
            dy = solve_normal(rp + ADf);
            dxw = dw.cwiseProduct(mat_tvec(dy) - fw);
            dxu = du.cwiseProduct(-dy - fu);
            dxv = dv.cwiseProduct(dy - fv);
            ds = rub - dxw;
            dzw = (rxz_w - zw.cwiseProduct(dxw)).cwiseQuotient(w);
            dq = (rsq - q.cwiseProduct(ds)).cwiseQuotient(s);
            dzu = (rxz_u - zu.cwiseProduct(dxu)).cwiseQuotient(u);
            dzv = (rxz_v - zv.cwiseProduct(dxv)).cwiseQuotient(v);
        };

        auto step_len = [](const VectorXd& x, const VectorXd& dx) {
            double a = 1.0;
            for (int i = 0; i < x.size(); ++i)
                if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
            return a;
        };

        auto direction_consistent = [&](const VectorXd& dxw_, const VectorXd& dxu_,
                                        const VectorXd& dxv_) {
            const VectorXd Adx = mat_vec(dxw_) - dxu_ + dxv_;
            return (Adx - rp).lpNorm<Eigen::Infinity>() <= 1e-5 * b_scale;
        };

        VectorXd dy, dxw, dxu, dxv, dzw, dq, dzu, dzv, ds;
        // affine predictor
        newton_step(-w.cwiseProduct(zw), -s.cwiseProduct(q), -u.cwiseProduct(zu),
                    -v.cwiseProduct(zv), dy, dxw, dxu, dxv, dzw, dq, dzu, dzv, ds);
        double ap = std::min({step_len(w, dxw), step_len(s, ds), step_len(u, dxu), step_len(v, dxv)});
        double ad = std::min({step_len(zw, dzw), step_len(q, dq), step_len(zu, dzu), step_len(zv, dzv)});
        const double mu_aff = ((w + ap * dxw).dot(zw + ad * dzw) + (s + ap * ds).dot(q + ad * dq) +
                               (u + ap * dxu).dot(zu + ad * dzu) +
                               (v + ap * dxv).dot(zv + ad * dzv)) /
                              double(2 * n + 2 * R);
        const double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);

        // corrector
        VectorXd rxz_w = VectorXd::Constant(n, sigma * mu) - w.cwiseProduct(zw) - dxw.cwiseProduct(dzw);
        VectorXd rsq = VectorXd::Constant(n, sigma * mu) - s.cwiseProduct(q) - ds.cwiseProduct(dq);
        VectorXd rxz_u = VectorXd::Constant(R, sigma * mu) - u.cwiseProduct(zu) - dxu.cwiseProduct(dzu);
        VectorXd rxz_v = VectorXd::Constant(R, sigma * mu) - v.cwiseProduct(zv) - dxv.cwiseProduct(dzv);
        newton_step(rxz_w, rsq, rxz_u, rxz_v, dy, dxw, dxu, dxv, dzw, dq, dzu, dzv, ds);
        if (!direction_consistent(dxw, dxu, dxv)) break;  // solve lost accuracy; keep best
        ap = std::min({step_len(w, dxw), step_len(s, ds), step_len(u, dxu), step_len(v, dxv)});
        ad = std::min({step_len(zw, dzw), step_len(q, dq), step_len(zu, dzu), step_len(zv, dzv)});
        const double eta = 0.99995;
        ap = std::min(1.0, eta * ap);
        ad = std::min(1.0, eta * ad);

        w += ap * dxw;
        s += ap * ds;
        u += ap * dxu;
        v += ap * dxv;
        y += ad * dy;
        zw += ad * dzw;
        q += ad * dq;
        zu += ad * dzu;
        zv += ad * dzv;
        sol.iterations = iter + 1;
    }

    if (best_merit > loose_tol)
        throw Error(ErrorCode::SolverFailure, "interior point method did not converge");

    sol.w.assign(n, 0.0);
    for (int j = 0; j < n; ++j) sol.w[j] = std::clamp(best_w[j], 0.0, 1.0);
    sol.objective = prob.objective(sol.w);
    sol.lower_bound = std::min(best_lb, sol.objective);
    return sol;
}

// Dense bounded-variable primal simplex on the same reformulation
// (variables w, u, v plus explicit box slacks; Bland's rule). Exact and
// robust on the small degenerate instances the interior point method can
// reject, at dense-tableau cost.
inline LadSolution solve_lad_simplex(const LadProblem& prob, long max_pivots = 500000) {
    const int n = prob.n_vars;
    const int R = int(prob.n_rows());
    const int rows = R + n;
    const int cols = 2 * n + 2 * R;
    std::vector<std::vector<double>> T(rows, std::vector<double>(cols + 1, 0.0));
    std::vector<double> cost(cols, 0.0);
    for (int r = 0; r < R; ++r) {
        const double sgn = prob.target[r] >= 0.0 ? 1.0 : -1.0;  // keep rhs nonnegative
        for (int j : prob.rows[r]) T[r][j] = sgn;
        T[r][n + r] = -sgn;
        T[r][n + R + r] = sgn;
        T[r][cols] = sgn * prob.target[r];
        cost[n + r] = prob.weight[r];
        cost[n + R + r] = prob.weight[r];
    }
    for (int j = 0; j < n; ++j) {
        T[R + j][j] = 1.0;
        T[R + j][n + 2 * R + j] = 1.0;
        T[R + j][cols] = 1.0;
    }
    std::vector<int> basis(rows);
    for (int r = 0; r < R; ++r) basis[r] = prob.target[r] >= 0.0 ? n + R + r : n + r;
    for (int j = 0; j < n; ++j) basis[R + j] = n + 2 * R + j;

    std::vector<double> red(cols, 0.0);
    auto rebuild_reduced_costs = [&] {
        for (int c = 0; c < cols; ++c) red[c] = cost[c];
        for (int r = 0; r < rows; ++r) {
            const double cb = cost[basis[r]];
            if (cb == 0.0) continue;
            for (int c = 0; c < cols; ++c) red[c] -= cb * T[r][c];
        }
    };
    rebuild_reduced_costs();
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
        int enter = -1;
        for (int c = 0; c < cols; ++c)
            if (red[c] < -1e-9) {
                enter = c;  // Bland: lowest eligible index
                break;
            }
        if (enter < 0) break;
        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int r = 0; r < rows; ++r) {
            if (T[r][enter] <= 1e-11) continue;
            const double ratio = T[r][cols] / T[r][enter];
            if (ratio < best_ratio - 1e-12 ||
                (ratio < best_ratio + 1e-12 && (leave < 0 || basis[r] < basis[leave]))) {
                best_ratio = ratio;
                leave = r;
            }
        }
        if (leave < 0)
            throw Error(ErrorCode::SolverFailure, "unbounded LAD reformulation");
        const double piv = T[leave][enter];
        for (int c = 0; c <= cols; ++c) T[leave][c] /= piv;
        for (int r = 0; r < rows; ++r) {
            if (r == leave) continue;
            const double f = T[r][enter];
            if (f == 0.0) continue;
            for (int c = 0; c <= cols; ++c) T[r][c] -= f * T[leave][c];
        }
        const double fr = red[enter];
        if (fr != 0.0)
            for (int c = 0; c < cols; ++c) red[c] -= fr * T[leave][c];
        basis[leave] = enter;
        if (pivot == max_pivots - 1)
            throw Error(ErrorCode::SolverFailure, "simplex pivot budget exhausted");
    }

    LadSolution sol;
    sol.w.assign(n, 0.0);
    for (int r = 0; r < rows; ++r)
        if (basis[r] < n) sol.w[basis[r]] = std::clamp(T[r][cols], 0.0, 1.0);
    sol.objective = prob.objective(sol.w);
    sol.lower_bound = sol.objective;  // simplex terminates at an exact optimum
    return sol;
}

}  // namespace detail

// Interior point first; on the small degenerate instances where its endgame
// stalls, fall back to the exact simplex.
inline LadSolution solve_lad_lp(const LadProblem& prob, double tol = 1e-8, int max_iter = 200) {
    const std::size_t rows = prob.n_rows() + prob.n_vars;
    const std::size_t cols = 2 * prob.n_rows() + 2 * prob.n_vars;
    const bool simplex_feasible = rows * (cols + 1) <= 6u * 1000u * 1000u;
    try {
        return detail::solve_lad_ipm(prob, tol, max_iter);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SolverFailure || !simplex_feasible) throw;
        return detail::solve_lad_simplex(prob);
    }
}

}  // namespace lamina
