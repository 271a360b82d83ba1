#pragma once

// Iterative drivers acting on adaptively resolved functions: conjugate
// gradients on the degree-bounded Dirichlet space, preconditioned CG on the
// zero-mean space, and the residual-minimizing pair GMRES (Arnoldi + plane
// rotations, optional restarts) and MINRES (Lanczos short recurrence).

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bvp.hpp"
#include "chebfun.hpp"

namespace chebkrylov {

struct KrylovOptions {
    double tol = 1e-10;    ///< residual tolerance, relative to the initial residual
    int max_iter = 200;
    std::optional<int> restart;                 ///< GMRES cycle length; none = full
    std::optional<PiecewiseFun> exact_solution; ///< enables energy-error tracking
    bool absolute_tol = false;                  ///< interpret tol as an absolute residual norm
    bool keep_functions = false; ///< store per-iteration residual/search/solution functions
    double iterate_chop_tol = 1e-14;
};

struct KrylovReport {
    PiecewiseFun u; ///< final approximate solution of the BVP
    PiecewiseFun v; ///< final preconditioned-space iterate (u = R(v + correction))
    std::vector<double> residual_history;     ///< entry k = residual norm after k iterations
    std::vector<double> energy_error_history; ///< relative energy errors, when tracked
    std::vector<double> time_history;         ///< cumulative seconds per history entry
    std::vector<double> alphas, betas;        ///< CG scalar sequences
    bool converged = false;
    int iterations = 0;
    double wall_time = 0.0;
    /// norm of the part of f discarded by the restricted-space projection
    /// (unpreconditioned CG only; zero for the other drivers)
    double projection_residual = 0.0;
    std::vector<PiecewiseFun> residual_functions; ///< populated when keep_functions
    std::vector<PiecewiseFun> search_functions;
    std::vector<PiecewiseFun> solution_iterates;
};

/// Orthonormal Krylov basis of the preconditioned operator plus the
/// upper-Hessenberg coefficient table, grown one column per step.
struct ArnoldiFactorization {
    std::vector<PiecewiseFun> basis;              ///< q_1..q_k, orthonormal
    std::vector<std::vector<double>> hessenberg;  ///< column i holds h_{1..i+2,i}
    double beta0 = 0.0;                           ///< norm of the start function
    bool lucky_breakdown = false;
};

enum class ArnoldiStatus { ok, lucky_breakdown };

inline ArnoldiFactorization arnoldi_init(const PiecewiseFun& start) {
    ArnoldiFactorization fact;
    fact.beta0 = norm_l2(start);
    if (fact.beta0 == 0.0) throw std::invalid_argument("arnoldi_init: zero start function");
    fact.basis.push_back(scale(1.0 / fact.beta0, start));
    return fact;
}

/// One modified Gram-Schmidt Arnoldi step; extends the Hessenberg table and,
/// unless the new direction collapses (lucky breakdown), the basis.
inline ArnoldiStatus arnoldi_step(const OperatorContext& ctx, ArnoldiFactorization& fact,
                                  double chop_tol = 1e-14) {
    if (fact.basis.empty()) throw std::invalid_argument("arnoldi_step: empty factorization");
    if (fact.lucky_breakdown) return ArnoldiStatus::lucky_breakdown;
    const std::size_t k = fact.basis.size();
    PiecewiseFun w = ctx.apply_preconditioned_operator(fact.basis.back());
    std::vector<double> column(k + 1, 0.0);
    // modified Gram-Schmidt with one re-orthogonalization sweep; the second
    // pass folds its corrections into the same Hessenberg column
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < k; ++j) {
            const double proj = inner_product(fact.basis[j], w);
            column[j] += proj;
            w = axpy(-proj, fact.basis[j], w, chop_tol);
        }
    }
    column[k] = norm_l2(w);
    fact.hessenberg.push_back(column);
    if (column[k] < 1e-13 * fact.beta0) {
        fact.lucky_breakdown = true;
        return ArnoldiStatus::lucky_breakdown;
    }
    fact.basis.push_back(scale(1.0 / column[k], w));
    return ArnoldiStatus::ok;
}

namespace detail {

inline void validate_options(const KrylovOptions& opts) {
    if (!(opts.tol > 0.0) || !(opts.tol < 1.0))
        throw std::invalid_argument("KrylovOptions: tol must lie in (0,1)");
    if (opts.max_iter < 1) throw std::invalid_argument("KrylovOptions: max_iter must be >= 1");
    if (opts.restart && *opts.restart < 1)
        throw std::invalid_argument("KrylovOptions: restart must be >= 1");
}

class WallTimer {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Relative energy error ||u_exact - u_k|| in the operator norm, guarded so
// tracking is only attempted for self-adjoint coercive problems.
class EnergyTracker {
  public:
    EnergyTracker(const OperatorContext& ctx, const KrylovOptions& opts) : ctx_(ctx) {
        if (opts.exact_solution && ctx.problem().self_adjoint && ctx.problem().coercive) {
            exact_ = *opts.exact_solution;
            scale_ = std::sqrt(ctx_.bilinear_form(*exact_, *exact_));
            active_ = scale_ > 0.0;
        }
    }

    bool active() const { return active_; }

    double relative_error(const PiecewiseFun& u_k) const {
        const auto e = *exact_ - u_k;
        return std::sqrt(std::max(0.0, ctx_.bilinear_form(e, e))) / scale_;
    }

  private:
    const OperatorContext& ctx_;
    std::optional<PiecewiseFun> exact_;
    double scale_ = 0.0;
    bool active_ = false;
};

} // namespace detail

/// CG on the operator restricted to polynomials of degree <= v0_degree that
/// vanish at the endpoints. The right-hand side is projected into that space
/// first; iteration count is capped by its dimension.
inline KrylovReport cg_unpreconditioned(const OperatorContext& ctx, int v0_degree,
                                        const KrylovOptions& opts = {}) {
    if (!ctx.problem().self_adjoint || !ctx.problem().coercive)
        throw std::invalid_argument("cg_unpreconditioned: requires self_adjoint and coercive");
    if (v0_degree < 2) throw std::invalid_argument("cg_unpreconditioned: degree must be >= 2");
    detail::validate_options(opts);
    const detail::WallTimer timer;
    const double ctol = opts.iterate_chop_tol;

    KrylovReport report;
    const detail::EnergyTracker tracker(ctx, opts);
    PiecewiseFun u;
    PiecewiseFun r = ctx.project_dirichlet_poly(ctx.problem().f, v0_degree);
    report.projection_residual = norm_l2(ctx.problem().f - r);
    PiecewiseFun p = r;
    double rr = inner_product(r, r);
    const double r0_norm = std::sqrt(std::max(0.0, rr));
    const double threshold = opts.absolute_tol ? opts.tol : opts.tol * r0_norm;

    auto record = [&](double res) {
        report.residual_history.push_back(res);
        report.time_history.push_back(timer.seconds());
        if (tracker.active()) report.energy_error_history.push_back(tracker.relative_error(u));
        if (opts.keep_functions) {
            report.residual_functions.push_back(r);
            report.search_functions.push_back(p);
            report.solution_iterates.push_back(u);
        }
    };
    record(r0_norm);
    report.converged = r0_norm <= threshold;

    const int cap = std::min(opts.max_iter, v0_degree - 1);
    for (int k = 0; k < cap && !report.converged; ++k) {
        const double denom = ctx.bilinear_form(p, p);
        if (denom <= 0.0)
            throw NotPositiveDefiniteError("cg_unpreconditioned: operator not positive definite");
        const double alpha = rr / denom;
        u = chop(axpy(alpha, p, u), ctol);
        const auto lp = ctx.project_dirichlet_poly(
            ctx.apply_operator(ctx.project_dirichlet_poly(p, v0_degree)), v0_degree);
        r = chop(axpy(-alpha, lp, r), ctol);
        const double rr_new = inner_product(r, r);
        const double beta = rr_new / rr;
        p = chop(axpy(beta, p, r), ctol);
        rr = rr_new;
        report.alphas.push_back(alpha);
        report.betas.push_back(beta);
        ++report.iterations;
        const double res = std::sqrt(std::max(0.0, rr));
        record(res);
        report.converged = res <= threshold;
    }
    report.u = u;
    report.v = u;
    report.wall_time = timer.seconds();
    return report;
}

/// Preconditioned CG: iterates live in the zero-mean space, the solution is
/// recovered through the integral preconditioner. Requires a self-adjoint
/// coercive problem.
inline KrylovReport pcg(const OperatorContext& ctx, const KrylovOptions& opts = {}) {
    if (!ctx.problem().self_adjoint || !ctx.problem().coercive)
        throw std::invalid_argument("pcg: requires self_adjoint and coercive flags");
    detail::validate_options(opts);
    const detail::WallTimer timer;
    const double ctol = opts.iterate_chop_tol;

    KrylovReport report;
    const detail::EnergyTracker tracker(ctx, opts);
    const auto prep = ctx.prepare_rhs();
    PiecewiseFun v;
    PiecewiseFun r = prep.rhs;
    PiecewiseFun p = r;
    double rr = inner_product(r, r);
    const double r0_norm = std::sqrt(std::max(0.0, rr));
    const double threshold = opts.absolute_tol ? opts.tol : opts.tol * r0_norm;

    auto current_u = [&] {
        return chop(apply_preconditioner(axpy(1.0, prep.correction, v)), ctol);
    };
    auto record = [&](double res) {
        report.residual_history.push_back(res);
        report.time_history.push_back(timer.seconds());
        if (tracker.active())
            report.energy_error_history.push_back(tracker.relative_error(current_u()));
        if (opts.keep_functions) {
            report.residual_functions.push_back(r);
            report.search_functions.push_back(p);
            report.solution_iterates.push_back(current_u());
        }
    };
    record(r0_norm);
    report.converged = r0_norm <= threshold;

    for (int k = 0; k < opts.max_iter && !report.converged; ++k) {
        const auto rp = apply_preconditioner(p, ctol);
        const double denom = ctx.bilinear_form(rp, rp);
        if (denom <= 0.0)
            throw NotPositiveDefiniteError(
                "pcg: operator not positive definite; use minres or gmres");
        const double alpha = rr / denom;
        v = chop(axpy(alpha, p, v), ctol);
        const auto tp = ctx.apply_preconditioned_operator(p);
        r = chop(axpy(-alpha, tp, r), ctol);
        const double rr_new = inner_product(r, r);
        const double beta = rr_new / rr;
        p = chop(axpy(beta, p, r), ctol);
        rr = rr_new;
        report.alphas.push_back(alpha);
        report.betas.push_back(beta);
        ++report.iterations;
        const double res = std::sqrt(std::max(0.0, rr));
        record(res);
        report.converged = res <= threshold;
    }
    report.v = v;
    report.u = current_u();
    report.wall_time = timer.seconds();
    return report;
}

/// GMRES on the preconditioned operator with optional restarts. The rotated
/// least-squares scalar drives the recurrences, but the reported history is
/// the explicitly recomputed residual norm, which is also what the stopping
/// test and each restart use.
inline KrylovReport gmres(const OperatorContext& ctx, const KrylovOptions& opts = {}) {
    detail::validate_options(opts);
    const detail::WallTimer timer;
    const double ctol = opts.iterate_chop_tol;

    KrylovReport report;
    const detail::EnergyTracker tracker(ctx, opts);
    const auto prep = ctx.prepare_rhs();
    PiecewiseFun v_total;
    PiecewiseFun r = prep.rhs;
    double beta = norm_l2(r);
    const double beta_init = beta;
    const double threshold = opts.absolute_tol ? opts.tol : opts.tol * beta_init;

    auto current_u = [&](const PiecewiseFun& v) {
        return chop(apply_preconditioner(axpy(1.0, prep.correction, v)), ctol);
    };
    auto record = [&](double res, const PiecewiseFun& v_now) {
        report.residual_history.push_back(res);
        report.time_history.push_back(timer.seconds());
        if (tracker.active())
            report.energy_error_history.push_back(tracker.relative_error(current_u(v_now)));
        if (opts.keep_functions) report.solution_iterates.push_back(current_u(v_now));
    };
    record(beta, v_total);
    report.converged = beta <= threshold;

    const int cycle_len = opts.restart.value_or(opts.max_iter);
    while (!report.converged && report.iterations < opts.max_iter) {
        if (beta == 0.0) break;
        auto fact = arnoldi_init(r);
        fact.beta0 = std::max(beta_init, beta);
        std::vector<std::vector<double>> rcols; // rotated Hessenberg columns
        std::vector<double> cs, sn;
        std::vector<double> g{beta};
        bool cycle_done = false;
        while (!cycle_done) {
            const auto status = arnoldi_step(ctx, fact, ctol);
            auto h = fact.hessenberg.back();
            const std::size_t k = fact.hessenberg.size(); // column count after the step
            for (std::size_t j = 0; j + 1 < k; ++j) {
                const double t = cs[j] * h[j] + sn[j] * h[j + 1];
                h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
                h[j] = t;
            }
            const double denom = std::hypot(h[k - 1], h[k]);
            cs.push_back(denom == 0.0 ? 1.0 : h[k - 1] / denom);
            sn.push_back(denom == 0.0 ? 0.0 : h[k] / denom);
            h[k - 1] = denom;
            g.push_back(-sn.back() * g[k - 1]);
            g[k - 1] = cs.back() * g[k - 1];
            rcols.push_back(std::move(h));
            ++report.iterations;

            // back-substitute the k x k rotated triangle for y and form the
            // candidate iterate, then measure its true residual
            std::vector<double> y(k, 0.0);
            for (std::size_t i = k; i-- > 0;) {
                double s = g[i];
                for (std::size_t j = i + 1; j < k; ++j) s -= rcols[j][i] * y[j];
                y[i] = s / rcols[i][i];
            }
            PiecewiseFun v_now = v_total;
            for (std::size_t i = 0; i < k; ++i)
                v_now = axpy(y[i], fact.basis[i], v_now, ctol);
            const PiecewiseFun residual =
                chop(prep.rhs - ctx.apply_preconditioned_operator(v_now), ctol);
            const double res_norm = norm_l2(residual);

            const bool lucky = status == ArnoldiStatus::lucky_breakdown;
            const bool hit_tol = res_norm <= threshold;
            const bool cycle_full = static_cast<int>(k) >= cycle_len;
            const bool out_of_budget = report.iterations >= opts.max_iter;
            cycle_done = lucky || hit_tol || cycle_full || out_of_budget;

            record(res_norm, v_now);
            if (cycle_done) {
                v_total = v_now;
                r = residual;
                beta = res_norm;
                report.converged = hit_tol || (lucky && res_norm <= threshold);
            }
        }
    }
    report.v = v_total;
    report.u = current_u(v_total);
    report.wall_time = timer.seconds();
    return report;
}

/// MINRES: the self-adjoint specialization with a three-term Lanczos
/// recurrence and two stored direction functions; no basis storage. As in
/// gmres, the reported history and the stopping test use the explicitly
/// recomputed residual norm.
inline KrylovReport minres(const OperatorContext& ctx, const KrylovOptions& opts = {}) {
    if (!ctx.problem().self_adjoint)
        throw std::invalid_argument("minres: requires a self-adjoint problem; use gmres");
    detail::validate_options(opts);
    const detail::WallTimer timer;
    const double ctol = opts.iterate_chop_tol;

    KrylovReport report;
    const detail::EnergyTracker tracker(ctx, opts);
    const auto prep = ctx.prepare_rhs();
    PiecewiseFun v_sol;
    const double beta1 = norm_l2(prep.rhs);
    const double threshold = opts.absolute_tol ? opts.tol : opts.tol * beta1;

    auto current_u = [&](const PiecewiseFun& v) {
        return chop(apply_preconditioner(axpy(1.0, prep.correction, v)), ctol);
    };
    auto record = [&](double res) {
        report.residual_history.push_back(res);
        report.time_history.push_back(timer.seconds());
        if (tracker.active())
            report.energy_error_history.push_back(tracker.relative_error(current_u(v_sol)));
        if (opts.keep_functions) report.solution_iterates.push_back(current_u(v_sol));
    };
    record(beta1);
    report.converged = beta1 <= threshold;
    if (report.converged || beta1 == 0.0) {
        report.v = v_sol;
        report.u = current_u(v_sol);
        report.wall_time = timer.seconds();
        return report;
    }

    // Lanczos vectors q_{k-1}, q_k plus the two direction functions of the
    // short recurrence; scalar state follows the classical symmetric-rotation
    // bookkeeping (delta/gbar/epsln/dbar carried across iterations).
    PiecewiseFun q_prev;
    PiecewiseFun q = scale(1.0 / beta1, prep.rhs);
    PiecewiseFun dir, dir_old;
    double beta_k = beta1;
    double dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0;

    for (int k = 1; k <= opts.max_iter && !report.converged; ++k) {
        PiecewiseFun y = ctx.apply_preconditioned_operator(q);
        if (k > 1) y = chop(axpy(-beta_k, q_prev, y), ctol);
        const double alpha = inner_product(y, q);
        y = chop(axpy(-alpha, q, y), ctol);
        const double beta_next = norm_l2(y);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alpha;
        const double gbar = sn * dbar - cs * alpha;
        epsln = sn * beta_next;
        dbar = -cs * beta_next;
        const double gamma = std::hypot(gbar, beta_next);
        if (gamma == 0.0) {
            // exact termination: the residual cannot improve further
            phibar = 0.0;
            ++report.iterations;
            record(norm_l2(prep.rhs - ctx.apply_preconditioned_operator(v_sol)));
            report.converged = true;
            break;
        }
        cs = gbar / gamma;
        sn = beta_next / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        PiecewiseFun dir_new = axpy(-oldeps, dir_old, axpy(-delta, dir, q, ctol), ctol);
        dir_new = chop(scale(1.0 / gamma, dir_new), ctol);
        dir_old = dir;
        dir = dir_new;
        v_sol = chop(axpy(phi, dir_new, v_sol), ctol);

        q_prev = q;
        if (beta_next > 0.0) q = chop(scale(1.0 / beta_next, y), ctol);
        beta_k = beta_next;

        ++report.iterations;
        const double res_norm =
            norm_l2(prep.rhs - ctx.apply_preconditioned_operator(v_sol));
        record(res_norm);
        report.converged = res_norm <= threshold || beta_next < 1e-13 * beta1;
    }
    report.v = v_sol;
    report.u = current_u(v_sol);
    report.wall_time = timer.seconds();
    return report;
}

} // namespace chebkrylov
