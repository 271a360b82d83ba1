#pragma once

// The two CLI commands: solve a problem file and emit CSV/summary outputs,
// or verify the condition-number convergence bound iteration by iteration.
// Exit codes: 0 success/converged, 1 input or contract error, 2 solver ran
// but did not converge.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bvp.hpp"
#include "exprparse.hpp"
#include "krylov.hpp"
#include "problem_file.hpp"

namespace chebkrylov {

struct CommandOverrides {
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::optional<int> restart;
    std::optional<std::string> method;
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline PiecewiseFun build_coefficient(const std::string& text, const std::string& key,
                                      const std::vector<double>& breaks) {
    const auto ast = parse(text);
    auto fun = construct_adaptive([ast](double x) { return eval_at(ast, x); }, breaks);
    if (!fun.resolved())
        throw ProblemFileError("'" + key + "' = \"" + text +
                               "\" could not be resolved to machine precision; "
                               "check for kinks without matching breakpoints");
    return fun;
}

struct BuiltProblem {
    BvpProblem problem;
    std::optional<PiecewiseFun> exact;
};

inline BuiltProblem build_problem(const ProblemFile& file) {
    const std::vector<double> breaks =
        file.breakpoints ? *file.breakpoints : std::vector<double>{-1.0, 1.0};
    BuiltProblem out;
    out.problem.a = build_coefficient(file.a, "a", breaks);
    out.problem.b = build_coefficient(file.b, "b", breaks);
    out.problem.c = build_coefficient(file.c, "c", breaks);
    if (file.exact_solution)
        out.exact = build_coefficient(*file.exact_solution, "exact_solution", breaks);
    if (file.f) {
        out.problem.f = build_coefficient(*file.f, "f", breaks);
    } else {
        // manufactured mode: f = L(exact_solution)
        OperatorContext builder(out.problem);
        out.problem.f = builder.apply_operator(*out.exact);
    }
    out.problem.self_adjoint = sup_norm_estimate(out.problem.b) < 1e-13;
    const auto a_stats = dense_sample_stats(out.problem.a);
    const auto c_stats = dense_sample_stats(out.problem.c);
    out.problem.coercive = a_stats.min_value > 0.0 && c_stats.min_value >= -1e-13;
    return out;
}

inline KrylovOptions build_options(const ProblemFile& file,
                                   const std::optional<PiecewiseFun>& exact) {
    KrylovOptions opts;
    if (file.tol) opts.tol = *file.tol;
    if (file.max_iter) opts.max_iter = *file.max_iter;
    if (file.restart) opts.restart = *file.restart;
    if (exact) opts.exact_solution = *exact;
    return opts;
}

inline KrylovReport dispatch(const ProblemFile& file, const OperatorContext& ctx,
                             const KrylovOptions& opts) {
    if (file.method == "pcg") return pcg(ctx, opts);
    if (file.method == "minres") return minres(ctx, opts);
    if (file.method == "gmres") return gmres(ctx, opts);
    return cg_unpreconditioned(ctx, *file.v0_degree, opts);
}

inline void apply_overrides(ProblemFile& file, const CommandOverrides& overrides) {
    if (overrides.tol) file.tol = overrides.tol;
    if (overrides.max_iter) file.max_iter = overrides.max_iter;
    if (overrides.restart) file.restart = overrides.restart;
    if (overrides.method) file.method = *overrides.method;
    validate_problem_file(file);
}

inline void write_history_csv(const std::string& path, const KrylovReport& report) {
    std::ofstream out(path);
    out << "iter,residual_norm,energy_error,cumulative_seconds\n";
    for (std::size_t k = 0; k < report.residual_history.size(); ++k) {
        out << k << ',' << fmt17(report.residual_history[k]) << ',';
        if (k < report.energy_error_history.size())
            out << fmt17(report.energy_error_history[k]);
        out << ',' << fmt17(report.time_history[k]) << '\n';
    }
}

inline void write_solution_csv(const std::string& path, const KrylovReport& report,
                               int sample_count) {
    std::ofstream out(path);
    out << "x,u\n";
    const double denom = static_cast<double>(sample_count - 1);
    for (int i = 0; i < sample_count; ++i) {
        const double x = (2.0 * i - denom) / denom;
        out << fmt17(x) << ',' << fmt17(report.u(x)) << '\n';
    }
}

inline void write_summary(const std::string& path, const ProblemFile& file,
                          const OperatorContext& ctx, const KrylovReport& report) {
    std::ofstream out(path);
    out << "method: " << file.method << '\n';
    out << "converged: " << (report.converged ? "true" : "false") << '\n';
    out << "iterations: " << report.iterations << '\n';
    out << "final_residual: " << fmt17(report.residual_history.back()) << '\n';
    if (ctx.problem().self_adjoint && ctx.problem().coercive)
        out << "kappa_bound: " << fmt17(ctx.condition_bound()) << '\n';
    else
        out << "kappa_bound: n/a\n";
    out << "wall_time_seconds: " << fmt17(report.wall_time) << '\n';
}

} // namespace detail

/// `solve` command: run the configured solver and write history.csv,
/// solution.csv and summary.txt into output_dir.
inline int run_solve(const std::string& problem_path, const std::string& output_dir,
                     const CommandOverrides& overrides = {}, std::ostream& err = std::cerr) {
    try {
        ProblemFile file = load_problem_file(problem_path);
        detail::apply_overrides(file, overrides);
        auto built = detail::build_problem(file);
        OperatorContext ctx(std::move(built.problem));
        const auto opts = detail::build_options(file, built.exact);
        const auto report = detail::dispatch(file, ctx, opts);

        std::filesystem::create_directories(output_dir);
        const auto base = std::filesystem::path(output_dir);
        detail::write_history_csv((base / "history.csv").string(), report);
        detail::write_solution_csv((base / "solution.csv").string(), report,
                                   file.sample_count);
        detail::write_summary((base / "summary.txt").string(), file, ctx, report);
        return report.converged ? 0 : 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

/// `check-bound` command: run pcg against the supplied exact solution and
/// verify the energy error stays under the condition-number bound at every
/// iteration. Prints one PASS/FAIL line per iteration.
inline int run_check_bound(const std::string& problem_path,
                           const CommandOverrides& overrides = {},
                           std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        ProblemFile file = load_problem_file(problem_path);
        detail::apply_overrides(file, overrides);
        if (!file.exact_solution)
            throw ProblemFileError("check-bound requires exact_solution");
        auto built = detail::build_problem(file);
        if (!built.problem.self_adjoint || !built.problem.coercive)
            throw ProblemFileError(
                "check-bound requires a self-adjoint, coercive problem");
        if (std::abs((*built.exact)(-1.0)) > 1e-10 || std::abs((*built.exact)(1.0)) > 1e-10)
            throw ProblemFileError("exact_solution must vanish at the endpoints");

        OperatorContext ctx(std::move(built.problem));
        const double kappa = ctx.condition_bound();
        auto opts = detail::build_options(file, built.exact);
        const auto report = pcg(ctx, opts);

        const double rate =
            kappa <= 1.0 + 1e-12 ? 0.0 : (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
        bool all_pass = true;
        out << "kappa_bound: " << detail::fmt17(kappa) << '\n';
        for (std::size_t k = 0; k < report.energy_error_history.size(); ++k) {
            const double base = (k == 0) ? 2.0 : 2.0 * std::pow(rate, static_cast<double>(k));
            const double bound = base + 1e-8;
            const bool pass = report.energy_error_history[k] <= bound;
            all_pass = all_pass && pass;
            out << "iter " << k << ": energy_error=" << detail::fmt17(
                       report.energy_error_history[k])
                << " bound=" << detail::fmt17(bound) << (pass ? " PASS" : " FAIL") << '\n';
        }
        if (report.energy_error_history.empty())
            throw ProblemFileError("energy tracking produced no history");
        return all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace chebkrylov
