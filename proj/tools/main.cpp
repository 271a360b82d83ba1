#include <CLI11.hpp>

#include <chebkrylov/commands.hpp>

#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Operator Krylov solver for two-point boundary value problems on (-1,1)"};
    app.require_subcommand(1);

    std::string problem_path;
    std::string out_dir = ".";
    chebkrylov::CommandOverrides overrides;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("problem", problem_path, "problem description file")->required();
        cmd->add_option("--tol", overrides.tol, "override the residual tolerance");
        cmd->add_option("--max-iter", overrides.max_iter, "override the iteration cap");
        cmd->add_option("--restart", overrides.restart, "override the GMRES restart length");
        cmd->add_option("--method", overrides.method, "override the solver (cg|pcg|minres|gmres)");
    };

    auto* solve = app.add_subcommand(
        "solve", "run the configured solver; write history.csv, solution.csv, summary.txt");
    add_common(solve);
    solve->add_option("--out", out_dir, "output directory (default: current)");

    auto* check = app.add_subcommand(
        "check-bound", "verify the energy error against the condition-number bound");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (solve->parsed()) return chebkrylov::run_solve(problem_path, out_dir, overrides);
    return chebkrylov::run_check_bound(problem_path, overrides);
}
