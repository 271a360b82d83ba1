#include <catch2/catch.hpp>

#include <chebkrylov/commands.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace chebkrylov;
namespace fs = std::filesystem;

namespace {

const fs::path kProblems = CHEBKRYLOV_PROBLEMS_DIR;

fs::path temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("chebkrylov_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// csv line without its trailing (wall-time) column
std::string drop_last_column(const std::string& line) {
    const auto pos = line.rfind(',');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

fs::path write_problem(const std::string& tag, const std::string& body) {
    const auto path = fs::temp_directory_path() / ("chebkrylov_prob_" + tag + ".prob");
    std::ofstream out(path);
    out << body;
    return path;
}

} // namespace

TEST_CASE("problem file parsing") {
    SECTION("round trip of a complete file") {
        std::istringstream in(R"prob(# comment line
a = "2+cos(pi*x)"   # trailing comment
f = "1-x^2"
method = gmres
restart = 5
tol = 1e-8
max_iter = 300
sample_count = 101
breakpoints = -1, 0.25, 1
)prob");
        const auto file = parse_problem_file(in);
        CHECK(file.a == "2+cos(pi*x)");
        CHECK(file.f == "1-x^2");
        CHECK(file.method == "gmres");
        CHECK(file.restart == 5);
        CHECK(file.tol == 1e-8);
        CHECK(file.max_iter == 300);
        CHECK(file.sample_count == 101);
        REQUIRE(file.breakpoints);
        CHECK(file.breakpoints->size() == 3);
        validate_problem_file(file);
    }
    SECTION("missing method") {
        std::istringstream in("a = \"1\"\nf = \"x\"\n");
        CHECK_THROWS_AS(parse_problem_file(in), ProblemFileError);
    }
    SECTION("restart is rejected outside gmres") {
        std::istringstream in("f = \"x\"\nmethod = cg\nv0_degree = 10\nrestart = 5\n");
        auto file = parse_problem_file(in);
        CHECK_THROWS_WITH(validate_problem_file(file),
                          Catch::Contains("restart invalid for cg"));
    }
    SECTION("v0_degree only with cg, and required for cg") {
        std::istringstream in1("f = \"x\"\nmethod = pcg\nv0_degree = 10\n");
        auto f1 = parse_problem_file(in1);
        CHECK_THROWS_AS(validate_problem_file(f1), ProblemFileError);
        std::istringstream in2("f = \"x\"\nmethod = cg\n");
        auto f2 = parse_problem_file(in2);
        CHECK_THROWS_AS(validate_problem_file(f2), ProblemFileError);
    }
    SECTION("nonsmooth expressions demand breakpoints") {
        std::istringstream in("f = \"sign(x)\"\nmethod = pcg\n");
        auto file = parse_problem_file(in);
        CHECK_THROWS_WITH(validate_problem_file(file), Catch::Contains("breakpoints"));
    }
    SECTION("breakpoints must span [-1,1]") {
        std::istringstream in("f = \"x\"\nmethod = pcg\nbreakpoints = -1, 0.5\n");
        auto file = parse_problem_file(in);
        CHECK_THROWS_AS(validate_problem_file(file), ProblemFileError);
    }
    SECTION("expression errors are reported with the key") {
        std::istringstream in("f = \"sin(\"\nmethod = pcg\n");
        auto file = parse_problem_file(in);
        CHECK_THROWS_WITH(validate_problem_file(file), Catch::Contains("'f'"));
    }
}

TEST_CASE("solve command on the model problem") {
    const auto out_dir = temp_dir("laplacian");
    std::ostringstream err;
    const int code = run_solve((kProblems / "laplacian.prob").string(), out_dir.string(), {}, err);
    INFO(err.str());
    CHECK(code == 0);

    const auto history = read_lines(out_dir / "history.csv");
    REQUIRE(history.size() == 3); // header + iterations 0 and 1
    CHECK(history[0] == "iter,residual_norm,energy_error,cumulative_seconds");
    // final energy error below 1e-12
    std::istringstream last(history[2]);
    std::string field;
    std::getline(last, field, ','); // iter
    CHECK(field == "1");
    std::getline(last, field, ','); // residual
    std::getline(last, field, ','); // energy error
    CHECK(std::stod(field) < 1e-12);

    const auto solution = read_lines(out_dir / "solution.csv");
    REQUIRE(solution.size() == 502); // header + 501 samples
    {
        std::istringstream first(solution[1]);
        std::string x, u;
        std::getline(first, x, ',');
        std::getline(first, u, ',');
        CHECK(std::stod(x) == -1.0);
        CHECK(std::abs(std::stod(u)) < 1e-9);
        std::istringstream lastrow(solution.back());
        std::getline(lastrow, x, ',');
        std::getline(lastrow, u, ',');
        CHECK(std::stod(x) == 1.0);
        CHECK(std::abs(std::stod(u)) < 1e-9);
    }

    const auto summary = read_lines(out_dir / "summary.txt");
    CHECK(summary[0] == "method: pcg");
    CHECK(summary[1] == "converged: true");
    CHECK(summary[2] == "iterations: 1");
}

TEST_CASE("solve command reports the condition bound for a benchmark file") {
    const auto out_dir = temp_dir("e1");
    const int code = run_solve((kProblems / "e1.prob").string(), out_dir.string());
    CHECK(code == 0);
    bool found = false;
    for (const auto& line : read_lines(out_dir / "summary.txt")) {
        if (line.rfind("kappa_bound: ", 0) == 0) {
            found = true;
            CHECK(std::stod(line.substr(13)) == Approx(3.0).margin(1e-12));
        }
    }
    CHECK(found);
}

TEST_CASE("solve command exit codes") {
    SECTION("input error for an invalid override combination") {
        std::ostringstream err;
        CommandOverrides overrides;
        overrides.restart = 5;
        const int code = run_solve((kProblems / "cg_laplacian.prob").string(),
                                   temp_dir("bad").string(), overrides, err);
        CHECK(code == 1);
        CHECK(err.str().find("restart invalid for cg") != std::string::npos);
    }
    SECTION("non-convergence maps to exit 2") {
        std::ostringstream err;
        CommandOverrides overrides;
        overrides.max_iter = 1;
        const int code = run_solve((kProblems / "e1.prob").string(),
                                   temp_dir("stall").string(), overrides, err);
        CHECK(code == 2);
    }
    SECTION("missing file maps to exit 1") {
        std::ostringstream err;
        const int code = run_solve("/nonexistent/problem.prob", temp_dir("none").string(),
                                   {}, err);
        CHECK(code == 1);
    }
}

TEST_CASE("solve outputs are deterministic modulo the timing column") {
    const auto dir1 = temp_dir("det1");
    const auto dir2 = temp_dir("det2");
    REQUIRE(run_solve((kProblems / "e3.prob").string(), dir1.string()) == 0);
    REQUIRE(run_solve((kProblems / "e3.prob").string(), dir2.string()) == 0);
    const auto h1 = read_lines(dir1 / "history.csv");
    const auto h2 = read_lines(dir2 / "history.csv");
    REQUIRE(h1.size() == h2.size());
    for (std::size_t i = 0; i < h1.size(); ++i)
        CHECK(drop_last_column(h1[i]) == drop_last_column(h2[i]));
    CHECK(read_lines(dir1 / "solution.csv") == read_lines(dir2 / "solution.csv"));
}

TEST_CASE("check-bound command") {
    SECTION("manufactured benchmark passes at every iteration") {
        std::ostringstream out, err;
        const int code =
            run_check_bound((kProblems / "e3_manufactured.prob").string(), {}, out, err);
        INFO(err.str());
        CHECK(code == 0);
        CHECK(out.str().find("FAIL") == std::string::npos);
        CHECK(out.str().find("PASS") != std::string::npos);
    }
    SECTION("degenerate bound for the Laplacian") {
        std::ostringstream out, err;
        const int code = run_check_bound((kProblems / "laplacian.prob").string(), {}, out, err);
        CHECK(code == 0);
        CHECK(out.str().find("FAIL") == std::string::npos);
    }
    SECTION("non-coercive problem is rejected") {
        const auto path = write_problem("noncoercive", R"prob(a = "exp(x)"
c = "-10"
f = "sin(3*pi*x)"
exact_solution = "sin(pi*x)"
method = pcg
)prob");
        std::ostringstream out, err;
        const int code = run_check_bound(path.string(), {}, out, err);
        CHECK(code == 1);
        CHECK(err.str().find("coercive") != std::string::npos);
    }
    SECTION("missing exact solution is rejected") {
        std::ostringstream out, err;
        const int code = run_check_bound((kProblems / "e1.prob").string(), {}, out, err);
        CHECK(code == 1);
        CHECK(err.str().find("exact_solution") != std::string::npos);
    }
}

TEST_CASE("shipped problem files all solve") {
    struct Entry {
        const char* file;
        bool kappa_is_three;
    };
    const Entry entries[] = {{"pw_e1.prob", true},
                             {"pw_e2.prob", true},
                             {"pw_e3.prob", true},
                             {"pw_sign.prob", true},
                             {"gmres_advection.prob", false},
                             {"minres_lambda10.prob", false},
                             {"e2.prob", true},
                             {"cg_laplacian.prob", false}};
    for (const auto& entry : entries) {
        INFO(entry.file);
        const auto out_dir = temp_dir(std::string("ship_") + entry.file);
        std::ostringstream err;
        const int code = run_solve((kProblems / entry.file).string(), out_dir.string(), {}, err);
        INFO(err.str());
        CHECK(code == 0);
        for (const auto& line : read_lines(out_dir / "summary.txt")) {
            if (line.rfind("kappa_bound: ", 0) == 0 && entry.kappa_is_three)
                CHECK(std::stod(line.substr(13)) == Approx(3.0).margin(1e-4));
        }
    }
}

TEST_CASE("manufactured right-hand side reproduces the exact solution") {
    const auto out_dir = temp_dir("manufactured");
    const int code = run_solve((kProblems / "e3_manufactured.prob").string(), out_dir.string());
    CHECK(code == 0);
    const auto lines = read_lines(out_dir / "solution.csv");
    double max_err = 0.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::string xs, us;
        std::getline(row, xs, ',');
        std::getline(row, us, ',');
        const double x = std::stod(xs);
        max_err = std::max(max_err,
                           std::abs(std::stod(us) - std::sin(3.14159265358979323846 * x)));
    }
    CHECK(max_err < 1e-9);
}
