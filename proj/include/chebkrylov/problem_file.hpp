#pragma once

// Flat key = value problem description files. Expressions are quoted
// strings, lists are comma- or space-separated, '#' starts a comment.
//
//   a = "2+cos(pi*x)"
//   f = "1-x^2"
//   method = pcg
//   tol = 1e-10
//   breakpoints = -1, -0.5, 0.5, 1

#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exprparse.hpp"

namespace chebkrylov {

class ProblemFileError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ProblemFile {
    std::string a = "1";
    std::string b = "0";
    std::string c = "0";
    std::optional<std::string> f;              ///< omitted => manufactured from exact_solution
    std::optional<std::string> exact_solution;
    std::optional<std::vector<double>> breakpoints;
    std::string method;                        ///< cg | pcg | minres | gmres
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::optional<int> restart;   ///< gmres only
    std::optional<int> v0_degree; ///< cg only
    int sample_count = 501;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

// Strip a '#' comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        else if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline std::string unquote(const std::string& value, int line_no) {
    if (value.size() < 2 || value.front() != '"' || value.back() != '"')
        throw ProblemFileError("line " + std::to_string(line_no) +
                               ": expression values must be double-quoted");
    return value.substr(1, value.size() - 2);
}

inline double parse_number(const std::string& value, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ProblemFileError("line " + std::to_string(line_no) + ": invalid number '" +
                               value + "'");
    }
}

inline int parse_int(const std::string& value, int line_no) {
    const double v = parse_number(value, line_no);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ProblemFileError("line " + std::to_string(line_no) + ": expected an integer, got '" +
                               value + "'");
    return i;
}

inline std::vector<double> parse_list(std::string value, int line_no) {
    for (char& ch : value)
        if (ch == ',') ch = ' ';
    std::istringstream stream(value);
    std::vector<double> out;
    std::string token;
    while (stream >> token) out.push_back(parse_number(token, line_no));
    return out;
}

inline void check_expression(const std::string& text, const std::string& key) {
    try {
        (void)parse(text);
    } catch (const ParseError& e) {
        throw ProblemFileError("expression for '" + key + "' does not parse: " + e.what());
    }
}

} // namespace detail

/// Parse and validate a problem file. Throws ProblemFileError on any
/// malformed line, unparseable expression, or inconsistent option set.
inline ProblemFile parse_problem_file(std::istream& in) {
    ProblemFile file;
    bool have_method = false;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = detail::trim(detail::strip_comment(raw));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ProblemFileError("line " + std::to_string(line_no) +
                                   ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (value.empty())
            throw ProblemFileError("line " + std::to_string(line_no) + ": missing value for '" +
                                   key + "'");

        if (key == "a") file.a = detail::unquote(value, line_no);
        else if (key == "b") file.b = detail::unquote(value, line_no);
        else if (key == "c") file.c = detail::unquote(value, line_no);
        else if (key == "f") file.f = detail::unquote(value, line_no);
        else if (key == "exact_solution") file.exact_solution = detail::unquote(value, line_no);
        else if (key == "breakpoints") file.breakpoints = detail::parse_list(value, line_no);
        else if (key == "method") { file.method = value; have_method = true; }
        else if (key == "tol") file.tol = detail::parse_number(value, line_no);
        else if (key == "max_iter") file.max_iter = detail::parse_int(value, line_no);
        else if (key == "restart") file.restart = detail::parse_int(value, line_no);
        else if (key == "v0_degree") file.v0_degree = detail::parse_int(value, line_no);
        else if (key == "sample_count") file.sample_count = detail::parse_int(value, line_no);
        else
            throw ProblemFileError("line " + std::to_string(line_no) + ": unknown key '" + key +
                                   "'");
    }
    if (!have_method) throw ProblemFileError("missing required key 'method'");
    return file;
}

/// Consistency checks shared by every command (run again after CLI overrides).
inline void validate_problem_file(const ProblemFile& file) {
    if (file.method != "cg" && file.method != "pcg" && file.method != "minres" &&
        file.method != "gmres")
        throw ProblemFileError("method must be one of cg, pcg, minres, gmres (got '" +
                               file.method + "')");
    if (file.restart && file.method != "gmres")
        throw ProblemFileError("restart invalid for " + file.method);
    if (file.v0_degree && file.method != "cg")
        throw ProblemFileError("v0_degree invalid for " + file.method);
    if (file.method == "cg" && !file.v0_degree)
        throw ProblemFileError("method cg requires v0_degree");
    if (!file.f && !file.exact_solution)
        throw ProblemFileError("either f or exact_solution must be given");
    if (file.tol && !(*file.tol > 0.0 && *file.tol < 1.0))
        throw ProblemFileError("tol must lie in (0,1)");
    if (file.max_iter && *file.max_iter < 1) throw ProblemFileError("max_iter must be >= 1");
    if (file.restart && *file.restart < 1) throw ProblemFileError("restart must be >= 1");
    if (file.v0_degree && *file.v0_degree < 2) throw ProblemFileError("v0_degree must be >= 2");
    if (file.sample_count < 2) throw ProblemFileError("sample_count must be >= 2");

    detail::check_expression(file.a, "a");
    detail::check_expression(file.b, "b");
    detail::check_expression(file.c, "c");
    if (file.f) detail::check_expression(*file.f, "f");
    if (file.exact_solution) detail::check_expression(*file.exact_solution, "exact_solution");

    if (file.breakpoints) {
        const auto& bp = *file.breakpoints;
        if (bp.size() < 2 || std::abs(bp.front() + 1.0) > 1e-12 ||
            std::abs(bp.back() - 1.0) > 1e-12)
            throw ProblemFileError("breakpoints must start at -1 and end at 1");
        for (std::size_t i = 0; i + 1 < bp.size(); ++i)
            if (!(bp[i] < bp[i + 1]))
                throw ProblemFileError("breakpoints must be strictly increasing");
    } else {
        // kinked expressions cannot be resolved on a single piece
        for (const auto* text : {&file.a, &file.b, &file.c}) {
            if (contains_nonsmooth(parse(*text)))
                throw ProblemFileError(
                    "expression '" + *text +
                    "' contains abs/sign; breakpoints at its kinks are required");
        }
        if (file.f && contains_nonsmooth(parse(*file.f)))
            throw ProblemFileError("f contains abs/sign; breakpoints are required");
        if (file.exact_solution && contains_nonsmooth(parse(*file.exact_solution)))
            throw ProblemFileError("exact_solution contains abs/sign; breakpoints are required");
    }
}

inline ProblemFile load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ProblemFileError("cannot open problem file '" + path + "'");
    auto file = parse_problem_file(in);
    validate_problem_file(file);
    return file;
}

} // namespace chebkrylov
