#pragma once

// The two-point boundary value problem -(a u')' + b u' + c u = f on (-1,1)
// with u(±1) = 0, expressed through operator-function products: the
// differential operator, its bilinear form, the indefinite-integral
// preconditioner and its adjoint, the zero-mean and polynomial projections,
// and the right-hand-side correction that makes general f admissible.

#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chebfun.hpp"

namespace chebkrylov {

/// L2 operator norm of the indefinite integration operator on (-1,1).
inline constexpr double kPreconditionerNorm = 4.0 / std::numbers::pi;

/// Boundary values of test functions must vanish to this tolerance before a
/// bilinear form is formed.
inline constexpr double kBoundaryTol = 1e-10;

class AncillaryBreakdownError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NotPositiveDefiniteError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Problem data: diffusion a, advection b, reaction c, right-hand side f.
/// self_adjoint asserts b == 0; coercive asserts a > 0 and c >= 0.
struct BvpProblem {
    PiecewiseFun a = PiecewiseFun::constant(1.0);
    PiecewiseFun b;
    PiecewiseFun c;
    PiecewiseFun f;
    bool self_adjoint = false;
    bool coercive = false;
};

/// Integral from -1 to x; smooths one derivative order and pins the value
/// at -1 to zero, which is how boundary conditions enter the Krylov space.
inline PiecewiseFun apply_preconditioner(const PiecewiseFun& p, double tol = kDefaultTol) {
    return indefinite_integral(p, tol);
}

/// Adjoint of the preconditioner: integral from x to 1.
inline PiecewiseFun apply_preconditioner_adjoint(const PiecewiseFun& p,
                                                 double tol = kDefaultTol) {
    return adjoint_integral(p, tol);
}

/// Orthogonal projection onto zero-mean functions: p minus its mean.
inline PiecewiseFun project_zero_mean(const PiecewiseFun& p) {
    const double m = mean(p);
    std::vector<ChebSeries> pieces = p.pieces();
    for (auto& s : pieces) s.coeffs[0] -= m;
    return PiecewiseFun(p.breakpoints(), std::move(pieces));
}

namespace detail {

struct SampleStats {
    double max_abs = 0.0;
    double min_value = 0.0;
    double min_abs = 0.0;
};

// Extrema estimated on a dense Chebyshev grid (2049 points per piece).
inline SampleStats dense_sample_stats(const PiecewiseFun& p, std::size_t per_piece = 2049) {
    SampleStats st;
    st.min_value = std::numeric_limits<double>::infinity();
    st.min_abs = std::numeric_limits<double>::infinity();
    const auto t = cheb_points(per_piece);
    for (const auto& s : p.pieces()) {
        for (double tk : t) {
            const double x = 0.5 * (s.lo * (1.0 - tk) + s.hi * (1.0 + tk));
            const double v = eval_series(s, x);
            st.max_abs = std::max(st.max_abs, std::abs(v));
            st.min_value = std::min(st.min_value, v);
            st.min_abs = std::min(st.min_abs, std::abs(v));
        }
    }
    return st;
}

} // namespace detail

/// Sampled sup-norm estimate (2049 Chebyshev points per piece).
inline double sup_norm_estimate(const PiecewiseFun& p) {
    return detail::dense_sample_stats(p).max_abs;
}

struct AncillaryResult {
    PiecewiseFun correction; ///< zero-mean v2 such that the corrected rhs is admissible
    double eta = 0.0;        ///< response of the accepted trial function
    double rho = 0.0;        ///< boundary defect of the original right-hand side
};

struct PreparedRhs {
    PiecewiseFun rhs;        ///< projected starting residual for the Krylov drivers
    PiecewiseFun correction; ///< v2 from the ancillary solve
    PiecewiseFun reduced_f;  ///< f minus the correction's contribution
};

/// Immutable problem context shared by all solvers. Holds the chop tolerance
/// and a lazily built cache of orthonormal polynomial bases for the
/// degree-bounded Dirichlet space.
class OperatorContext {
  public:
    explicit OperatorContext(BvpProblem problem, double tol = kDefaultTol)
        : problem_(std::move(problem)), tol_(tol) {
        if (!(tol_ > 0.0)) throw std::invalid_argument("OperatorContext: tol must be positive");
        if (problem_.self_adjoint && sup_norm_estimate(problem_.b) >= 1e-13)
            throw std::invalid_argument(
                "OperatorContext: self_adjoint asserted but b is not identically zero");
    }

    const BvpProblem& problem() const { return problem_; }
    double tol() const { return tol_; }

    /// The differential operator: -(a u')' + b u' + c u. Expects continuous u.
    PiecewiseFun apply_operator(const PiecewiseFun& u) const {
        const auto du = differentiate(u, tol_);
        PiecewiseFun result = scale(-1.0, differentiate(multiply(problem_.a, du, tol_), tol_));
        if (!is_zero(problem_.b)) result = result + multiply(problem_.b, du, tol_);
        if (!is_zero(problem_.c)) result = result + multiply(problem_.c, u, tol_);
        return chop(result, tol_);
    }

    /// Weak-form pairing of phi and psi; both must vanish at ±1.
    double bilinear_form(const PiecewiseFun& phi, const PiecewiseFun& psi) const {
        check_boundary(phi, "bilinear_form: phi");
        check_boundary(psi, "bilinear_form: psi");
        const auto dphi = differentiate(phi, tol_);
        const auto dpsi = differentiate(psi, tol_);
        double value = inner_product(multiply(problem_.a, dphi, tol_), dpsi);
        if (!is_zero(problem_.b)) value += inner_product(multiply(problem_.b, dphi, tol_), psi);
        if (!is_zero(problem_.c)) value += inner_product(multiply(problem_.c, phi, tol_), psi);
        return value;
    }

    /// The composed self-map on zero-mean functions: project, integrate,
    /// differentiate through the operator, integrate back, project.
    PiecewiseFun apply_preconditioned_operator(const PiecewiseFun& p) const {
        const auto w = project_zero_mean(p);
        const auto u = apply_preconditioner(w, tol_);
        const auto lu = apply_operator(u);
        const auto z = apply_preconditioner_adjoint(lu, tol_);
        return chop(project_zero_mean(z), tol_);
    }

    /// Condition-number bound (sup a + sup c * ||R||^2) / inf a from dense
    /// sampling; requires the self-adjoint and coercive flags.
    double condition_bound() const {
        if (!problem_.self_adjoint || !problem_.coercive)
            throw std::logic_error(
                "condition_bound: requires a self-adjoint, coercive problem");
        const auto a_stats = detail::dense_sample_stats(problem_.a);
        const auto c_stats = detail::dense_sample_stats(problem_.c);
        const double numerator =
            a_stats.max_abs + c_stats.max_abs * kPreconditionerNorm * kPreconditionerNorm;
        return numerator / a_stats.min_abs;
    }

    /// Rank-one right-hand-side correction: find zero-mean v2 with
    /// [R R* L R v2](1) = [R R* f](1) by trying a fixed ladder of zero-mean
    /// trial functions and scaling the first with a usable response.
    AncillaryResult solve_ancillary() const {
        AncillaryResult result;
        const double fnorm = norm_l2(problem_.f);
        result.rho = boundary_functional(problem_.f);
        if (std::abs(result.rho) <= tol_ * fnorm) return result;

        const std::vector<std::pair<std::string, PiecewiseFun>> candidates = trial_ladder();
        for (const auto& [name, w] : candidates) {
            const double eta = boundary_functional(apply_operator(apply_preconditioner(w, tol_)));
            if (std::abs(eta) > 1e-10 * fnorm) {
                result.eta = eta;
                result.correction = project_zero_mean(scale(result.rho / eta, w));
                return result;
            }
        }
        std::ostringstream msg;
        msg << "solve_ancillary: all trial functions gave a vanishing response (tried";
        for (const auto& [name, w] : candidates) msg << ' ' << name;
        msg << ')';
        throw AncillaryBreakdownError(msg.str());
    }

    /// Ancillary solve plus the projected starting residual for the solvers.
    PreparedRhs prepare_rhs() const {
        PreparedRhs out;
        const auto anc = solve_ancillary();
        out.correction = anc.correction;
        out.reduced_f = problem_.f;
        if (!is_zero(anc.correction))
            out.reduced_f =
                problem_.f - apply_operator(apply_preconditioner(anc.correction, tol_));
        out.rhs = project_zero_mean(apply_preconditioner_adjoint(out.reduced_f, tol_));
        out.rhs = chop(out.rhs, tol_);
        return out;
    }

    /// L2-orthogonal projection onto polynomials of degree <= n vanishing
    /// at ±1. Requires n >= 2.
    PiecewiseFun project_dirichlet_poly(const PiecewiseFun& p, int n) const {
        const auto& basis = dirichlet_poly_basis(n);
        PiecewiseFun result;
        for (const auto& e : basis) result = axpy(inner_product(p, e), e, result, tol_);
        return chop(result, tol_);
    }

    /// Orthonormal basis backing project_dirichlet_poly, built once per degree.
    const std::vector<PiecewiseFun>& dirichlet_poly_basis(int n) const {
        if (n < 2)
            throw std::invalid_argument(
                "project_dirichlet_poly: degree must be at least 2");
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = basis_cache_.find(n);
        if (it != basis_cache_.end()) return it->second;
        return basis_cache_.emplace(n, build_basis(n)).first->second;
    }

  private:
    void check_boundary(const PiecewiseFun& phi, const char* who) const {
        const double slack = kBoundaryTol * std::max(1.0, coeff_scale(phi));
        if (std::abs(phi(-1.0)) > slack || std::abs(phi(1.0)) > slack)
            throw std::invalid_argument(std::string(who) +
                                        " must vanish at the endpoints");
    }

    // Value of R(R*(p)) at x = 1, the admissibility functional.
    double boundary_functional(const PiecewiseFun& p) const {
        return apply_preconditioner(apply_preconditioner_adjoint(p, tol_), tol_)(1.0);
    }

    std::vector<std::pair<std::string, PiecewiseFun>> trial_ladder() const {
        std::vector<std::pair<std::string, PiecewiseFun>> ladder;
        ladder.emplace_back("x", PiecewiseFun::from_coeffs({0.0, 1.0}));
        ladder.emplace_back("x^2-1/3", PiecewiseFun::from_coeffs({1.0 / 6.0, 0.0, 0.5}));
        ladder.emplace_back("x^3-(3/5)x",
                            PiecewiseFun::from_coeffs({0.0, 0.15, 0.0, 0.25}));
        ladder.emplace_back("sin(pi*x)",
                            construct_adaptive(
                                [](double x) { return std::sin(std::numbers::pi * x); },
                                {-1.0, 1.0}, tol_));
        return ladder;
    }

    std::vector<PiecewiseFun> build_basis(int n) const {
        // (1-x^2) T_k, k = 0..n-2, orthonormalized by modified Gram-Schmidt
        // with one re-orthogonalization pass.
        const auto weight = PiecewiseFun::from_coeffs({0.5, 0.0, -0.5});
        std::vector<PiecewiseFun> basis;
        basis.reserve(n - 1);
        for (int k = 0; k + 2 <= n; ++k) {
            std::vector<double> unit(k + 1, 0.0);
            unit[k] = 1.0;
            PiecewiseFun v = multiply(weight, PiecewiseFun::from_coeffs(std::move(unit)), tol_);
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& e : basis) v = axpy(-inner_product(v, e), e, v, tol_);
            const double nrm = norm_l2(v);
            if (nrm <= 0.0)
                throw std::runtime_error("project_dirichlet_poly: basis degenerated");
            basis.push_back(scale(1.0 / nrm, v));
        }
        return basis;
    }

    BvpProblem problem_;
    double tol_;
    mutable std::mutex cache_mutex_;
    mutable std::map<int, std::vector<PiecewiseFun>> basis_cache_;
};

} // namespace chebkrylov
