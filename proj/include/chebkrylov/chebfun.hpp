#pragma once

// Adaptive Chebyshev function algebra on [-1,1], smooth and piecewise.
// Functions are stored as Chebyshev coefficient expansions per subinterval;
// all calculus (integration, differentiation, products, quadrature) operates
// on the coefficients directly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace chebkrylov {

/// Relative coefficient tolerance used by adaptive construction and chopping.
inline constexpr double kDefaultTol = 1e-15;

/// Largest polynomial degree allowed on a single piece.
inline constexpr int kMaxDegree = 1 << 16;

/// One Chebyshev coefficient expansion on a subinterval [lo, hi].
/// coeffs[k] multiplies T_k of the affinely mapped argument.
struct ChebSeries {
    std::vector<double> coeffs{0.0};
    double lo = -1.0;
    double hi = 1.0;
    bool resolved = true;

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
    double half_width() const { return 0.5 * (hi - lo); }
};

namespace detail {

inline std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

// Unnormalized DCT-I of n+1 points (FFTW REDFT00). Plan creation is not
// thread-safe in FFTW, so it happens under a lock; execution does not.
inline void dct_type1(std::vector<double>& data) {
    const auto count = data.size();
    std::vector<double> out(count);
    fftw_plan plan = nullptr;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        plan = fftw_plan_r2r_1d(static_cast<int>(count), data.data(), out.data(),
                                FFTW_REDFT00, FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw std::runtime_error("chebkrylov: FFTW plan creation failed");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(plan);
    }
    data = std::move(out);
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace detail

/// count Chebyshev points of the second kind on [-1,1], ascending.
inline std::vector<double> cheb_points(std::size_t count) {
    if (count == 0) throw std::invalid_argument("cheb_points: count must be positive");
    if (count == 1) return {0.0};
    const std::size_t n = count - 1;
    std::vector<double> x(count);
    for (std::size_t k = 0; k <= n; ++k)
        x[k] = -std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    x.front() = -1.0;
    x.back() = 1.0;
    return x;
}

/// Chebyshev coefficients of the interpolant through values sampled at
/// cheb_points(values.size()).
inline std::vector<double> values_to_coeffs(std::span<const double> values) {
    const std::size_t count = values.size();
    if (count == 0) throw std::invalid_argument("values_to_coeffs: empty input");
    if (count == 1) return {values[0]};
    const std::size_t n = count - 1;
    // REDFT00 indexes by cos(pi*k/n); our grid is ascending, so reverse.
    std::vector<double> work(count);
    for (std::size_t k = 0; k <= n; ++k) work[k] = values[n - k];
    detail::dct_type1(work);
    const double scale = 1.0 / static_cast<double>(n);
    for (double& c : work) c *= scale;
    work.front() *= 0.5;
    work.back() *= 0.5;
    return work;
}

/// Values of the expansion at cheb_points(coeffs.size()); inverse of
/// values_to_coeffs up to rounding.
inline std::vector<double> coeffs_to_values(std::span<const double> coeffs) {
    const std::size_t count = coeffs.size();
    if (count == 0) throw std::invalid_argument("coeffs_to_values: empty input");
    if (count == 1) return {coeffs[0]};
    const std::size_t n = count - 1;
    std::vector<double> work(count);
    work[0] = coeffs[0];
    work[n] = coeffs[n];
    for (std::size_t j = 1; j < n; ++j) work[j] = 0.5 * coeffs[j];
    detail::dct_type1(work);
    std::reverse(work.begin(), work.end());
    return work;
}

/// Clenshaw evaluation of a Chebyshev expansion at t in [-1,1].
inline double clenshaw(std::span<const double> coeffs, double t) {
    const std::size_t m = coeffs.size();
    if (m == 1) return coeffs[0];
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = m - 1; k >= 1; --k) {
        const double next = 2.0 * t * b1 - b2 + coeffs[k];
        b2 = b1;
        b1 = next;
    }
    // Keep this association: setting coeffs[0] = anchor - (t*b1 - b2) then
    // re-evaluating reproduces the anchor exactly when anchor == 0.
    return (t * b1 - b2) + coeffs[0];
}

namespace detail {

inline double map_to_reference(const ChebSeries& s, double x) {
    return (2.0 * x - s.lo - s.hi) / (s.hi - s.lo);
}

inline double eval_series(const ChebSeries& s, double x) {
    return clenshaw(s.coeffs, map_to_reference(s, x));
}

// Trailing truncation: drop coefficients below tol * max|coeff| from the end.
inline std::vector<double> chop_coeffs(std::vector<double> c, double tol) {
    const double amax = max_abs(c);
    if (amax == 0.0) return {0.0};
    std::size_t len = c.size();
    while (len > 1 && std::abs(c[len - 1]) < tol * amax) --len;
    c.resize(len);
    return c;
}

// Plateau test used by adaptive construction: the max of the trailing window
// of size max(3, len/8) (never the whole array) must fall below tol * max|coeff|.
inline bool tail_resolved(std::span<const double> c, double tol) {
    const double amax = max_abs(c);
    if (amax == 0.0) return true;
    const std::size_t len = c.size();
    if (len == 1) return true;
    std::size_t m = std::max<std::size_t>(3, len / 8);
    m = std::min(m, len - 1);
    double tail = 0.0;
    for (std::size_t k = len - m; k < len; ++k) tail = std::max(tail, std::abs(c[k]));
    return tail < tol * amax;
}

} // namespace detail

/// Breakpoints plus one ChebSeries per subinterval; the pieces tile [-1,1].
/// A single-piece function is the smooth case.
class PiecewiseFun {
  public:
    /// The zero function on [-1,1].
    PiecewiseFun() : breakpoints_{-1.0, 1.0}, pieces_{ChebSeries{}} {}

    PiecewiseFun(std::vector<double> breakpoints, std::vector<ChebSeries> pieces)
        : breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)) {
        validate();
    }

    static PiecewiseFun constant(double value) {
        PiecewiseFun p;
        p.pieces_[0].coeffs = {value};
        return p;
    }

    /// Smooth function on [-1,1] from global Chebyshev coefficients.
    static PiecewiseFun from_coeffs(std::vector<double> coeffs) {
        PiecewiseFun p;
        p.pieces_[0].coeffs = std::move(coeffs);
        return p;
    }

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<ChebSeries>& pieces() const { return pieces_; }
    std::vector<ChebSeries>& pieces() { return pieces_; }
    std::size_t piece_count() const { return pieces_.size(); }

    bool resolved() const {
        return std::all_of(pieces_.begin(), pieces_.end(),
                           [](const ChebSeries& s) { return s.resolved; });
    }

    int max_degree() const {
        int d = 0;
        for (const auto& s : pieces_) d = std::max(d, s.degree());
        return d;
    }

    /// Index of the piece containing x; interior breakpoints resolve to the
    /// right-hand piece, x = 1 to the last piece.
    std::size_t piece_index(double x) const {
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
        std::size_t idx = static_cast<std::size_t>(it - breakpoints_.begin());
        if (idx == 0) return 0;
        return std::min(idx - 1, pieces_.size() - 1);
    }

    double operator()(double x) const {
        if (x < -1.0 || x > 1.0)
            throw std::domain_error("PiecewiseFun: evaluation outside [-1,1]");
        return detail::eval_series(pieces_[piece_index(x)], x);
    }

  private:
    void validate() const {
        if (breakpoints_.size() < 2 || pieces_.size() + 1 != breakpoints_.size())
            throw std::invalid_argument("PiecewiseFun: pieces must tile the breakpoints");
        if (std::abs(breakpoints_.front() + 1.0) > 1e-12 ||
            std::abs(breakpoints_.back() - 1.0) > 1e-12)
            throw std::invalid_argument("PiecewiseFun: domain must be [-1,1]");
        for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
            if (!(breakpoints_[i] < breakpoints_[i + 1]))
                throw std::invalid_argument("PiecewiseFun: breakpoints must increase");
            if (pieces_[i].lo != breakpoints_[i] || pieces_[i].hi != breakpoints_[i + 1])
                throw std::invalid_argument("PiecewiseFun: piece domains must match breakpoints");
            if (pieces_[i].coeffs.empty())
                throw std::invalid_argument("PiecewiseFun: empty coefficient list");
        }
    }

    std::vector<double> breakpoints_;
    std::vector<ChebSeries> pieces_;
};

inline double evaluate(const PiecewiseFun& p, double x) { return p(x); }

inline bool is_zero(const PiecewiseFun& p) {
    for (const auto& s : p.pieces())
        if (detail::max_abs(s.coeffs) != 0.0) return false;
    return true;
}

/// Largest coefficient magnitude across pieces; a cheap scale proxy.
inline double coeff_scale(const PiecewiseFun& p) {
    double m = 0.0;
    for (const auto& s : p.pieces()) m = std::max(m, detail::max_abs(s.coeffs));
    return m;
}

inline PiecewiseFun chop(const PiecewiseFun& p, double tol) {
    std::vector<ChebSeries> pieces = p.pieces();
    for (auto& s : pieces) s.coeffs = detail::chop_coeffs(std::move(s.coeffs), tol);
    return PiecewiseFun(p.breakpoints(), std::move(pieces));
}

/// Adaptive construction: sample at Chebyshev grids of size 2^j+1 (j = 3,4,...)
/// on each piece until the trailing-coefficient envelope falls below
/// tol * max|coeff|, then chop. A piece that hits the degree cap is marked
/// resolved = false and the partial result is returned; the caller decides
/// whether to proceed.
///
/// A sampler with a jump located exactly on a breakpoint is sampled at its
/// one-sided limits there: the endpoint value is replaced by a probe taken a
/// few ulps inside the piece whenever the two disagree materially. Smooth
/// samplers keep their exact endpoint values.
inline PiecewiseFun construct_adaptive(const std::function<double(double)>& sampler,
                                       std::vector<double> breakpoints,
                                       double tol = kDefaultTol) {
    if (!(tol > 0.0)) throw std::invalid_argument("construct_adaptive: tol must be positive");
    if (breakpoints.size() < 2)
        throw std::invalid_argument("construct_adaptive: need breakpoints -1 and 1");
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.front() = -1.0;
    breakpoints.back() = 1.0;

    const auto one_sided = [&sampler](double at, double inside_probe) {
        const double exact = sampler(at);
        const double probe = sampler(inside_probe);
        const double scale = std::max({1.0, std::abs(exact), std::abs(probe)});
        return std::abs(exact - probe) > 1e-6 * scale ? probe : exact;
    };

    std::vector<ChebSeries> pieces;
    pieces.reserve(breakpoints.size() - 1);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double lo = breakpoints[i];
        const double hi = breakpoints[i + 1];
        const double delta = 4.0 * std::numeric_limits<double>::epsilon() *
                             std::max({std::abs(lo), std::abs(hi), hi - lo});
        const double lo_value = one_sided(lo, lo + delta);
        const double hi_value = one_sided(hi, hi - delta);
        ChebSeries piece;
        piece.lo = lo;
        piece.hi = hi;
        piece.resolved = false;
        for (int j = 3; (1 << j) <= kMaxDegree; ++j) {
            const std::size_t count = (1u << j) + 1;
            const auto t = cheb_points(count);
            std::vector<double> values(count);
            values.front() = lo_value;
            values.back() = hi_value;
            for (std::size_t k = 1; k + 1 < count; ++k) {
                const double x = 0.5 * (lo * (1.0 - t[k]) + hi * (1.0 + t[k]));
                values[k] = sampler(x);
            }
            auto coeffs = values_to_coeffs(values);
            if (detail::tail_resolved(coeffs, tol)) {
                piece.coeffs = detail::chop_coeffs(std::move(coeffs), tol);
                piece.resolved = true;
                break;
            }
            piece.coeffs = std::move(coeffs);
        }
        if (!piece.resolved)
            piece.coeffs = detail::chop_coeffs(std::move(piece.coeffs), tol);
        pieces.push_back(std::move(piece));
    }
    return PiecewiseFun(std::move(breakpoints), std::move(pieces));
}

namespace detail {

// Merge two sorted breakpoint lists, deduplicating within 1e-13.
inline std::vector<double> merge_breakpoints(const std::vector<double>& a,
                                             const std::vector<double>& b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    std::vector<double> dedup;
    for (double x : out) {
        if (dedup.empty() || x - dedup.back() > 1e-13) dedup.push_back(x);
    }
    dedup.front() = -1.0;
    dedup.back() = 1.0;
    return dedup;
}

// Restriction of a series to [lo, hi] inside its domain; exact for polynomials.
inline ChebSeries restrict_series(const ChebSeries& s, double lo, double hi, double tol) {
    ChebSeries out;
    out.lo = lo;
    out.hi = hi;
    out.resolved = s.resolved;
    const std::size_t count = s.coeffs.size();
    if (count == 1) {
        out.coeffs = s.coeffs;
        return out;
    }
    const auto t = cheb_points(count);
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double x = 0.5 * (lo * (1.0 - t[k]) + hi * (1.0 + t[k]));
        values[k] = eval_series(s, x);
    }
    out.coeffs = chop_coeffs(values_to_coeffs(values), tol);
    return out;
}

} // namespace detail

/// Re-express p on a finer breakpoint set (which must contain p's breakpoints).
inline PiecewiseFun refine_to(const PiecewiseFun& p, const std::vector<double>& breakpoints,
                              double tol = kDefaultTol) {
    if (breakpoints == p.breakpoints()) return p;
    std::vector<ChebSeries> pieces;
    pieces.reserve(breakpoints.size() - 1);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double lo = breakpoints[i];
        const double hi = breakpoints[i + 1];
        const auto& host = p.pieces()[p.piece_index(0.5 * (lo + hi))];
        if (host.lo == lo && host.hi == hi)
            pieces.push_back(host);
        else
            pieces.push_back(detail::restrict_series(host, lo, hi, tol));
    }
    return PiecewiseFun(breakpoints, std::move(pieces));
}

/// alpha*p + q on the union of breakpoints, chopped.
inline PiecewiseFun axpy(double alpha, const PiecewiseFun& p, const PiecewiseFun& q,
                         double tol = kDefaultTol) {
    const auto breaks = detail::merge_breakpoints(p.breakpoints(), q.breakpoints());
    const auto pr = refine_to(p, breaks, tol);
    const auto qr = refine_to(q, breaks, tol);
    std::vector<ChebSeries> pieces;
    pieces.reserve(breaks.size() - 1);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const auto& a = pr.pieces()[i];
        const auto& b = qr.pieces()[i];
        ChebSeries out;
        out.lo = a.lo;
        out.hi = a.hi;
        out.resolved = a.resolved && b.resolved;
        out.coeffs.assign(std::max(a.coeffs.size(), b.coeffs.size()), 0.0);
        for (std::size_t k = 0; k < a.coeffs.size(); ++k) out.coeffs[k] = alpha * a.coeffs[k];
        for (std::size_t k = 0; k < b.coeffs.size(); ++k) out.coeffs[k] += b.coeffs[k];
        out.coeffs = detail::chop_coeffs(std::move(out.coeffs), tol);
        pieces.push_back(std::move(out));
    }
    return PiecewiseFun(breaks, std::move(pieces));
}

inline PiecewiseFun scale(double alpha, const PiecewiseFun& p) {
    std::vector<ChebSeries> pieces = p.pieces();
    for (auto& s : pieces)
        for (double& c : s.coeffs) c *= alpha;
    return PiecewiseFun(p.breakpoints(), std::move(pieces));
}

/// Pointwise product via padded transforms on each piece of the breakpoint union.
inline PiecewiseFun multiply(const PiecewiseFun& p, const PiecewiseFun& q,
                             double tol = kDefaultTol) {
    const auto breaks = detail::merge_breakpoints(p.breakpoints(), q.breakpoints());
    const auto pr = refine_to(p, breaks, tol);
    const auto qr = refine_to(q, breaks, tol);
    std::vector<ChebSeries> pieces;
    pieces.reserve(breaks.size() - 1);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const auto& a = pr.pieces()[i];
        const auto& b = qr.pieces()[i];
        ChebSeries out;
        out.lo = a.lo;
        out.hi = a.hi;
        out.resolved = a.resolved && b.resolved;
        const std::size_t count = a.coeffs.size() + b.coeffs.size() - 1;
        std::vector<double> ac(count, 0.0), bc(count, 0.0);
        std::copy(a.coeffs.begin(), a.coeffs.end(), ac.begin());
        std::copy(b.coeffs.begin(), b.coeffs.end(), bc.begin());
        auto av = coeffs_to_values(ac);
        const auto bv = coeffs_to_values(bc);
        for (std::size_t k = 0; k < count; ++k) av[k] *= bv[k];
        out.coeffs = detail::chop_coeffs(values_to_coeffs(av), tol);
        pieces.push_back(std::move(out));
    }
    return PiecewiseFun(breaks, std::move(pieces));
}

namespace detail {

// Integral of one piece: half_width * sum over even k of 2 c_k / (1 - k^2).
inline double piece_integral(const ChebSeries& s) {
    double sum = 0.0;
    for (std::size_t k = 0; k < s.coeffs.size(); k += 2) {
        const double kk = static_cast<double>(k);
        sum += 2.0 * s.coeffs[k] / (1.0 - kk * kk);
    }
    return s.half_width() * sum;
}

} // namespace detail

/// Clenshaw-Curtis value of the definite integral over [-1,1].
inline double definite_integral(const PiecewiseFun& p) {
    double total = 0.0;
    for (const auto& s : p.pieces()) total += detail::piece_integral(s);
    return total;
}

inline double inner_product(const PiecewiseFun& p, const PiecewiseFun& q) {
    return definite_integral(multiply(p, q));
}

inline double norm_l2(const PiecewiseFun& p) {
    return std::sqrt(std::max(0.0, inner_product(p, p)));
}

inline double mean(const PiecewiseFun& p) { return 0.5 * definite_integral(p); }

/// Antiderivative vanishing at -1; continuous across breakpoints.
inline PiecewiseFun indefinite_integral(const PiecewiseFun& p, double tol = kDefaultTol) {
    std::vector<ChebSeries> pieces;
    pieces.reserve(p.piece_count());
    double accumulated = 0.0;
    for (const auto& s : p.pieces()) {
        const auto& a = s.coeffs;
        const std::size_t n = a.size() - 1;
        std::vector<double> b(n + 2, 0.0);
        auto coef = [&](std::size_t k) { return k <= n ? a[k] : 0.0; };
        b[1] = coef(0) - 0.5 * coef(2);
        for (std::size_t k = 2; k <= n + 1; ++k)
            b[k] = (coef(k - 1) - coef(k + 1)) / (2.0 * static_cast<double>(k));
        const double hw = s.half_width();
        for (std::size_t k = 1; k < b.size(); ++k) b[k] *= hw;
        b = detail::chop_coeffs(std::move(b), tol);
        // Anchor the constant term so the piece starts at the running total;
        // for the first piece this makes the value at -1 exactly zero.
        b[0] = 0.0;
        const double left = clenshaw(b, -1.0);
        b[0] = accumulated - left;
        ChebSeries out;
        out.lo = s.lo;
        out.hi = s.hi;
        out.resolved = s.resolved;
        out.coeffs = std::move(b);
        accumulated += detail::piece_integral(s);
        pieces.push_back(std::move(out));
    }
    return PiecewiseFun(p.breakpoints(), std::move(pieces));
}

/// Integral from x to 1; vanishes at x = 1.
inline PiecewiseFun adjoint_integral(const PiecewiseFun& p, double tol = kDefaultTol) {
    const double total = definite_integral(p);
    PiecewiseFun cumulative = indefinite_integral(p, tol);
    std::vector<ChebSeries> pieces = cumulative.pieces();
    for (auto& s : pieces) {
        for (double& c : s.coeffs) c = -c;
        s.coeffs[0] += total;
    }
    return PiecewiseFun(p.breakpoints(), std::move(pieces));
}

/// Piecewise classical derivative; delta terms at breakpoints are not
/// represented.
inline PiecewiseFun differentiate(const PiecewiseFun& p, double tol = kDefaultTol) {
    std::vector<ChebSeries> pieces;
    pieces.reserve(p.piece_count());
    for (const auto& s : p.pieces()) {
        const auto& a = s.coeffs;
        const std::size_t n = a.size() - 1;
        ChebSeries out;
        out.lo = s.lo;
        out.hi = s.hi;
        out.resolved = s.resolved;
        if (n == 0) {
            out.coeffs = {0.0};
            pieces.push_back(std::move(out));
            continue;
        }
        std::vector<double> d(n + 2, 0.0);
        for (std::size_t k = n; k >= 1; --k)
            d[k - 1] = d[k + 1] + 2.0 * static_cast<double>(k) * a[k];
        d[0] *= 0.5;
        d.resize(n);
        const double inv_hw = 1.0 / s.half_width();
        for (double& c : d) c *= inv_hw;
        out.coeffs = detail::chop_coeffs(std::move(d), tol);
        pieces.push_back(std::move(out));
    }
    return PiecewiseFun(p.breakpoints(), std::move(pieces));
}

inline PiecewiseFun operator+(const PiecewiseFun& p, const PiecewiseFun& q) {
    return axpy(1.0, p, q);
}

inline PiecewiseFun operator-(const PiecewiseFun& p, const PiecewiseFun& q) {
    return axpy(-1.0, q, p);
}

inline PiecewiseFun operator*(double alpha, const PiecewiseFun& p) { return scale(alpha, p); }

inline PiecewiseFun operator*(const PiecewiseFun& p, const PiecewiseFun& q) {
    return multiply(p, q);
}

} // namespace chebkrylov
