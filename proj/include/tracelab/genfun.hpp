#pragma once

// Generating-function machinery: Mobius maps of the channel, the trace-side
// statistic, the message-side polynomial g_x^f, Fourier decomposition over
// F_2^l, the character-to-derivative reduction, and pool estimators.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tracelab/channel.hpp"
#include "tracelab/common.hpp"
#include "tracelab/interpolation.hpp"

namespace tracelab {

namespace detail {
template <class T>
inline constexpr bool is_complex_v = false;
template <class T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

template <class T>
double norm2(const T& v) {
    if constexpr (is_complex_v<T>) return std::norm(v);
    else return v * v;
}
template <class T>
T conj_of(const T& v) {
    if constexpr (is_complex_v<T>) return std::conj(v);
    else return v;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Mobius maps

struct Mobius {
    ChannelParams ch;

    explicit Mobius(const ChannelParams& c) : ch(c) { ch.validate(); }

    template <class T>
    T phi1(T w) const { return ch.p() * w + ch.q; }
    template <class T>
    T phi2(T w) const { return ch.pp() * w / (1.0 - ch.qp * w); }
    template <class T>
    T phi(T w) const { return phi2(phi1(w)); }
    template <class T>
    T phibar(T w) const { return ch.p() * ch.pp() / (1.0 - ch.qp * phi1(w)); }

    /// Closed-form inverse of phi; the pole sits at z = -p'/q'.
    template <class T>
    T psi(T z) const {
        const T den = ch.pp() + ch.qp * z;
        if (std::abs(den) < 1e-300) throw InvalidArgument("psi: argument at the pole -p'/q'");
        return (z / den - ch.q) / ch.p();
    }
};

template <class T>
T psi(T z, const ChannelParams& params) { return Mobius(params).psi(z); }

// ---------------------------------------------------------------------------
// Evaluation points and Boolean functions

/// (z0, z_1..z_l). In EQUAL mode every z_i equals zrest[0].
struct EvalPoint {
    Complex z0{0.0, 0.0};
    std::vector<Complex> z;  // z_1..z_l
    bool equal = true;

    static EvalPoint equal_mode(Complex z0, Complex zr, std::size_t l) { return {z0, std::vector<Complex>(l, zr), true}; }
    static EvalPoint free_mode(Complex z0, std::vector<Complex> zs) { return {z0, std::move(zs), false}; }
    [[nodiscard]] std::size_t arity() const { return z.size(); }
    [[nodiscard]] Complex zrest() const { return z.empty() ? Complex{0.0, 0.0} : z.front(); }
};

/// f: {0,1}^l -> R as a table; bit i of the index holds the (i+1)-th argument.
struct BoolFunction {
    std::size_t l = 0;
    std::vector<double> table{0.0};

    static BoolFunction constant(std::size_t l, double v) { return {l, std::vector<double>(std::size_t{1} << l, v)}; }
    static BoolFunction from_table(std::size_t l, std::vector<double> t) {
        require(t.size() == (std::size_t{1} << l), "function table size must be 2^l");
        return {l, std::move(t)};
    }
    /// chi_omega with omega_i = -1 exactly where bit i of mask is set.
    static BoolFunction character(std::size_t l, std::uint32_t mask) {
        BoolFunction f{l, std::vector<double>(std::size_t{1} << l)};
        for (std::size_t x = 0; x < f.table.size(); ++x)
            f.table[x] = (std::popcount(static_cast<std::uint32_t>(x) & mask) & 1) ? -1.0 : 1.0;
        return f;
    }
    static BoolFunction simple(std::size_t l) { return character(l, static_cast<std::uint32_t>((std::size_t{1} << l) - 1)); }
    static BoolFunction indicator(const BitString& w) {
        BoolFunction f{w.size(), std::vector<double>(std::size_t{1} << w.size(), 0.0)};
        std::size_t idx = 0;
        for (std::size_t i = 0; i < w.size(); ++i) idx |= static_cast<std::size_t>(w[i]) << i;
        f.table[idx] = 1.0;
        return f;
    }
    [[nodiscard]] double operator()(std::size_t bits) const { return table[bits]; }
};

struct Truncation {
    std::size_t max_r0 = std::numeric_limits<std::size_t>::max();   // largest r0 (1-indexed)
    std::size_t max_gap = std::numeric_limits<std::size_t>::max();  // largest r_i - r_{i-1} - 1
};

// ---------------------------------------------------------------------------
// Trace side

/// B_0(r) for r = 1..|trace| (stored at r-1) so that the statistic equals
/// sum_r Psi(z0)^{r-1} B_0(r). psis holds Psi(z_1)..Psi(z_l).
template <class T>
std::vector<T> trace_b0(std::span<const std::uint8_t> bits, std::span<const T> psis,
                        std::size_t max_gap = std::numeric_limits<std::size_t>::max()) {
    const std::size_t L = bits.size();
    std::vector<T> b(L), acc(L);
    for (std::size_t r = 0; r < L; ++r) b[r] = bits[r] ? T(-1.0) : T(1.0);
    if (psis.empty()) return b;
    std::vector<T> sign(b);
    for (std::size_t lvl = psis.size(); lvl-- > 0;) {
        const T w = psis[lvl];
        const bool windowed = max_gap < L;
        const T wg = windowed ? std::pow(w, static_cast<double>(max_gap + 1)) : T(0.0);
        // acc[r] = sum_{r' > r, r'-r-1 <= max_gap} w^{r'-r-1} b[r']
        T a = T(0.0);
        for (std::size_t r = L; r-- > 0;) {
            acc[r] = a;
            const T next = (r < L) ? b[r] : T(0.0);
            a = next + w * a;
            if (windowed && r + max_gap + 1 < L) a -= wg * b[r + max_gap + 1];
        }
        for (std::size_t r = 0; r < L; ++r) b[r] = sign[r] * acc[r];
    }
    return b;
}

/// Horner evaluation of sum_k coef[k] * w^k.
template <class C, class W>
auto horner(std::span<const C> coef, W w) {
    using R = decltype(C{} * W{});
    R acc{};
    for (std::size_t k = coef.size(); k-- > 0;) acc = acc * w + coef[k];
    return acc;
}

/// The statistic at raw arguments w0, w_1..w_l (no Psi applied).
inline Complex trace_polynomial(const BitString& trace, Complex w0, std::span<const Complex> ws,
                                const Truncation& trunc = {}) {
    auto b0 = trace_b0<Complex>(trace.view(), ws, trunc.max_gap);
    if (b0.size() > trunc.max_r0) b0.resize(trunc.max_r0);
    return horner<Complex, Complex>(b0, w0);
}

inline Complex trace_statistic(const BitString& trace, const EvalPoint& point, const ChannelParams& params,
                               const Truncation& trunc = {}) {
    const Mobius m(params);
    std::vector<Complex> ws;
    for (auto z : point.z) ws.push_back(m.psi(z));
    return trace_polynomial(trace, m.psi(point.z0), ws, trunc);
}

// ---------------------------------------------------------------------------
// Message side
//
// g_x^f(z0, z_1..z_l) = sum_{k0<...<kl} (-1)^{x_k0} f(x_k1..x_kl) z0^{k0-1} prod z_i^{k_i-k_{i-1}-1}.
// The finite x is read as the prefix of a string whose later bits are unknown
// and uniform: f is averaged over arguments beyond |x|, and k0 > |x| adds 0.
// For simple characters this is the plain finite sum.

/// Coefficients c[j] of z0^j (j = k0 - 1). With max_total_degree unset the
/// positions past |x| are summed in closed form (needs |z_i| < 1).
template <class T>
std::vector<T> message_g_coeffs(const BitString& x, const BoolFunction& f, std::span<const T> zs,
                                std::optional<std::size_t> max_total_degree = std::nullopt) {
    const std::size_t l = f.l;
    require(zs.size() == l, "message_g: point arity must equal the arity of f");
    require(l <= 20, "message_g: arity too large");
    const std::size_t N = x.size();
    const bool finite = max_total_degree.has_value();
    const std::size_t M = finite ? *max_total_degree + l + 1 : N;  // last position considered
    const std::size_t K = std::min(N, M);
    if (K == 0) return {};
    if (!finite)
        for (std::size_t i = 0; i < l; ++i)
            require(std::abs(zs[i]) < 1.0, "message_g: closed-form tail needs |z_i| < 1");

    // Level-i values V_i(r, pattern) for r = 1..M (index r-1), pattern in {0,1}^i,
    // plus the shift-invariant value U_i(pattern) past the known region.
    std::vector<T> next_level(std::size_t{1} << l), next_tail(std::size_t{1} << l);
    std::vector<std::vector<T>> V(std::size_t{1} << l, std::vector<T>(M));
    for (std::size_t p = 0; p < (std::size_t{1} << l); ++p) {
        std::fill(V[p].begin(), V[p].end(), T(f(p)));
        next_tail[p] = T(f(p));
    }
    for (std::size_t i = l; i-- > 0;) {
        const T z = zs[i];
        const std::size_t np = std::size_t{1} << i;
        std::vector<std::vector<T>> W(np, std::vector<T>(M));
        std::vector<T> tail(np);
        for (std::size_t p = 0; p < np; ++p) {
            const std::size_t p0 = p, p1 = p | (std::size_t{1} << i);
            // Level i+1 value at position r', given the bit there.
            auto T_at = [&](std::size_t rp) -> T {  // rp is 0-based
                if (rp < N) return V[x[rp] ? p1 : p0][rp];
                return 0.5 * (V[p0][rp] + V[p1][rp]);
            };
            if (!finite) tail[p] = 0.5 * (next_tail[p0] + next_tail[p1]) / (T(1.0) - z);
            // A(r) = sum_{r' > r} z^{r'-r-1} T(r'); r runs over 0-based positions.
            T a = finite ? T(0.0) : tail[p];
            for (std::size_t r = M; r-- > 0;) {
                W[p][r] = a;
                a = T_at(r) + z * a;
            }
        }
        V.swap(W);
        next_tail.swap(tail);
    }
    std::vector<T> coef(K);
    for (std::size_t k = 0; k < K; ++k) coef[k] = x[k] ? -V[0][k] : V[0][k];
    return coef;
}

/// Simple-character coefficients (f = prod (-1)^{x_i}) in O(|x| l).
template <class T>
std::vector<T> message_g_simple_coeffs(const BitString& x, std::span<const T> zs) {
    return trace_b0<T>(x.view(), zs);
}

inline Complex message_g(const BitString& x, const BoolFunction& f, const EvalPoint& point,
                         std::optional<std::size_t> max_total_degree = std::nullopt) {
    const auto coef = message_g_coeffs<Complex>(x, f, point.z, max_total_degree);
    return horner<Complex, Complex>(coef, point.z0);
}

/// c'[j] = sum_s sigma(s) c[j + s]: coefficients of sum_s sigma(s) g_{theta^s x}.
template <class T>
std::vector<T> shift_mixture(std::span<const T> coef, const ShiftSpec& shift) {
    const std::size_t off = shift.offset();
    if (coef.size() <= off) return {};
    std::vector<T> out(coef.size() - off, T(0.0));
    for (std::size_t s = off; s <= shift.max_shift(); ++s) {
        const double w = shift.prob(s);
        if (w == 0.0) continue;
        for (std::size_t j = 0; j + s < coef.size(); ++j) out[j] += w * coef[j + s];
    }
    return out;
}

/// Exact expectation of estimate_g_simple for traces of x under the shift:
/// sum_s sigma(s) g_{theta^s x}(z) / P(1/z0).
inline Complex expected_simple_estimate(const BitString& x, const EvalPoint& point, const ShiftSpec& shift) {
    const auto coef = message_g_simple_coeffs<Complex>(x, point.z);
    const auto mix = shift_mixture<Complex>(coef, shift);
    return horner<Complex, Complex>(mix, point.z0) / shift.eval(1.0 / point.z0);
}

// ---------------------------------------------------------------------------
// Fourier over F_2^l

/// fhat[mask] with f(x) = sum_mask fhat[mask] * (-1)^{popcount(mask & x)}.
inline std::vector<double> fourier_f2l(const BoolFunction& f) {
    require(f.l <= 20, "fourier_f2l: arity above 20");
    std::vector<double> a = f.table;
    for (std::size_t h = 1; h < a.size(); h <<= 1)
        for (std::size_t i = 0; i < a.size(); i += h << 1)
            for (std::size_t j = i; j < i + h; ++j) {
                const double u = a[j], v = a[j + h];
                a[j] = u + v;
                a[j + h] = u - v;
            }
    const double scale = std::ldexp(1.0, -static_cast<int>(f.l));
    for (double& v : a) v *= scale;
    return a;
}

// ---------------------------------------------------------------------------
// Character reduction

struct CharacterPlan {
    std::size_t l = 0;
    std::uint32_t mask = 0;
    std::size_t l_prime = 0;
    std::vector<std::size_t> positions;  // j_1 < ... < j_{l'} (1-indexed)
    std::vector<int> orders;             // m_i = j_i - j_{i-1} - 1
    std::vector<double> normalizers;     // 1 / m_i!
    std::size_t tail_exponent = 0;       // l - j_{l'}
};

inline CharacterPlan character_reduction(std::size_t l, std::uint32_t mask) {
    require(l <= 31, "character_reduction: arity too large");
    require(l == 32 || (mask >> l) == 0, "character_reduction: mask has bits beyond l");
    CharacterPlan plan;
    plan.l = l;
    plan.mask = mask;
    std::size_t prev = 0;
    for (std::size_t i = 0; i < l; ++i) {
        if (!((mask >> i) & 1u)) continue;
        const std::size_t j = i + 1;
        const int m = static_cast<int>(j - prev - 1);
        plan.positions.push_back(j);
        plan.orders.push_back(m);
        plan.normalizers.push_back(1.0 / std::tgamma(m + 1.0));
        prev = j;
    }
    plan.l_prime = plan.positions.size();
    plan.tail_exponent = l - prev;
    return plan;
}

/// Exact evaluation of a plan at an EQUAL point: (1/(1-z))^t times the
/// normalized partial derivatives of the arity-l' simple g, computed with
/// binomial gap kernels C(d, m) z^{d-m}.
inline Complex evaluate_plan_exact(const BitString& x, const CharacterPlan& plan, Complex z0, Complex z) {
    const std::size_t N = x.size();
    std::vector<Complex> b(N), sign(N);
    for (std::size_t r = 0; r < N; ++r) sign[r] = b[r] = x[r] ? -1.0 : 1.0;
    for (std::size_t lvl = plan.l_prime; lvl-- > 0;) {
        const int m = plan.orders[lvl];
        // A^{(k)}(r) = A^{(k-1)}(r+1) + z A^{(k)}(r+1), A^{(0)}(r) = b(r+1) + z A^{(0)}(r+1).
        std::vector<std::vector<Complex>> A(static_cast<std::size_t>(m + 1), std::vector<Complex>(N + 1, 0.0));
        for (std::size_t r = N; r-- > 0;) {
            A[0][r] = b.size() > r + 1 ? b[r + 1] + z * A[0][r + 1] : Complex(0.0);
            for (int k = 1; k <= m; ++k) A[k][r] = A[k - 1][r + 1] + z * A[k][r + 1];
        }
        for (std::size_t r = 0; r < N; ++r) b[r] = sign[r] * A[static_cast<std::size_t>(m)][r];
    }
    const Complex tail = std::pow(1.0 / (1.0 - z), static_cast<double>(plan.tail_exponent));
    return tail * horner<Complex, Complex>(b, z0);
}

inline void check_admissible(double zr, const ChannelParams& params, double c1 = 0.2, double c2 = 0.05) {
    const bool near_one = zr >= 1.0 - c1 && zr <= 1.0 - c2;
    const bool near_zero = params.q < 0.5 && zr >= -c1 && zr <= c1;
    require(near_one || near_zero, "z_rest outside the admissible interval");
}

// ---------------------------------------------------------------------------
// Estimator plans: a finite linear combination of simple-character statistics
// at FREE node tuples. The same combination applied to exact simple g values
// gives the estimator's expectation, so the comparison against candidates
// never sees interpolation bias.

template <class T>
struct NodeTerm {
    std::vector<T> zs;    // node tuple (arity l')
    std::vector<T> psis;  // Psi of the nodes
    T coef{};             // weight on g_simple(z0, zs)
    T trace_weight{};     // coef / prod phibar(psis)
};

template <class T>
struct EstimatorPlan {
    std::vector<NodeTerm<T>> terms;
    double amplification = 0.0;  // sum of |coef|, the noise factor of the plan
};

template <class T>
EstimatorPlan<T> make_simple_plan(std::span<const T> zs, const ChannelParams& params) {
    const Mobius m(params);
    NodeTerm<T> t;
    t.zs.assign(zs.begin(), zs.end());
    t.coef = T(1.0);
    T norm = T(1.0);
    for (auto z : zs) {
        t.psis.push_back(m.psi(z));
        norm *= m.phibar(t.psis.back());
    }
    t.trace_weight = T(1.0) / norm;
    EstimatorPlan<T> plan;
    plan.terms.push_back(std::move(t));
    plan.amplification = 1.0;
    return plan;
}

/// Plan for g_x^f at an EQUAL point with common value zr. Differentiated
/// coordinates are sampled on the grid centred at zr (grid.center ignored).
template <class T>
EstimatorPlan<T> make_general_plan(const BoolFunction& f, T zr, const ChannelParams& params, GridSpec grid) {
    const Mobius mob(params);
    grid.center = 0.0;
    grid.validate();
    const auto fhat = fourier_f2l(f);
    std::map<std::vector<double>, std::size_t> index;  // node key -> term slot
    EstimatorPlan<T> plan;
    std::map<int, std::vector<double>> rows;
    auto key_of = [](const std::vector<T>& zs) {
        std::vector<double> key;
        for (const auto& z : zs) {
            if constexpr (detail::is_complex_v<T>) {
                key.push_back(z.real());
                key.push_back(z.imag());
            } else {
                key.push_back(z);
            }
        }
        key.push_back(static_cast<double>(zs.size()));
        return key;
    };
    auto add = [&](const std::vector<T>& zs, T coef) {
        auto key = key_of(zs);
        auto it = index.find(key);
        if (it == index.end()) {
            NodeTerm<T> t;
            t.zs = zs;
            index.emplace(std::move(key), plan.terms.size());
            plan.terms.push_back(std::move(t));
            it = index.find(key_of(zs));
        }
        plan.terms[it->second].coef += coef;
    };
    for (std::uint32_t mask = 0; mask < fhat.size(); ++mask) {
        if (std::abs(fhat[mask]) < 1e-15) continue;
        const auto cp = character_reduction(f.l, mask);
        const T factor = T(fhat[mask]) * std::pow(T(1.0) / (T(1.0) - zr), static_cast<double>(cp.tail_exponent));
        std::vector<std::size_t> diff;
        for (std::size_t i = 0; i < cp.l_prime; ++i)
            if (cp.orders[i] > 0) {
                require(cp.orders[i] <= 2 * grid.n_deg, "grid degree too small for the derivative order");
                diff.push_back(i);
                if (!rows.count(cp.orders[i])) rows[cp.orders[i]] = lagrange_weights(grid, cp.orders[i]);
            }
        // Enumerate node index tuples over differentiated coordinates.
        std::vector<int> idx(diff.size(), -grid.n_deg);
        while (true) {
            std::vector<T> zs(cp.l_prime, zr);
            T w = factor;
            for (std::size_t d = 0; d < diff.size(); ++d) {
                zs[diff[d]] = zr + T(grid.node(idx[d]));
                w *= rows[cp.orders[diff[d]]][static_cast<std::size_t>(idx[d] + grid.n_deg)];
            }
            if (std::abs(w) != 0.0) add(zs, w);
            std::size_t d = 0;
            while (d < idx.size() && ++idx[d] > grid.n_deg) idx[d++] = -grid.n_deg;
            if (d == idx.size()) break;
        }
    }
    for (auto& t : plan.terms) {
        T norm = T(1.0);
        for (auto z : t.zs) {
            t.psis.push_back(mob.psi(z));
            norm *= mob.phibar(t.psis.back());
        }
        t.trace_weight = t.coef / norm;
        plan.amplification += std::abs(t.coef);
    }
    return plan;
}

/// Combined per-trace vector: sum over terms of trace_weight * B_0.
template <class T>
std::vector<T> plan_trace_vector(std::span<const std::uint8_t> bits, const EstimatorPlan<T>& plan,
                                 std::size_t max_r0, std::size_t max_gap) {
    const std::size_t L = std::min(bits.size(), max_r0);
    std::vector<T> out(L, T(0.0));
    for (const auto& t : plan.terms) {
        const auto b0 = trace_b0<T>(bits, t.psis, max_gap);
        for (std::size_t r = 0; r < L; ++r) out[r] += t.trace_weight * b0[r];
    }
    return out;
}

/// z0-coefficients of the plan's expectation for traces of y under the shift
/// (before division by P(1/z0)).
template <class T>
std::vector<T> plan_forward_coeffs(const BitString& y, const EstimatorPlan<T>& plan, const ShiftSpec& shift) {
    std::vector<T> acc;
    for (const auto& t : plan.terms) {
        const auto c = message_g_simple_coeffs<T>(y, t.zs);
        if (acc.size() < c.size()) acc.resize(c.size(), T(0.0));
        for (std::size_t j = 0; j < c.size(); ++j) acc[j] += t.coef * c[j];
    }
    return shift_mixture<T>(acc, shift);
}

// ---------------------------------------------------------------------------
// Pool summaries: mean and second moments of per-trace vectors, so that the
// estimate and its standard error at any z0 cost O(L) and O(L^2).

template <class T>
class PoolSummary {
public:
    static constexpr std::size_t kCovLimit = 160;

    PoolSummary() = default;

    PoolSummary(const SamplePool& pool, const EstimatorPlan<T>& plan, const ChannelParams& params,
                const Truncation& trunc = {}, unsigned workers = 1)
        : params_(params) {
        const std::size_t n = pool.samples.size();
        require(n >= 2, "pool needs at least two samples");
        count_ = n;
        std::vector<std::vector<T>> rows(n);
        parallel_for(n, workers, [&](std::size_t i) {
            rows[i] = plan_trace_vector<T>(pool.samples[i].view(), plan, trunc.max_r0, trunc.max_gap);
        });
        std::size_t L = 0;
        for (const auto& r : rows) L = std::max(L, r.size());
        mean_.assign(L, T(0.0));
        for (const auto& r : rows)
            for (std::size_t k = 0; k < r.size(); ++k) mean_[k] += r[k];
        for (auto& v : mean_) v /= static_cast<double>(n);
        if (L <= kCovLimit) {
            cov_.assign(L * L, T(0.0));
            std::vector<T> dev(L);
            for (const auto& r : rows) {
                for (std::size_t k = 0; k < L; ++k) dev[k] = (k < r.size() ? r[k] : T(0.0)) - mean_[k];
                for (std::size_t a = 0; a < L; ++a) {
                    const T da = dev[a];
                    if (da == T(0.0)) continue;
                    T* row = &cov_[a * L];
                    for (std::size_t b = 0; b < L; ++b) row[b] += da * detail::conj_of(dev[b]);
                }
            }
            for (auto& v : cov_) v /= static_cast<double>(n - 1);
        } else {
            rows_ = std::move(rows);
        }
    }

    [[nodiscard]] std::size_t count() const { return count_; }
    [[nodiscard]] std::size_t length() const { return mean_.size(); }
    [[nodiscard]] const std::vector<T>& mean() const { return mean_; }

    /// Mean statistic at w = Psi(z0).
    [[nodiscard]] Complex raw_mean(Complex w) const { return horner<T, Complex>(mean_, w); }

    /// Per-trace variance E|stat - mean|^2 at w.
    [[nodiscard]] double raw_variance(Complex w) const {
        const std::size_t L = mean_.size();
        std::vector<Complex> v(L);
        Complex p = 1.0;
        for (std::size_t k = 0; k < L; ++k, p *= w) v[k] = p;
        if (!cov_.empty()) {
            Complex acc = 0.0;
            for (std::size_t a = 0; a < L; ++a) {
                Complex inner = 0.0;
                const T* row = &cov_[a * L];
                for (std::size_t b = 0; b < L; ++b) inner += row[b] * std::conj(v[b]);
                acc += v[a] * inner;
            }
            return std::max(0.0, acc.real());
        }
        const Complex m = raw_mean(w);
        double s = 0.0;
        for (const auto& r : rows_) s += std::norm(horner<T, Complex>(r, w) - m);
        return s / static_cast<double>(count_ - 1);
    }

    struct Value {
        Complex value;
        double stderr_;
    };

    /// Estimate of the plan's target at z0 under the shift normalisation.
    [[nodiscard]] Value estimate(Complex z0, const ShiftSpec& shift) const {
        const Mobius m(params_);
        const Complex w = m.psi(z0);
        const Complex norm = m.phibar(w) * shift.eval(1.0 / z0);
        if (std::abs(norm) < 1e-300) throw RuntimeError("estimator normalisation underflow");
        return {raw_mean(w) / norm, std::sqrt(raw_variance(w) / static_cast<double>(count_)) / std::abs(norm)};
    }

private:
    ChannelParams params_;
    std::size_t count_ = 0;
    std::vector<T> mean_;
    std::vector<T> cov_;
    std::vector<std::vector<T>> rows_;
};

// ---------------------------------------------------------------------------
// Estimators

struct GEstimate {
    Complex value{};
    double stderr_ = 0.0;           // exact standard error of the pool mean
    double propagated_bound = 0.0;  // node errors times Lagrange amplification
    bool flagged = false;           // propagated bound above tolerance
    std::size_t n = 0;
};

namespace detail {

struct Moments {
    Complex sum{0.0, 0.0};
    double sum_sq = 0.0;
    void add(Complex v) {
        sum += v;
        sum_sq += std::norm(v);
    }
    [[nodiscard]] Complex mean(std::size_t n) const { return sum / static_cast<double>(n); }
    [[nodiscard]] double stderr_of_mean(std::size_t n) const {
        const double m2 = std::norm(mean(n));
        const double var = std::max(0.0, (sum_sq / static_cast<double>(n) - m2)) * static_cast<double>(n) /
                           static_cast<double>(n - 1);
        return std::sqrt(var / static_cast<double>(n));
    }
};

}  // namespace detail

inline GEstimate estimate_g_simple(const SamplePool& pool, const EvalPoint& point, const ChannelParams& params,
                                   const ShiftSpec& shift, const Truncation& trunc = {}) {
    const Mobius m(params);
    require(std::abs(point.z0) < 1.0, "z0 must lie inside the unit disk");
    require(pool.size() >= 2, "pool needs at least two samples");
    std::vector<Complex> ws;
    Complex norm = m.phibar(m.psi(point.z0)) * shift.eval(1.0 / point.z0);
    for (auto z : point.z) {
        ws.push_back(m.psi(z));
        norm *= m.phibar(ws.back());
    }
    if (std::abs(norm) < 1e-300) throw RuntimeError("estimator normalisation underflow");
    const Complex w0 = m.psi(point.z0);
    detail::Moments mom;
    for (const auto& t : pool.samples) mom.add(trace_polynomial(t, w0, ws, trunc) / norm);
    const std::size_t n = pool.size();
    const double se = mom.stderr_of_mean(n);
    return {mom.mean(n), se, 4.0 * se, false, n};
}

/// Estimate of g_x^f at an EQUAL point with real z_rest. The stderr is exact
/// because the estimate is a mean of per-trace linear contributions; the
/// propagated bound adds |coef| * 4 * stderr over node estimates.
inline GEstimate estimate_g_general(const SamplePool& pool, const BoolFunction& f, const EvalPoint& point,
                                    const ChannelParams& params, const ShiftSpec& shift, const GridSpec& grid,
                                    double tolerance = std::numeric_limits<double>::infinity(),
                                    const Truncation& trunc = {}) {
    require(point.equal, "estimate_g_general needs an EQUAL-mode point");
    require(point.arity() == f.l, "point arity must equal the arity of f");
    require(std::abs(point.z0) < 1.0, "z0 must lie inside the unit disk");
    const double zr = point.zrest().real();
    require(point.zrest().imag() == 0.0, "z_rest must be real");
    if (f.l > 0) check_admissible(zr, params);
    const std::size_t n = pool.size();
    require(n >= 2, "pool needs at least two samples");
    const Mobius m(params);
    const auto plan = make_general_plan<double>(f, zr, params, grid);
    const Complex w0 = m.psi(point.z0);
    const Complex norm0 = m.phibar(w0) * shift.eval(1.0 / point.z0);
    if (std::abs(norm0) < 1e-300) throw RuntimeError("estimator normalisation underflow");
    const std::size_t nt = plan.terms.size();
    std::vector<Complex> term_norm(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        double nz = 1.0;
        for (double p : plan.terms[t].psis) nz *= m.phibar(p);
        term_norm[t] = norm0 * nz;
    }
    std::vector<detail::Moments> per(nt);
    detail::Moments total;
    for (const auto& trace : pool.samples) {
        Complex acc = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
            auto b0 = trace_b0<double>(trace.view(), plan.terms[t].psis, trunc.max_gap);
            if (b0.size() > trunc.max_r0) b0.resize(trunc.max_r0);
            const Complex v = horner<double, Complex>(b0, w0) / term_norm[t];
            per[t].add(v);
            acc += plan.terms[t].coef * v;
        }
        total.add(acc);
    }
    GEstimate out;
    out.n = n;
    out.value = total.mean(n);
    out.stderr_ = total.stderr_of_mean(n);
    for (std::size_t t = 0; t < nt; ++t)
        out.propagated_bound += std::abs(plan.terms[t].coef) * 4.0 * per[t].stderr_of_mean(n);
    out.flagged = out.propagated_bound > tolerance;
    return out;
}

/// Exact expectation of estimate_g_general for traces of y (same plan).
inline Complex expected_general_estimate(const BitString& y, const BoolFunction& f, const EvalPoint& point,
                                         const ChannelParams& params, const ShiftSpec& shift, const GridSpec& grid) {
    const auto plan = make_general_plan<double>(f, point.zrest().real(), params, grid);
    const auto coef = plan_forward_coeffs<double>(y, plan, shift);
    return horner<double, Complex>(coef, point.z0) / shift.eval(1.0 / point.z0);
}

}  // namespace tracelab
