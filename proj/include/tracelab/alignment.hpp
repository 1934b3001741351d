#pragma once

// Block-sign agreement test, robust bias, mismatch, spurious-match estimation,
// and coarse/fine alignment of traces against a known prefix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracelab/channel.hpp"
#include "tracelab/common.hpp"

namespace tracelab {

struct AlignmentParams {
    std::size_t ell = 1;     // segment length
    std::size_t lambda = 1;  // block length, a divisor of ell
    double c = 1.0;          // required fraction of agreeing blocks
    double theta = 0.5;      // required fraction of clearly biased blocks

    AlignmentParams() = default;
    /// lambda is rounded up to the nearest divisor of ell.
    AlignmentParams(std::size_t ell_, std::size_t lambda_, double c_, double theta_ = 0.5)
        : ell(ell_), lambda(lambda_), c(c_), theta(theta_) {
        require(ell >= 1, "alignment: ell must be >= 1");
        require(lambda >= 1 && lambda <= ell, "alignment: lambda must lie in [1, ell]");
        require(c > 0.0 && c <= 1.0, "alignment: c must lie in (0, 1]");
        require(theta > 0.0 && theta <= 1.0, "alignment: theta must lie in (0, 1]");
        while (ell % lambda != 0) ++lambda;
    }
    [[nodiscard]] std::size_t blocks() const { return ell / lambda; }
    /// Smallest agreeing-block count that passes.
    [[nodiscard]] std::size_t needed() const {
        return static_cast<std::size_t>(std::ceil(c * static_cast<double>(blocks()) - 1e-9));
    }
};

using Index = std::optional<std::size_t>;  // empty means infinity

struct MatchResult {
    Index tau1;
    Index tau2;
    std::size_t a1 = 0;
    std::size_t a2 = 0;
};

// ---------------------------------------------------------------------------
// Boolean test

namespace detail {

inline int sign_of(int v) { return (v > 0) - (v < 0); }

inline int block_sum(std::span<const std::uint8_t> bits, std::size_t start, std::size_t len) {
    int s = 0;
    for (std::size_t j = start; j < start + len; ++j) s += bits[j] ? 1 : -1;
    return s;
}

// T on w[ws : ws+ell] vs t[ts : ts+ell] with early exit.
inline bool test_at(std::span<const std::uint8_t> w, std::size_t ws, std::span<const std::uint8_t> t, std::size_t ts,
                    const AlignmentParams& p) {
    const std::size_t B = p.blocks(), need = p.needed();
    std::size_t agree = 0;
    for (std::size_t i = 0; i < B; ++i) {
        if (agree + (B - i) < need) return false;
        const int a = sign_of(block_sum(w, ws + i * p.lambda, p.lambda));
        const int b = sign_of(block_sum(t, ts + i * p.lambda, p.lambda));
        if (a * b > 0) ++agree;
    }
    return agree >= need;
}

}  // namespace detail

/// True iff the number of blocks with sign(s_i * s~_i) > 0 is at least c*ell/lambda.
inline bool boolean_test(const BitString& w, const BitString& w_tilde, const AlignmentParams& params) {
    require(w.size() >= params.ell && w_tilde.size() >= params.ell, "boolean_test: strings shorter than ell");
    return detail::test_at(w.view(), 0, w_tilde.view(), 0, params);
}

// ---------------------------------------------------------------------------
// Robust bias. Positions are 1-indexed; the block x(u1+1 : u2) is scored by
// lambda^{-1/2} sum_{t1,t2} |sum_{j=t1}^{t2} (2 x_j - 1)| over |t - u| < lambda/100.

namespace detail {

inline std::ptrdiff_t robust_radius(std::size_t lambda) {
    // Largest integer d with d < lambda / 100.
    return static_cast<std::ptrdiff_t>((lambda + 99) / 100) - 1;
}

inline double robust_bias_impl(std::span<const std::uint8_t> x, std::size_t u1, std::size_t u2, bool clip) {
    const std::size_t lambda = u2 - u1;
    const std::ptrdiff_t R = robust_radius(lambda);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    double total = 0.0;
    for (std::ptrdiff_t d1 = -R; d1 <= R; ++d1)
        for (std::ptrdiff_t d2 = -R; d2 <= R; ++d2) {
            std::ptrdiff_t t1 = static_cast<std::ptrdiff_t>(u1) + d1;
            std::ptrdiff_t t2 = static_cast<std::ptrdiff_t>(u2) + d2;
            if (clip) {
                t1 = std::max<std::ptrdiff_t>(t1, 1);
                t2 = std::min(t2, n);
            } else if (t1 < 1 || t2 > n) {
                throw InvalidArgument("robust_bias: window outside the string");
            }
            int s = 0;
            for (std::ptrdiff_t j = t1; j <= t2; ++j) s += x[static_cast<std::size_t>(j - 1)] ? 1 : -1;
            total += std::abs(s);
        }
    return total / std::sqrt(static_cast<double>(lambda));
}

}  // namespace detail

inline double robust_bias(const BitString& x, std::size_t u1, std::size_t u2) {
    require(u2 > u1, "robust_bias: need u2 > u1");
    return detail::robust_bias_impl(x.view(), u1, u2, false);
}

/// Block i covers positions i*lambda+1 .. (i+1)*lambda; windows running past
/// either end of w are clipped.
inline bool has_clear_robust_bias_at_scale(const BitString& w, const AlignmentParams& params) {
    require(w.size() >= params.ell, "robust bias check: string shorter than ell");
    const auto sub = w.view().first(params.ell);
    std::size_t clear = 0;
    for (std::size_t i = 0; i < params.blocks(); ++i)
        if (detail::robust_bias_impl(sub, i * params.lambda, (i + 1) * params.lambda, true) >= 1.0) ++clear;
    return static_cast<double>(clear) >= params.theta * static_cast<double>(params.blocks()) - 1e-9;
}

// ---------------------------------------------------------------------------
// Mismatch

/// x[a : a+ell) and trace[b : b+ell) are s-mismatched iff d(a+i, b+i) >= s
/// for every 0 <= i <= ell (i = ell uses the one-past-the-end sentinels).
inline bool is_s_mismatched(const TraceRecord& rec, std::size_t a, std::size_t b, std::size_t ell, std::size_t s) {
    require(a + ell <= rec.source_length && b + ell <= rec.bits.size(), "is_s_mismatched: range outside maps");
    for (std::size_t i = 0; i <= ell; ++i)
        if (misalignment(rec, a + i, b + i) < s) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Spurious matches

struct Interval {
    std::size_t begin = 0;  // inclusive
    std::size_t end = 0;    // exclusive
    [[nodiscard]] std::size_t size() const { return end - begin; }
    [[nodiscard]] bool contains(const Interval& o) const { return begin <= o.begin && o.end <= end; }
};

struct SpuriousEstimate {
    double rate = 0.0;
    std::size_t events = 0;
    std::size_t trials = 0;
    double upper95 = 1.0;  // 3/t when no event was seen, else p + 1.645 sd
};

/// Fraction of traces of x(J) that contain a length-ell substring passing T
/// against x(I) while lambda-mismatched. When I is not inside J every
/// substring is treated as mismatched.
inline SpuriousEstimate estimate_spurious_rate(const BitString& x, Interval I, Interval J,
                                               const AlignmentParams& params, const ChannelParams& channel,
                                               std::size_t trials, std::uint64_t seed) {
    require(trials > 0, "estimate_spurious_rate: trials must be positive");
    require(I.size() == params.ell, "estimate_spurious_rate: |I| must equal ell");
    require(I.end <= x.size() && J.end <= x.size() && J.begin <= J.end, "estimate_spurious_rate: interval outside x");
    const BitString xi = x.slice(I.begin, I.end);
    const BitString xj = x.slice(J.begin, J.end);
    const bool inside = J.contains(I);
    SpuriousEstimate out;
    out.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, "spurious", t));
        const TraceRecord rec = apply_channel(xj, channel, rng);
        const auto tb = rec.bits.view();
        if (tb.size() < params.ell) continue;
        bool hit = false;
        for (std::size_t b = 0; b + params.ell <= tb.size() && !hit; ++b) {
            if (!detail::test_at(xi.view(), 0, tb, b, params)) continue;
            hit = !inside || is_s_mismatched(rec, I.begin - J.begin, b, params.ell, params.lambda);
        }
        if (hit) ++out.events;
    }
    const double tt = static_cast<double>(trials);
    out.rate = static_cast<double>(out.events) / tt;
    out.upper95 = out.events == 0 ? 3.0 / tt : out.rate + 1.645 * std::sqrt(out.rate * (1.0 - out.rate) / tt);
    return out;
}

// ---------------------------------------------------------------------------
// Alignment

class NotFinelyWellBehaved : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

/// Smallest b >= from with T(x[a1 : a1+ell], trace[b : b+ell]) passing, where
/// a1 = k - ell - window; the scan covers at most max_span starting points.
inline Index coarse_align(const BitString& x_prefix, const BitString& trace, std::size_t k,
                          const AlignmentParams& params_c, std::size_t window, std::size_t from = 0,
                          std::size_t max_span = std::numeric_limits<std::size_t>::max()) {
    require(k >= params_c.ell + window, "coarse_align: k must be at least ell_c + window");
    require(k <= x_prefix.size(), "coarse_align: k exceeds the known prefix");
    const std::size_t a1 = k - params_c.ell - window;
    if (trace.size() < params_c.ell) return std::nullopt;
    const std::size_t last = trace.size() - params_c.ell;
    const std::size_t stop = max_span == std::numeric_limits<std::size_t>::max() ? last
                                                                                   : std::min(last, from + max_span);
    for (std::size_t b = from; b <= stop; ++b)
        if (detail::test_at(x_prefix.view(), a1, trace.view(), b, params_c)) return b;
    return std::nullopt;
}

/// First b in [tau1 - ell_c, tau1 + 2 ell_c + window] passing T for
/// x[a2 : a2+ell_f] against trace[b : b+ell_f].
inline Index fine_align(const BitString& x_prefix, const BitString& trace, Index tau1, std::size_t a2,
                        const AlignmentParams& params_f, std::size_t ell_c, std::size_t window) {
    if (!tau1) return std::nullopt;
    require(a2 + params_f.ell <= x_prefix.size(), "fine_align: anchor segment outside the known prefix");
    if (trace.size() < params_f.ell) return std::nullopt;
    const std::size_t lo = *tau1 >= ell_c ? *tau1 - ell_c : 0;
    const std::size_t hi = std::min(*tau1 + 2 * ell_c + window, trace.size() - params_f.ell);
    for (std::size_t b = lo; b <= hi; ++b)
        if (detail::test_at(x_prefix.view(), a2, trace.view(), b, params_f)) return b;
    return std::nullopt;
}

struct A2Config {
    std::size_t trials = 64;
    double max_spurious = 0.1;
    std::uint64_t seed = 0;
};

/// Anchor in the middle third of [k - window, k] (largest first) whose
/// segment is robust at scale lambda_f and has a low spurious rate within J.
inline std::size_t select_a2(const BitString& x_prefix, std::size_t k, const AlignmentParams& params_f,
                             std::size_t window, const ChannelParams& channel, const A2Config& cfg) {
    require(k >= window && k <= x_prefix.size(), "select_a2: need window <= k <= |x_prefix|");
    const std::size_t lo = k - (2 * window) / 3;
    std::size_t hi = k - (window + 2) / 3;
    if (hi + params_f.ell > k) hi = k >= params_f.ell ? k - params_f.ell : 0;
    const Interval J{k - window, k};
    for (std::size_t a2 = hi + 1; a2-- > lo;) {
        if (a2 < J.begin || a2 + params_f.ell > k) continue;
        if (!has_clear_robust_bias_at_scale(x_prefix.slice(a2, a2 + params_f.ell), params_f)) continue;
        const auto est = estimate_spurious_rate(x_prefix, {a2, a2 + params_f.ell}, J, params_f, channel, cfg.trials,
                                                derive_seed(cfg.seed, "a2", a2));
        if (est.rate <= cfg.max_spurious) return a2;
        if (a2 == 0) break;
    }
    throw NotFinelyWellBehaved("select_a2: no robust low-spurious anchor for k = " + std::to_string(k));
}

// ---------------------------------------------------------------------------
// Parameter pack

struct ParameterPack {
    std::size_t n = 0;
    double C = 4.0;
    AlignmentParams coarse;
    AlignmentParams fine;
    std::size_t window = 0;  // C log n, floored at 48
    // A chained coarse scan starting at the previous finite tau1 (found at k')
    // covers scan_slope * (k - k') + scan_slack starting points.
    double scan_slope = 2.0;
    std::size_t scan_slack = 4;
    // Formula values before clamping, for logging.
    double raw_ell_c = 0, raw_lambda_c = 0, raw_ell_f = 0, raw_lambda_f = 0;

    [[nodiscard]] std::size_t scan_span(std::size_t steps) const {
        return static_cast<std::size_t>(std::ceil(scan_slope * static_cast<double>(steps))) + scan_slack;
    }
};

/// h(m) = m^{1/5} log^7 m.
inline double h_default(double m) { return m > 1.0 ? std::pow(m, 0.2) * std::pow(std::log(m), 7.0) : 0.0; }

/// Formula parameters are computed for the log; the alignment itself uses
/// desk-scale values (coarse 90/9/0.7, fine 16/1/1.0 with theta 0.25).
inline ParameterPack practical_pack(std::size_t n, double C = 4.0) {
    require(n >= 2, "parameter pack: n must be >= 2");
    require(C > 0.0, "parameter pack: C must be positive");
    ParameterPack pk;
    pk.n = n;
    pk.C = C;
    const double ln = std::log(static_cast<double>(n));
    const double h = std::max(4.0, h_default(C * ln));
    pk.raw_ell_c = C * ln * ln / h;
    pk.raw_lambda_c = std::sqrt(C) * ln / h;
    pk.raw_ell_f = std::pow(C, 2.0 / 3.0) * h;
    pk.raw_lambda_f = std::pow(C, 1.0 / 12.0);
    pk.window = std::max<std::size_t>(48, static_cast<std::size_t>(std::ceil(C * std::log2(static_cast<double>(n)))));
    pk.coarse = AlignmentParams(90, 9, 0.7, 0.5);
    pk.fine = AlignmentParams(16, 1, 1.0, 0.25);
    return pk;
}

/// State of the chained coarse scan over increasing k for one trace.
struct CoarseChain {
    Index last;
    std::size_t last_k = 0;
};

/// tau1 at anchor k. With no previous match the whole trace is scanned.
/// Otherwise the scan starts at the previous tau1 and covers scan_span(k - k')
/// starts; since the first passing start may trail the true position, a miss
/// is retried once with the window widened by ell_c.
inline Index chained_coarse_align(const BitString& x_prefix, const BitString& trace, std::size_t k,
                                  const ParameterPack& pk, CoarseChain& chain) {
    Index tau1;
    if (!chain.last) {
        tau1 = coarse_align(x_prefix, trace, k, pk.coarse, pk.window);
    } else {
        const std::size_t span = pk.scan_span(k - chain.last_k);
        tau1 = coarse_align(x_prefix, trace, k, pk.coarse, pk.window, *chain.last, span);
        if (!tau1) tau1 = coarse_align(x_prefix, trace, k, pk.coarse, pk.window, *chain.last, span + pk.coarse.ell);
    }
    if (tau1) {
        chain.last = tau1;
        chain.last_k = k;
    }
    return tau1;
}

// ---------------------------------------------------------------------------
// Alignment survey on simulated traces with known maps

struct AlignmentRecord {
    std::size_t k = 0;
    Index tau1, tau2;
    std::size_t a1 = 0;
    Index a2;                  // empty when no fine anchor could be chosen
    std::size_t d_tau1 = 0;    // d(a1, tau1), valid when tau1 is finite
    std::size_t d_tau2 = 0;    // d(a2, tau2), valid when tau2 is finite
    bool spurious = false;     // tau1 finite and d_tau1 > ell_c
    bool fine_true = false;    // tau2 finite and not lambda_f-mismatched
};

/// Fine anchors for each coarse anchor k, shared by every trace of x.
inline std::vector<Index> survey_anchors(const BitString& x, std::span<const std::size_t> ks, const ParameterPack& pk,
                                         const ChannelParams& channel, std::uint64_t seed) {
    std::vector<Index> out;
    for (std::size_t j = 0; j < ks.size(); ++j) {
        A2Config ac;
        ac.seed = derive_seed(seed, "survey-a2", j);
        try {
            out.emplace_back(select_a2(x, ks[j], pk.fine, pk.window, channel, ac));
        } catch (const NotFinelyWellBehaved&) {
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

/// Runs the chained coarse scan over k = ell_c + W .. max(ks) and records the
/// coarse and fine matches at each requested anchor (ascending ks).
inline std::vector<AlignmentRecord> survey_trace(const BitString& x, const TraceRecord& rec,
                                                 std::span<const std::size_t> ks, std::span<const Index> a2s,
                                                 const ParameterPack& pk) {
    require(ks.size() == a2s.size(), "survey_trace: one fine anchor per coarse anchor");
    require(std::is_sorted(ks.begin(), ks.end()), "survey_trace: anchors must be ascending");
    const std::size_t lc = pk.coarse.ell, W = pk.window;
    std::vector<AlignmentRecord> out;
    if (ks.empty()) return out;
    require(ks.front() >= lc + W && ks.back() <= x.size(), "survey_trace: anchors outside [ell_c + W, |x|]");
    CoarseChain chain;
    std::size_t j = 0;
    for (std::size_t k = lc + W; k <= ks.back(); ++k) {
        const Index tau1 = chained_coarse_align(x, rec.bits, k, pk, chain);
        if (k != ks[j]) continue;
        for (; j < ks.size() && ks[j] == k; ++j) {
            AlignmentRecord r;
            r.k = k;
            r.a1 = k - lc - W;
            r.tau1 = tau1;
            r.a2 = a2s[j];
            if (tau1) {
                r.d_tau1 = misalignment(rec, r.a1, *tau1);
                r.spurious = r.d_tau1 > lc;
                if (r.a2) {
                    r.tau2 = fine_align(x, rec.bits, tau1, *r.a2, pk.fine, lc, W);
                    if (r.tau2) {
                        r.d_tau2 = misalignment(rec, *r.a2, *r.tau2);
                        r.fine_true = *r.a2 + pk.fine.ell <= rec.source_length &&
                                      *r.tau2 + pk.fine.ell <= rec.bits.size() &&
                                      !is_s_mismatched(rec, *r.a2, *r.tau2, pk.fine.ell, pk.fine.lambda);
                    }
                }
            }
            out.push_back(r);
        }
    }
    return out;
}

}  // namespace tracelab
