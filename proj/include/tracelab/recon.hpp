#pragma once

// Bit recovery from pools of shifted traces: the pairwise test, the
// tournament over candidate continuations, the mean-based baseline, and the
// average-case reconstruction loop built on coarse/fine alignment.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tracelab/alignment.hpp"
#include "tracelab/channel.hpp"
#include "tracelab/common.hpp"
#include "tracelab/genfun.hpp"
#include "tracelab/littlewood.hpp"

namespace tracelab {

enum class ReconMode { Sparse, Dense, Mean };

inline const char* mode_name(ReconMode m) {
    switch (m) {
        case ReconMode::Sparse: return "sparse";
        case ReconMode::Dense: return "dense";
        case ReconMode::Mean: return "mean";
    }
    return "?";
}

inline ReconMode parse_mode(const std::string& s) {
    if (s == "sparse") return ReconMode::Sparse;
    if (s == "dense") return ReconMode::Dense;
    if (s == "mean") return ReconMode::Mean;
    throw InvalidArgument("mode must be one of sparse|dense|mean, got '" + s + "'");
}

struct ReconConfig {
    std::size_t n = 8;        // target bit, 1-indexed; bits 1..n-1 are known
    std::size_t l = 3;        // template arity (ignored in Mean mode)
    ReconMode mode = ReconMode::Sparse;
    std::size_t horizon = 0;  // total bits per candidate; 0 means 4n
    GridSpec grid{0.2, 1, 0.0};
    std::vector<double> rhos;  // empty: the clamped formula radius
    double theta_max = 0.0;    // 0: n^{-2/5}
    std::size_t theta_points = 33;
    double zrest_lo = 0.8, zrest_hi = 0.95;  // DENSE z_rest interval
    std::size_t zrest_points = 3;
    double inconclusive_k = 3.0;  // pair is inconclusive when k * stderr > |separation| / 2
    Truncation trunc;
    // When set, the source continues past the candidate with unknown bits. Their
    // contribution to each estimate is treated as noise of RMS
    // amplification * |z0|^H / sqrt(1 - |z0|^2) with H the candidate length.
    bool unknown_tail = false;
    unsigned workers = 1;

    [[nodiscard]] std::size_t effective_horizon() const { return horizon ? horizon : 4 * n; }
    void validate() const {
        require(n >= 1, "recon: n must be >= 1");
        if (mode != ReconMode::Mean) {
            require(l >= 1, "recon: l must be >= 1");
            require(n >= l, "recon: n must be >= l");
        }
        require(effective_horizon() >= n + (mode == ReconMode::Mean ? 0 : l), "recon: horizon must be >= n + l");
        require(theta_points >= 1, "recon: theta_points must be >= 1");
        require(inconclusive_k >= 0.0, "recon: inconclusive_k must be non-negative");
        grid.validate();
    }
    [[nodiscard]] std::vector<double> radii() const {
        if (!rhos.empty()) return rhos;
        return {clamped_rho(std::max<std::size_t>(n, 2))};
    }
    [[nodiscard]] double arc_half_width() const {
        return theta_max > 0.0 ? theta_max : std::pow(static_cast<double>(std::max<std::size_t>(n, 2)), -0.4);
    }
};

// ---------------------------------------------------------------------------
// Separator: pool estimates on a fixed grid of evaluation points, and exact
// forward values of the same estimator for candidate strings.

class Separator {
public:
    struct Point {
        Complex z0;
        std::size_t slot;  // which z_rest / plan
    };

    Separator(const SamplePool& pool, const ReconConfig& cfg, const BitString& w, const ChannelParams& channel,
              const ShiftSpec& shift)
        : shift_(shift) {
        cfg.validate();
        std::vector<double> zrests;
        if (cfg.mode == ReconMode::Mean) {
            plans_.push_back(make_simple_plan<double>({}, channel));
            zrests.push_back(0.0);
        } else {
            const BoolFunction f = BoolFunction::indicator(w);
            if (cfg.mode == ReconMode::Sparse) {
                require(channel.q < 0.5, "SPARSE mode needs q < 1/2");
                zrests.push_back(0.0);
            } else {
                const std::size_t Z = std::max<std::size_t>(1, cfg.zrest_points);
                for (std::size_t i = 0; i < Z; ++i)
                    zrests.push_back(Z == 1 ? cfg.zrest_lo
                                            : cfg.zrest_lo + (cfg.zrest_hi - cfg.zrest_lo) * static_cast<double>(i) /
                                                                 static_cast<double>(Z - 1));
            }
            for (double zr : zrests) {
                check_admissible(zr, channel);
                plans_.push_back(make_general_plan<double>(f, zr, channel, cfg.grid));
            }
        }
        const auto radii = cfg.radii();
        const double tmax = cfg.arc_half_width();
        for (std::size_t s = 0; s < plans_.size(); ++s)
            for (double rho : radii)
                for (std::size_t k = 0; k < cfg.theta_points; ++k) {
                    const double th = cfg.theta_points == 1
                                          ? 0.0
                                          : -tmax + 2.0 * tmax * static_cast<double>(k) /
                                                        static_cast<double>(cfg.theta_points - 1);
                    points_.push_back({std::polar(rho, th), s});
                }
        est_.resize(points_.size());
        se_.resize(points_.size());
        for (std::size_t s = 0; s < plans_.size(); ++s) {
            const PoolSummary<double> sum(pool, plans_[s], channel, cfg.trunc, cfg.workers);
            for (std::size_t g = 0; g < points_.size(); ++g) {
                if (points_[g].slot != s) continue;
                const auto v = sum.estimate(points_[g].z0, shift_);
                est_[g] = v.value;
                se_[g] = v.stderr_;
                if (cfg.unknown_tail) {
                    const double r = std::abs(points_[g].z0);
                    const double tail = plans_[s].amplification *
                                        std::pow(r, static_cast<double>(cfg.effective_horizon())) /
                                        std::sqrt(1.0 - r * r) / std::abs(shift_.eval(1.0 / points_[g].z0));
                    se_[g] = std::hypot(se_[g], tail);
                }
            }
        }
        max_r0_ = cfg.trunc.max_r0;
    }

    /// Exact expectation of every grid estimate for traces of y.
    [[nodiscard]] std::vector<Complex> forward(const BitString& y) const {
        std::vector<std::vector<double>> coef(plans_.size());
        for (std::size_t s = 0; s < plans_.size(); ++s) {
            coef[s] = plan_forward_coeffs<double>(y, plans_[s], shift_);
            if (coef[s].size() > max_r0_) coef[s].resize(max_r0_);
        }
        std::vector<Complex> out(points_.size());
        for (std::size_t g = 0; g < points_.size(); ++g)
            out[g] = horner<double, Complex>(coef[points_[g].slot], points_[g].z0) / shift_.eval(1.0 / points_[g].z0);
        return out;
    }

    [[nodiscard]] const std::vector<Point>& points() const { return points_; }
    [[nodiscard]] const std::vector<Complex>& estimates() const { return est_; }
    [[nodiscard]] const std::vector<double>& stderrs() const { return se_; }

private:
    ShiftSpec shift_;
    std::vector<EstimatorPlan<double>> plans_;
    std::vector<Point> points_;
    std::vector<Complex> est_;
    std::vector<double> se_;
    std::size_t max_r0_ = std::numeric_limits<std::size_t>::max();
};

struct PairDecision {
    int winner = 0;  // 0: first argument, 1: second
    bool inconclusive = false;
    std::size_t point = 0;
    double separation = 0.0;
    double stderr_ = 0.0;
};

/// Picks the grid point with the largest separation-to-noise ratio and returns
/// the candidate whose forward value is closer to the estimate there.
inline PairDecision decide_pair(const Separator& sep, const std::vector<Complex>& fa, const std::vector<Complex>& fb,
                                double k) {
    PairDecision d;
    double best = -1.0;
    const auto& se = sep.stderrs();
    for (std::size_t g = 0; g < fa.size(); ++g) {
        const double delta = std::abs(fa[g] - fb[g]);
        const double snr = delta / std::max(se[g], 1e-300);
        if (snr > best) {
            best = snr;
            d.point = g;
        }
    }
    const Complex e = sep.estimates()[d.point];
    d.separation = std::abs(fa[d.point] - fb[d.point]);
    d.stderr_ = se[d.point];
    d.winner = std::abs(e - fb[d.point]) < std::abs(e - fa[d.point]) ? 1 : 0;
    d.inconclusive = k * d.stderr_ > d.separation / 2.0;
    return d;
}

// ---------------------------------------------------------------------------
// Single pairwise test

struct BitTestResult {
    int bit = 0;
    bool inconclusive = false;
    EvalPoint point;
    Complex estimate{};
    double stderr_ = 0.0;
    double separation = 0.0;
};

/// Test between two candidate continuations at the separation point of the
/// exact g difference. y0 and y1 must differ at position n.
inline BitTestResult bit_recovery_test(const SamplePool& pool, const BitString& x_prefix, const BitString& y0,
                                       const BitString& y1, const ReconConfig& cfg, const ChannelParams& channel,
                                       const ShiftSpec& shift) {
    cfg.validate();
    require(y0.size() == y1.size(), "bit_recovery_test: y0 and y1 must have equal length");
    require(y0.size() >= cfg.n && y0[cfg.n - 1] != y1[cfg.n - 1], "bit_recovery_test: y0 and y1 must differ at n");
    BitTestResult out;
    const BitString w = cfg.mode == ReconMode::Mean ? BitString{} : select_template_w(x_prefix, cfg.n, cfg.l);
    if (cfg.mode == ReconMode::Mean) {
        // Best radius/angle on the configured grid for the l = 0 statistic.
        const Separator sep(pool, cfg, w, channel, shift);
        const auto d = decide_pair(sep, sep.forward(y0), sep.forward(y1), cfg.inconclusive_k);
        out.bit = d.winner;
        out.inconclusive = d.inconclusive;
        out.point = EvalPoint::equal_mode(sep.points()[d.point].z0, 0.0, 0);
        out.estimate = sep.estimates()[d.point];
        out.stderr_ = d.stderr_;
        out.separation = d.separation;
        return out;
    }
    SeparationConfig sc;
    sc.mode = cfg.mode == ReconMode::Sparse ? SeparationMode::Sparse : SeparationMode::Dense;
    sc.rho = cfg.radii().front();
    sc.theta_max = cfg.arc_half_width();
    sc.lo = cfg.zrest_lo;
    sc.hi = cfg.zrest_hi;
    sc.theta_points = 257;
    sc.zrest_points = std::max<std::size_t>(cfg.zrest_points, 2);
    sc.max_refinements = 2;
    const auto sp = find_separation_point(y0, y1, w, sc);
    // Evaluate directly at the chosen point.
    const BoolFunction f = BoolFunction::indicator(w);
    const double zr = sp.point.zrest().real();
    const auto plan = make_general_plan<double>(f, zr, channel, cfg.grid);
    const PoolSummary<double> sum(pool, plan, channel, cfg.trunc, cfg.workers);
    const auto v = sum.estimate(sp.point.z0, shift);
    auto fwd = [&](const BitString& y) {
        auto c = plan_forward_coeffs<double>(y, plan, shift);
        return horner<double, Complex>(c, sp.point.z0) / shift.eval(1.0 / sp.point.z0);
    };
    const Complex g0 = fwd(y0), g1 = fwd(y1);
    out.point = sp.point;
    out.estimate = v.value;
    out.stderr_ = v.stderr_;
    out.separation = std::abs(g0 - g1);
    out.bit = std::abs(v.value - g1) < std::abs(v.value - g0) ? 1 : 0;
    out.inconclusive = cfg.inconclusive_k * v.stderr_ > out.separation / 2.0;
    return out;
}

// ---------------------------------------------------------------------------
// Tournament over candidate continuations

struct BitDecision {
    int bit = 0;
    bool inconclusive = false;        // no candidate beat every opponent
    std::size_t candidates = 0;       // total candidates considered (both sides)
    std::size_t pairs = 0;
    std::size_t inconclusive_pairs = 0;
    std::size_t wins[2] = {0, 0};     // pairs won by each side
};

/// All strings x_prefix[0:n-1] + b + c with c ranging over {0,1}^{horizon-n}.
inline std::vector<BitString> candidate_continuations(const BitString& x_prefix, std::size_t n, std::size_t horizon,
                                                      int b) {
    require(x_prefix.size() >= n - 1, "candidates: prefix shorter than n-1");
    require(horizon >= n, "candidates: horizon must be >= n");
    const std::size_t free = horizon - n;
    require(free <= 20, "candidates: too many free bits");
    std::vector<BitString> out;
    const BitString base = x_prefix.slice(0, n - 1);
    for (std::size_t c = 0; c < (std::size_t{1} << free); ++c) {
        BitString y = base;
        y.push_back(b);
        for (std::size_t i = 0; i < free; ++i) y.push_back(static_cast<int>((c >> i) & 1u));
        out.push_back(std::move(y));
    }
    return out;
}

/// Keeps the first candidate of each distinct g_y^{1_w}(z0, 0, ..., 0)
/// coefficient pattern (occurrences of w with their signs).
inline std::vector<BitString> sparse_representatives(const std::vector<BitString>& cands, const BitString& w) {
    const BoolFunction f = BoolFunction::indicator(w);
    const std::vector<double> zeros(w.size(), 0.0);
    std::map<std::vector<long long>, std::size_t> seen;
    std::vector<BitString> out;
    for (const auto& y : cands) {
        const auto c = message_g_coeffs<double>(y, f, zeros);
        std::vector<long long> key;
        key.reserve(c.size());
        for (double v : c) key.push_back(std::llround(v * 1048576.0));
        if (seen.emplace(std::move(key), out.size()).second) out.push_back(y);
    }
    return out;
}

inline BitDecision run_tournament(const Separator& sep, const std::vector<BitString>& side0,
                                  const std::vector<BitString>& side1, double k) {
    BitDecision out;
    out.candidates = side0.size() + side1.size();
    std::vector<std::vector<Complex>> f0, f1;
    for (const auto& y : side0) f0.push_back(sep.forward(y));
    for (const auto& y : side1) f1.push_back(sep.forward(y));
    std::vector<std::size_t> beaten0(side0.size(), 0), beaten1(side1.size(), 0);
    for (std::size_t i = 0; i < side0.size(); ++i)
        for (std::size_t j = 0; j < side1.size(); ++j) {
            const auto d = decide_pair(sep, f0[i], f1[j], k);
            ++out.pairs;
            if (d.inconclusive) ++out.inconclusive_pairs;
            if (d.winner == 0) {
                ++beaten0[i];
                ++out.wins[0];
            } else {
                ++beaten1[j];
                ++out.wins[1];
            }
        }
    const bool all0 = std::any_of(beaten0.begin(), beaten0.end(), [&](std::size_t v) { return v == side1.size(); });
    const bool all1 = std::any_of(beaten1.begin(), beaten1.end(), [&](std::size_t v) { return v == side0.size(); });
    if (all0 != all1) {
        out.bit = all0 ? 0 : 1;
        return out;
    }
    // No outright winner: fall back to the side holding the candidate with the
    // smallest standardized squared residual over the whole grid.
    out.inconclusive = true;
    const auto& e = sep.estimates();
    const auto& se = sep.stderrs();
    auto fit = [&](const std::vector<Complex>& f) {
        double s = 0.0;
        for (std::size_t g = 0; g < f.size(); ++g) s += std::norm(e[g] - f[g]) / std::max(se[g] * se[g], 1e-300);
        return s;
    };
    double best0 = std::numeric_limits<double>::infinity(), best1 = best0;
    for (const auto& f : f0) best0 = std::min(best0, fit(f));
    for (const auto& f : f1) best1 = std::min(best1, fit(f));
    out.bit = best1 < best0 ? 1 : 0;
    return out;
}

/// Bit n of the string behind the pool. SPARSE mode keeps one candidate per
/// occurrence pattern of w; DENSE and MEAN enumerate every continuation.
inline BitDecision shifted_reconstruct_bit(const SamplePool& pool, const BitString& x_prefix, const ReconConfig& cfg,
                                           const ChannelParams& channel, const ShiftSpec& shift) {
    cfg.validate();
    const std::size_t H = cfg.effective_horizon();
    auto side0 = candidate_continuations(x_prefix, cfg.n, H, 0);
    auto side1 = candidate_continuations(x_prefix, cfg.n, H, 1);
    BitString w;
    if (cfg.mode != ReconMode::Mean) w = select_template_w(x_prefix, cfg.n, cfg.l);
    if (cfg.mode == ReconMode::Sparse) {
        side0 = sparse_representatives(side0, w);
        side1 = sparse_representatives(side1, w);
    }
    const Separator sep(pool, cfg, w, channel, shift);
    return run_tournament(sep, side0, side1, cfg.inconclusive_k);
}

/// Baseline with the single-variable statistic (l = 0).
inline BitDecision mean_based_bit(const SamplePool& pool, const BitString& x_prefix, ReconConfig cfg,
                                  const ChannelParams& channel, const ShiftSpec& shift) {
    cfg.mode = ReconMode::Mean;
    return shifted_reconstruct_bit(pool, x_prefix, cfg, channel, shift);
}

// ---------------------------------------------------------------------------
// Average-case reconstruction

struct AverageCaseConfig {
    ParameterPack pack;
    ReconMode mode = ReconMode::Mean;
    std::size_t continuation_bits = 3;  // free bits after the target in each candidate
    std::size_t min_pool = 20;          // aligned traces needed to attempt a bit
    std::size_t lookahead = 48;         // trace positions kept past the candidate length
    std::vector<double> rhos{0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
    double theta_max = 3.1;  // nearly the full circle: adjacent transpositions separate away from z0 = 1
    std::size_t theta_points = 63;
    bool skip_fine = false;  // ablation: tau2 = tau1 + (a2 - a1)
    A2Config a2;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct BitLog {
    std::size_t index = 0;
    int bit = 0;
    bool flagged = false;
    bool bootstrap = false;
    std::size_t pool = 0;
    std::size_t a2 = 0;
    std::string note;
};

struct AverageCaseResult {
    BitString recovered;
    std::vector<BitLog> log;
    std::size_t flagged = 0;
};

/// Reconstructs a string of length n from its traces. The hypothesis gets
/// V = ell_c + window virtual zeros and every trace a simulated trace of 0^V.
/// Positions inside the simulated prefix have known provenance, so tau1 is
/// exact while the coarse anchor lies there; later anchors use the chained
/// scan. Until the fine anchor can sit in the real string, the frame starts at
/// the simulated boundary.
inline AverageCaseResult average_case_reconstruct(const std::vector<BitString>& traces, std::size_t n,
                                                  const AverageCaseConfig& cfg, const ChannelParams& channel) {
    require(n >= 1, "average_case_reconstruct: n must be >= 1");
    require(!traces.empty(), "average_case_reconstruct: no traces");
    const auto& pk = cfg.pack;
    const std::size_t lc = pk.coarse.ell, lf = pk.fine.ell, W = pk.window;
    require(W >= 3 * lf, "average_case_reconstruct: window must be at least 3 ell_f");
    const std::size_t V = lc + W;
    const std::size_t T = traces.size();

    std::vector<BitString> full(T);
    std::vector<std::vector<std::size_t>> prefix_f(T);  // source -> trace for the simulated 0^V
    for (std::size_t i = 0; i < T; ++i) {
        Rng rng(derive_seed(cfg.seed, "virtual-prefix", i));
        const TraceRecord rec = apply_channel(BitString(V, 0), channel, rng);
        prefix_f[i] = rec.f_map;
        full[i] = rec.bits;
        full[i].append(traces[i]);
    }

    BitString X(V, 0);
    AverageCaseResult res;
    std::vector<CoarseChain> chain(T);

    for (std::size_t k = V; k < V + n; ++k) {
        BitLog entry;
        entry.index = k - V;
        const std::size_t a1 = k - lc - W;
        std::vector<Index> tau1(T);
        for (std::size_t i = 0; i < T; ++i) {
            if (a1 < V) {
                tau1[i] = prefix_f[i][a1];
                chain[i] = {tau1[i], k};
            } else {
                tau1[i] = chained_coarse_align(X, full[i], k, pk, chain[i]);
            }
        }

        const bool bootstrap = k < V + (W + 2) / 3;
        SamplePool frame;
        frame.params = channel;
        std::size_t base = V;
        if (bootstrap) {
            entry.bootstrap = true;
            for (std::size_t i = 0; i < T; ++i) {
                const std::size_t b = prefix_f[i][V];
                frame.samples.push_back(full[i].slice(b, b + cfg.lookahead + (k - V) + 1 + cfg.continuation_bits));
            }
        } else {
            std::size_t a2 = 0;
            try {
                A2Config ac = cfg.a2;
                ac.seed = derive_seed(cfg.seed, "select-a2", k);
                a2 = select_a2(X, k, pk.fine, W, channel, ac);
            } catch (const NotFinelyWellBehaved&) {
                a2 = k - (W + 2) / 3;
                entry.note = "not finely well-behaved; fallback anchor";
            }
            entry.a2 = a2 >= V ? a2 - V : 0;
            base = a2 + lf;
            for (std::size_t i = 0; i < T; ++i) {
                if (!tau1[i]) continue;
                Index tau2;
                if (cfg.skip_fine) tau2 = *tau1[i] + (a2 - a1);
                else tau2 = fine_align(X, full[i], tau1[i], a2, pk.fine, lc, W);
                if (!tau2) continue;
                const std::size_t start = *tau2 + lf;
                if (start > full[i].size()) continue;
                frame.samples.push_back(full[i].slice(start, start + cfg.lookahead + (k - base) + 1 + cfg.continuation_bits));
            }
        }
        frame.is_false.assign(frame.samples.size(), 0);
        entry.pool = frame.samples.size();

        int bit = 0;
        if (frame.samples.size() < std::max<std::size_t>(cfg.min_pool, 2)) {
            Rng rng(derive_seed(cfg.seed, "coin", k));
            bit = random_bit(rng);
            entry.flagged = true;
            entry.note = "too few aligned traces";
        } else {
            // Frame string: X[base:k] known, then the target, then free continuation bits.
            const BitString known = X.suffix(base);
            const std::size_t rel = k - base;
            const std::size_t free = std::min(cfg.continuation_bits, V + n - 1 - k);
            ReconConfig rc;
            rc.n = rel + 1;
            rc.mode = cfg.mode;
            rc.horizon = rel + 1 + free;
            rc.rhos = cfg.rhos;
            rc.theta_max = cfg.theta_max;
            rc.theta_points = cfg.theta_points;
            rc.unknown_tail = free + k + 1 < V + n;
            rc.workers = cfg.workers;
            if (rc.mode != ReconMode::Mean) {
                rc.l = std::min<std::size_t>(3, rc.n);
                rc.horizon = std::max(rc.horizon, rc.n + rc.l);
            }
            const auto d = shifted_reconstruct_bit(frame, known, rc, channel, ShiftSpec::point_mass(0));
            bit = d.bit;
            entry.flagged = d.inconclusive;
            if (d.inconclusive && entry.note.empty()) entry.note = "no tournament winner; majority";
        }
        entry.bit = bit;
        if (entry.flagged) ++res.flagged;
        X.push_back(bit);
        res.log.push_back(entry);
    }
    res.recovered = X.suffix(V);
    return res;
}

}  // namespace tracelab
