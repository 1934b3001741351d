#pragma once

// Insertion-deletion channel with optional random shift and false samples.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tracelab/common.hpp"

namespace tracelab {

struct ChannelParams {
    double q = 0.0;   // deletion probability
    double qp = 0.0;  // insertion probability q'

    ChannelParams() = default;
    ChannelParams(double q_, double qp_) : q(q_), qp(qp_) { validate(); }

    void validate() const {
        require(std::isfinite(q) && q >= 0.0 && q < 1.0, "q must lie in [0,1)");
        require(std::isfinite(qp) && qp >= 0.0 && qp < 1.0, "qp must lie in [0,1)");
    }
    [[nodiscard]] double p() const { return 1.0 - q; }
    [[nodiscard]] double pp() const { return 1.0 - qp; }
    /// Expected trace length per source bit.
    [[nodiscard]] double length_ratio() const { return p() / pp(); }
};

/// Distribution of the shift s over the window [offset, offset + width].
class ShiftSpec {
public:
    ShiftSpec() : offset_(0), pmf_{1.0} {}
    ShiftSpec(std::size_t offset, std::vector<double> pmf) : offset_(offset), pmf_(std::move(pmf)) {
        require(!pmf_.empty(), "shift pmf must be non-empty");
        double total = 0.0;
        for (double v : pmf_) {
            require(std::isfinite(v) && v >= 0.0, "shift pmf entries must be non-negative");
            total += v;
        }
        require(std::abs(total - 1.0) <= 1e-12, "shift pmf must sum to 1");
        cdf_.resize(pmf_.size());
        std::partial_sum(pmf_.begin(), pmf_.end(), cdf_.begin());
    }

    static ShiftSpec point_mass(std::size_t s) { return ShiftSpec(s, {1.0}); }
    static ShiftSpec uniform(std::size_t lo, std::size_t hi) {
        require(lo <= hi, "uniform shift needs lo <= hi");
        const std::size_t m = hi - lo + 1;
        return ShiftSpec(lo, std::vector<double>(m, 1.0 / static_cast<double>(m)));
    }

    [[nodiscard]] std::size_t offset() const { return offset_; }
    [[nodiscard]] std::size_t width() const { return pmf_.size() - 1; }
    [[nodiscard]] std::size_t max_shift() const { return offset_ + width(); }
    [[nodiscard]] double prob(std::size_t s) const {
        if (s < offset_ || s > max_shift()) return 0.0;
        return pmf_[s - offset_];
    }
    [[nodiscard]] const std::vector<double>& pmf() const { return pmf_; }

    /// P(z) = sum_s sigma(s) z^s.
    [[nodiscard]] Complex eval(Complex z) const {
        Complex acc = 0.0;
        for (std::size_t i = pmf_.size(); i-- > 0;) acc = acc * z + pmf_[i];
        return acc * std::pow(z, static_cast<double>(offset_));
    }

    std::size_t sample(Rng& rng) const {
        if (pmf_.size() == 1) return offset_;
        const double u = uniform_open0(rng) * cdf_.back();
        for (std::size_t i = 0; i < cdf_.size(); ++i)
            if (u <= cdf_[i]) return offset_ + i;
        return max_shift();
    }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os << "offset=" << offset_ << ",pmf=[";
        for (std::size_t i = 0; i < pmf_.size(); ++i) os << (i ? ";" : "") << pmf_[i];
        os << "]";
        return os.str();
    }

private:
    std::size_t offset_;
    std::vector<double> pmf_;
    std::vector<double> cdf_{1.0};
};

inline constexpr std::int64_t kInserted = -1;

/// A trace with its ground truth. All source indices refer to the unshifted x.
/// f_map has |x|+1 entries and g_map has |trace|+1 entries; the final entry of
/// each is the one-past-the-end sentinel.
struct TraceRecord {
    BitString bits;
    std::vector<std::int64_t> provenance;  // source index, or kInserted
    std::size_t shift_used = 0;
    std::size_t source_length = 0;
    std::vector<std::size_t> f_map;  // source -> trace, next surviving bit
    std::vector<std::size_t> g_map;  // trace -> source, next non-inserted bit

    [[nodiscard]] std::size_t f(std::size_t k) const {
        if (k >= f_map.size()) throw InvalidArgument("misalignment: source index out of range");
        return f_map[k];
    }
    [[nodiscard]] std::size_t g(std::size_t r) const {
        if (r >= g_map.size()) throw InvalidArgument("misalignment: trace index out of range");
        return g_map[r];
    }
};

/// Inserted-bit count before one source bit: Geometric(q') on {0,1,...}.
inline std::size_t sample_insertions(double qp, Rng& rng) {
    if (qp <= 0.0) return 0;
    return static_cast<std::size_t>(std::floor(std::log(uniform_open0(rng)) / std::log(qp)));
}

namespace detail {

inline bool deleted(double q, Rng& rng) { return q > 0.0 && uniform_open0(rng) <= q; }

// Runs the channel on x[start:]. Provenance is recorded when prov != nullptr.
inline BitString run_channel(const BitString& x, std::size_t start, const ChannelParams& ch, Rng& rng,
                             std::vector<std::int64_t>* prov) {
    BitString out;
    out.reserve(static_cast<std::size_t>(static_cast<double>(x.size() - start) * (1.0 + ch.qp / ch.pp())) + 4);
    for (std::size_t j = start; j < x.size(); ++j) {
        const std::size_t g = sample_insertions(ch.qp, rng);
        for (std::size_t t = 0; t < g; ++t) {
            const int b = random_bit(rng);
            if (!deleted(ch.q, rng)) {
                out.push_back(b);
                if (prov) prov->push_back(kInserted);
            }
        }
        if (!deleted(ch.q, rng)) {
            out.push_back(x[j]);
            if (prov) prov->push_back(static_cast<std::int64_t>(j));
        }
    }
    return out;
}

inline void build_maps(TraceRecord& rec) {
    const std::size_t n = rec.source_length;
    const std::size_t m = rec.bits.size();
    rec.f_map.assign(n + 1, m);
    rec.g_map.assign(m + 1, n);
    // f: walk sources from the right, remembering the nearest surviving bit.
    std::vector<std::size_t> pos_of(n, m);
    for (std::size_t r = 0; r < m; ++r)
        if (rec.provenance[r] != kInserted) pos_of[static_cast<std::size_t>(rec.provenance[r])] = r;
    std::size_t next = m;
    for (std::size_t k = n; k-- > 0;) {
        if (pos_of[k] != m) next = pos_of[k];
        rec.f_map[k] = next;
    }
    std::size_t next_src = n;
    for (std::size_t r = m; r-- > 0;) {
        if (rec.provenance[r] != kInserted) next_src = static_cast<std::size_t>(rec.provenance[r]);
        rec.g_map[r] = next_src;
    }
}

}  // namespace detail

inline TraceRecord apply_channel(const BitString& x, const ChannelParams& params, Rng& rng) {
    params.validate();
    TraceRecord rec;
    rec.source_length = x.size();
    rec.bits = detail::run_channel(x, 0, params, rng, &rec.provenance);
    detail::build_maps(rec);
    return rec;
}

inline TraceRecord apply_shifted_channel(const BitString& x, const ShiftSpec& shift, const ChannelParams& params,
                                         Rng& rng) {
    params.validate();
    require(shift.max_shift() < x.size() || (x.empty() && shift.max_shift() == 0),
            "shift support exceeds the string length");
    TraceRecord rec;
    rec.source_length = x.size();
    rec.shift_used = shift.sample(rng);
    rec.bits = detail::run_channel(x, rec.shift_used, params, rng, &rec.provenance);
    detail::build_maps(rec);
    return rec;
}

/// Bits only; same random stream as apply_shifted_channel.
inline BitString shifted_trace(const BitString& x, const ShiftSpec& shift, const ChannelParams& params, Rng& rng) {
    const std::size_t s = shift.sample(rng);
    return detail::run_channel(x, s, params, rng, nullptr);
}

/// d(k, k') = max(|f(k) - k'|, |g(k') - k|).
inline std::size_t misalignment(const TraceRecord& rec, std::size_t k, std::size_t k_prime) {
    const auto fk = static_cast<std::int64_t>(rec.f(k));
    const auto gk = static_cast<std::int64_t>(rec.g(k_prime));
    const auto a = std::abs(fk - static_cast<std::int64_t>(k_prime));
    const auto b = std::abs(gk - static_cast<std::int64_t>(k));
    return static_cast<std::size_t>(std::max(a, b));
}

// ---------------------------------------------------------------------------
// Sample pools

struct SamplePool {
    std::vector<BitString> samples;
    std::vector<std::uint8_t> is_false;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    ChannelParams params;

    [[nodiscard]] std::size_t size() const { return samples.size(); }
    [[nodiscard]] std::size_t false_count() const {
        return static_cast<std::size_t>(std::count(is_false.begin(), is_false.end(), std::uint8_t{1}));
    }
};

using Adversary = std::function<BitString(Rng&)>;

/// Uniform random strings whose length is the expected trace length of x
/// under the channel after the mean shift.
inline Adversary default_adversary(const BitString& x, const ShiftSpec& shift, const ChannelParams& params) {
    double mean_shift = 0.0;
    for (std::size_t i = 0; i < shift.pmf().size(); ++i)
        mean_shift += shift.pmf()[i] * static_cast<double>(shift.offset() + i);
    const double len = std::max(0.0, (static_cast<double>(x.size()) - mean_shift) * params.length_ratio());
    const auto n = static_cast<std::size_t>(std::llround(len));
    return [n](Rng& rng) { return random_bits(n, rng); };
}

inline constexpr std::size_t kPoolChunk = 1024;

/// Samples are generated in fixed chunks of kPoolChunk, each chunk seeded from
/// (seed, "pool", chunk index), so the pool is identical for any worker count.
inline SamplePool make_sample_pool(const BitString& x, const ShiftSpec& shift, const ChannelParams& params,
                                   double epsilon, const Adversary& adversary, std::size_t n_samples,
                                   std::uint64_t seed, unsigned workers = 1) {
    params.validate();
    require(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0,1]");
    require(shift.max_shift() < x.size() || (x.empty() && shift.max_shift() == 0),
            "shift support exceeds the string length");
    const Adversary adv = adversary ? adversary : default_adversary(x, shift, params);
    SamplePool pool;
    pool.samples.resize(n_samples);
    pool.is_false.assign(n_samples, 0);
    pool.epsilon = epsilon;
    pool.seed = seed;
    pool.params = params;
    const std::size_t chunks = (n_samples + kPoolChunk - 1) / kPoolChunk;
    parallel_for(chunks, workers, [&](std::size_t c) {
        Rng rng(derive_seed(seed, "pool", c));
        const std::size_t hi = std::min(n_samples, (c + 1) * kPoolChunk);
        for (std::size_t i = c * kPoolChunk; i < hi; ++i) {
            const bool fake = epsilon > 0.0 && (epsilon >= 1.0 || uniform_open0(rng) <= epsilon);
            if (fake) {
                pool.is_false[i] = 1;
                pool.samples[i] = adv(rng);
            } else {
                pool.samples[i] = shifted_trace(x, shift, params, rng);
            }
        }
    });
    return pool;
}

// ---------------------------------------------------------------------------
// Pool file format: a header line, then one sample per line with false samples
// prefixed by "!". Later lines starting with "#" are comments.

inline void write_pool(std::ostream& os, const SamplePool& pool) {
    os << "#tracelab-pool v1 q=" << std::setprecision(17) << pool.params.q << " qp=" << pool.params.qp
       << " eps=" << pool.epsilon << " seed=" << pool.seed << " n=" << pool.samples.size() << "\n";
    for (std::size_t i = 0; i < pool.samples.size(); ++i) {
        if (pool.is_false[i]) os << '!';
        os << pool.samples[i].str() << "\n";
    }
}

inline SamplePool read_pool(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("#tracelab-pool v1", 0) != 0)
        throw InvalidArgument("pool: missing '#tracelab-pool v1' header");
    SamplePool pool;
    std::optional<std::size_t> declared;
    std::istringstream hs(line.substr(17));
    std::string tok;
    double q = 0.0, qp = 0.0;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw InvalidArgument("pool: malformed header field '" + tok + "'");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key != "q" && key != "qp" && key != "eps" && key != "seed" && key != "n")
            throw InvalidArgument("pool: unknown header field '" + key + "'");
        try {
            if (key == "q") q = std::stod(val);
            else if (key == "qp") qp = std::stod(val);
            else if (key == "eps") pool.epsilon = std::stod(val);
            else if (key == "seed") pool.seed = std::stoull(val);
            else declared = std::stoull(val);
        } catch (const std::logic_error&) {
            throw InvalidArgument("pool: bad value for header field '" + key + "'");
        }
    }
    pool.params = ChannelParams(q, qp);
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() == '#') continue;  // comment
        bool fake = false;
        std::string_view body = line;
        if (!body.empty() && body.front() == '!') {
            fake = true;
            body.remove_prefix(1);
        }
        pool.samples.push_back(BitString::parse(body));
        pool.is_false.push_back(fake ? 1 : 0);
    }
    if (declared && *declared != pool.samples.size())
        throw InvalidArgument("pool: header n does not match the number of samples");
    return pool;
}

}  // namespace tracelab
