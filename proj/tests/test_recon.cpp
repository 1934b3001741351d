#include <gtest/gtest.h>

#include <cmath>

#include "tracelab/recon.hpp"

using namespace tracelab;

namespace {

struct Desk {
    BitString x;
    SamplePool pool;
};

Desk desk_pool(std::uint64_t seed, const ChannelParams& ch, const ShiftSpec& shift, std::size_t traces,
               double eps = 0.0, std::size_t len = 12) {
    Rng rng(derive_seed(seed, "x", 0));
    Desk d;
    d.x = random_bits(len, rng);
    d.pool = make_sample_pool(d.x, shift, ch, eps, {}, traces, derive_seed(seed, "pool", 0));
    return d;
}

ReconConfig desk_config(ReconMode mode) {
    ReconConfig cfg;
    cfg.n = 8;
    cfg.l = 3;
    cfg.horizon = 12;
    cfg.mode = mode;
    return cfg;
}

BitString flip_at(BitString y, std::size_t pos) {
    std::string s = y.str();
    s[pos] = s[pos] == '0' ? '1' : '0';
    return BitString::parse(s);
}

}  // namespace

TEST(ReconConfigTest, ValidationAndModeNames) {
    ReconConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.effective_horizon(), 32u);
    cfg.horizon = 9;
    EXPECT_THROW(cfg.validate(), InvalidArgument);  // horizon < n + l
    cfg.horizon = 0;
    cfg.l = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    EXPECT_EQ(parse_mode("dense"), ReconMode::Dense);
    EXPECT_STREQ(mode_name(ReconMode::Mean), "mean");
    EXPECT_THROW(parse_mode("fast"), InvalidArgument);
}

TEST(Candidates, EnumerateContinuationsOfThePrefix) {
    const BitString x = BitString::parse("0110101");
    const auto c = candidate_continuations(x, 8, 11, 1);
    ASSERT_EQ(c.size(), 8u);
    for (const auto& y : c) {
        EXPECT_EQ(y.size(), 11u);
        EXPECT_EQ(y.slice(0, 7), x);
        EXPECT_EQ(y[7], 1);
    }
    EXPECT_NE(c[1], c[2]);
    EXPECT_THROW(candidate_continuations(x, 9, 12, 0), InvalidArgument);
}

TEST(Candidates, SparseRepresentativesCollapseEquivalentPatterns) {
    const BitString x = BitString::parse("0110101");
    const auto w = select_template_w(x, 8, 3);
    for (int b : {0, 1}) {
        const auto all = candidate_continuations(x, 8, 12, b);
        const auto reps = sparse_representatives(all, w);
        EXPECT_LT(reps.size(), all.size());
        EXPECT_GE(reps.size(), 1u);
    }
}

TEST(BitRecoveryTest, NoiselessPoolReturnsTrueBit) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const BitString y = random_bits(12, rng);
        const auto pool = make_sample_pool(y, ShiftSpec{}, ChannelParams(0, 0), 0.0, {}, 20, 1);
        const BitString other = flip_at(y, 7);
        const BitString& y0 = y[7] == 0 ? y : other;
        const BitString& y1 = y[7] == 0 ? other : y;
        for (ReconMode mode : {ReconMode::Sparse, ReconMode::Dense, ReconMode::Mean}) {
            const auto r = bit_recovery_test(pool, y.slice(0, 7), y0, y1, desk_config(mode), ChannelParams(0, 0), ShiftSpec{});
            EXPECT_EQ(r.bit, y[7]) << mode_name(mode);
            EXPECT_FALSE(r.inconclusive) << mode_name(mode);
        }
    }
}

TEST(BitRecoveryTest, RequiresPairDifferingAtTarget) {
    const BitString y = BitString::parse("011010011010");
    const auto pool = make_sample_pool(y, ShiftSpec{}, ChannelParams(0, 0), 0.0, {}, 5, 1);
    EXPECT_THROW(bit_recovery_test(pool, y.slice(0, 7), y, flip_at(y, 9), desk_config(ReconMode::Sparse),
                                   ChannelParams(0, 0), ShiftSpec{}),
                 InvalidArgument);
}

TEST(BitRecoveryTest, DeletionChannelAccuracyOverFiftyTrials) {
    const ChannelParams ch(0.1, 0.0);
    int correct = 0;
    for (int t = 0; t < 50; ++t) {
        const auto d = desk_pool(derive_seed(2, "trial", t), ch, ShiftSpec{}, 100000);
        const BitString other = flip_at(d.x, 7);
        const BitString& y0 = d.x[7] == 0 ? d.x : other;
        const BitString& y1 = d.x[7] == 0 ? other : d.x;
        const auto r = bit_recovery_test(d.pool, d.x.slice(0, 7), y0, y1, desk_config(ReconMode::Sparse), ch, ShiftSpec{});
        correct += r.bit == d.x[7];
    }
    EXPECT_GE(correct, 45);
}

TEST(BitRecoveryTest, SelfConsistentWhenConclusive) {
    const ChannelParams ch(0.1, 0.1);
    for (int t = 0; t < 20; ++t) {
        const auto d = desk_pool(derive_seed(3, "trial", t), ch, ShiftSpec::uniform(0, 1), 20000);
        const BitString other = flip_at(d.x, 7);
        const BitString& y0 = d.x[7] == 0 ? d.x : other;
        const BitString& y1 = d.x[7] == 0 ? other : d.x;
        const auto r = bit_recovery_test(d.pool, d.x.slice(0, 7), y0, y1, desk_config(ReconMode::Dense), ch,
                                         ShiftSpec::uniform(0, 1));
        if (!r.inconclusive) {
            EXPECT_EQ(r.bit, d.x[7]) << "trial " << t;
        }
    }
}

TEST(ShiftedReconstructBit, NoiselessAlwaysCorrect) {
    for (ReconMode mode : {ReconMode::Sparse, ReconMode::Dense, ReconMode::Mean})
        for (int t = 0; t < 5; ++t) {
            const auto d = desk_pool(derive_seed(4, "trial", t), ChannelParams(0, 0), ShiftSpec{}, 10);
            const auto r = shifted_reconstruct_bit(d.pool, d.x.slice(0, 7), desk_config(mode), ChannelParams(0, 0), ShiftSpec{});
            EXPECT_EQ(r.bit, d.x[7]) << mode_name(mode) << " trial " << t;
        }
}

TEST(ShiftedReconstructBit, MeanBaselineNoiselessCorrect) {
    for (int t = 0; t < 5; ++t) {
        const auto d = desk_pool(derive_seed(5, "trial", t), ChannelParams(0, 0), ShiftSpec{}, 10);
        EXPECT_EQ(mean_based_bit(d.pool, d.x.slice(0, 7), desk_config(ReconMode::Sparse), ChannelParams(0, 0), ShiftSpec{}).bit,
                  d.x[7]);
    }
}

TEST(ShiftedReconstructBit, SparseAgreesWithDenseWithFewerCandidates) {
    const ChannelParams ch(0.1, 0.0);
    int agree = 0, both = 0;
    for (int t = 0; t < 20; ++t) {
        const auto d = desk_pool(derive_seed(6, "trial", t), ch, ShiftSpec{}, 20000);
        const auto s = shifted_reconstruct_bit(d.pool, d.x.slice(0, 7), desk_config(ReconMode::Sparse), ch, ShiftSpec{});
        const auto e = shifted_reconstruct_bit(d.pool, d.x.slice(0, 7), desk_config(ReconMode::Dense), ch, ShiftSpec{});
        EXPECT_LT(s.candidates, e.candidates);
        if (!s.inconclusive && !e.inconclusive) {
            ++both;
            agree += s.bit == e.bit;
        }
    }
    EXPECT_EQ(agree, both);
}

TEST(ShiftedReconstructBit, LargerPoolsNeverAddInconclusivePairs) {
    const ChannelParams ch(0.1, 0.1);
    std::size_t small = 0, large = 0;
    for (int t = 0; t < 10; ++t) {
        Rng rng(derive_seed(7, "x", t));
        const BitString x = random_bits(12, rng);
        const auto big = make_sample_pool(x, ShiftSpec{}, ch, 0.0, {}, 80000, derive_seed(7, "pool", t));
        SamplePool sub = big;
        sub.samples.resize(20000);
        sub.is_false.resize(20000);
        small += shifted_reconstruct_bit(sub, x.slice(0, 7), desk_config(ReconMode::Sparse), ch, ShiftSpec{}).inconclusive_pairs;
        large += shifted_reconstruct_bit(big, x.slice(0, 7), desk_config(ReconMode::Sparse), ch, ShiftSpec{}).inconclusive_pairs;
    }
    EXPECT_LE(large, small);
}

TEST(MeanStatistic, EstimatesMatchExactForwardValues) {
    const ChannelParams ch(0.1, 0.0);
    const auto d = desk_pool(8, ch, ShiftSpec{}, 100000);
    ReconConfig cfg = desk_config(ReconMode::Mean);
    cfg.rhos = {0.5, 0.8};
    const Separator sep(d.pool, cfg, BitString{}, ch, ShiftSpec{});
    const auto f = sep.forward(d.x);
    ASSERT_EQ(f.size(), sep.estimates().size());
    for (std::size_t g = 0; g < f.size(); ++g)
        EXPECT_LE(std::abs(sep.estimates()[g] - f[g]), 4.0 * sep.stderrs()[g]) << "point " << g;
}

TEST(AverageCase, NoiselessReconstructionIsExact) {
    Rng rng(9);
    const std::size_t n = 96;
    const BitString x = random_bits(n, rng);
    std::vector<BitString> traces(30, x);
    AverageCaseConfig cfg;
    cfg.pack = practical_pack(n);
    cfg.theta_points = 31;
    const auto res = average_case_reconstruct(traces, n, cfg, ChannelParams(0, 0));
    EXPECT_EQ(res.recovered, x);
    EXPECT_EQ(res.log.size(), n);
}

TEST(AverageCase, DeterministicUnderFixedSeeds) {
    Rng rng(10);
    const std::size_t n = 48;
    const BitString x = random_bits(n, rng);
    const ChannelParams ch(0.05, 0.05);
    const auto pool = make_sample_pool(x, ShiftSpec{}, ch, 0.0, {}, 300, 11);
    AverageCaseConfig cfg;
    cfg.pack = practical_pack(n);
    cfg.theta_points = 15;
    cfg.seed = 5;
    const auto a = average_case_reconstruct(pool.samples, n, cfg, ch);
    const auto b = average_case_reconstruct(pool.samples, n, cfg, ch);
    EXPECT_EQ(a.recovered, b.recovered);
    EXPECT_EQ(a.flagged, b.flagged);
}

TEST(AverageCase, TooFewTracesAreFlagged) {
    const BitString x = BitString::parse("0110100110010110");
    AverageCaseConfig cfg;
    cfg.pack = practical_pack(16);
    const auto res = average_case_reconstruct(std::vector<BitString>(5, x), 16, cfg, ChannelParams(0, 0));
    EXPECT_EQ(res.flagged, 16u);
    for (const auto& e : res.log) EXPECT_EQ(e.note, "too few aligned traces");
    EXPECT_THROW(average_case_reconstruct({}, 16, cfg, ChannelParams(0, 0)), InvalidArgument);
}
