#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "tracelab/channel.hpp"

using namespace tracelab;

namespace {

BitString bits(const char* s) { return BitString::parse(s); }

}  // namespace

TEST(BitStringBasics, ParseRoundTripAndSlicing) {
    const BitString x = bits("0110100");
    EXPECT_EQ(x.str(), "0110100");
    EXPECT_EQ(x.slice(2, 5).str(), "101");
    EXPECT_EQ(x.slice(5, 100).str(), "00");
    EXPECT_EQ(x.suffix(4).str(), "100");
    EXPECT_THROW(BitString::parse("012"), InvalidArgument);
    EXPECT_THROW((void)x.at(7), InvalidArgument);
}

TEST(SeedDerivation, DistinctLabelsAndIndicesGiveDistinctSeeds) {
    EXPECT_EQ(derive_seed(1, "pool", 0), derive_seed(1, "pool", 0));
    EXPECT_NE(derive_seed(1, "pool", 0), derive_seed(1, "pool", 1));
    EXPECT_NE(derive_seed(1, "pool", 0), derive_seed(1, "message", 0));
    EXPECT_NE(derive_seed(1, "pool", 0), derive_seed(2, "pool", 0));
}

TEST(ChannelParamsValidation, RejectsOutOfRangeProbabilities) {
    EXPECT_THROW(ChannelParams(1.0, 0.0), InvalidArgument);
    EXPECT_THROW(ChannelParams(-0.1, 0.0), InvalidArgument);
    EXPECT_THROW(ChannelParams(0.0, 1.0), InvalidArgument);
    EXPECT_THROW(ChannelParams(std::nan(""), 0.0), InvalidArgument);
    EXPECT_NO_THROW(ChannelParams(0.99, 0.5));
}

TEST(ApplyChannel, NoiselessChannelIsIdentityWithIdentityMaps) {
    Rng rng(1);
    const BitString x = bits("10110");
    const TraceRecord rec = apply_channel(x, ChannelParams(0, 0), rng);
    EXPECT_EQ(rec.bits, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(rec.provenance[i], static_cast<std::int64_t>(i));
        EXPECT_EQ(rec.f(i), i);
        EXPECT_EQ(rec.g(i), i);
    }
    EXPECT_EQ(rec.f(5), 5u);  // sentinels
    EXPECT_EQ(rec.g(5), 5u);
}

TEST(ApplyChannel, MeanTraceLengthMatchesLengthRatio) {
    const std::size_t n = 50, runs = 100000;
    const ChannelParams ch(0.2, 0.2);
    Rng rng(7);
    const BitString x = random_bits(n, rng);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < runs; ++i) {
        const double len = static_cast<double>(apply_channel(x, ch, rng).bits.size());
        sum += len;
        sum2 += len * len;
    }
    const double mean = sum / runs;
    const double se = std::sqrt((sum2 / runs - mean * mean) / runs);
    EXPECT_NEAR(mean, n * ch.length_ratio(), 3.0 * se);
}

TEST(ApplyChannel, SingleBitIsDeletedWithProbabilityQ) {
    const std::size_t runs = 100000;
    Rng rng(3);
    std::size_t empty = 0;
    for (std::size_t i = 0; i < runs; ++i) empty += apply_channel(bits("1"), ChannelParams(0.5, 0.0), rng).bits.empty();
    const double p = static_cast<double>(empty) / runs;
    EXPECT_NEAR(p, 0.5, 3.0 * std::sqrt(0.25 / runs));
}

TEST(ApplyChannel, InsertionCountIsGeometric) {
    // With q = 0, |trace| - |x| is a sum of |x| Geometric(q') counts with mean q'/p'.
    const ChannelParams ch(0.0, 0.3);
    Rng rng(11);
    const std::size_t runs = 50000;
    double sum = 0.0;
    for (std::size_t i = 0; i < runs; ++i) sum += static_cast<double>(apply_channel(bits("0"), ch, rng).bits.size() - 1);
    const double mean = sum / runs;
    const double var = ch.qp / (ch.pp() * ch.pp());
    EXPECT_NEAR(mean, ch.qp / ch.pp(), 4.0 * std::sqrt(var / runs));
}

TEST(ShiftedChannel, PointMassZeroReproducesApplyChannel) {
    const BitString x = bits("1101001011");
    Rng a(5), b(5);
    for (int i = 0; i < 200; ++i) {
        const auto r1 = apply_channel(x, ChannelParams(0.1, 0.1), a);
        const auto r2 = apply_shifted_channel(x, ShiftSpec::point_mass(0), ChannelParams(0.1, 0.1), b);
        ASSERT_EQ(r1.bits, r2.bits);
        ASSERT_EQ(r1.provenance, r2.provenance);
    }
}

TEST(ShiftedChannel, PointMassShiftTruncatesNoiselessInput) {
    Rng rng(1);
    const auto rec = apply_shifted_channel(bits("0000011111"), ShiftSpec::point_mass(5), ChannelParams(0, 0), rng);
    EXPECT_EQ(rec.bits.str(), "11111");
    EXPECT_EQ(rec.shift_used, 5u);
}

TEST(ShiftedChannel, ShiftHistogramFollowsPmf) {
    Rng rng(9);
    const auto shift = ShiftSpec::uniform(2, 3);
    const std::size_t runs = 10000;
    std::size_t twos = 0;
    for (std::size_t i = 0; i < runs; ++i) {
        const auto rec = apply_shifted_channel(bits("0101"), shift, ChannelParams(0, 0), rng);
        ASSERT_TRUE(rec.shift_used == 2 || rec.shift_used == 3);
        twos += rec.shift_used == 2;
    }
    EXPECT_NEAR(static_cast<double>(twos) / runs, 0.5, 3.0 * std::sqrt(0.25 / runs));
}

TEST(ShiftedChannel, ShiftBeyondStringIsRejected) {
    Rng rng(1);
    EXPECT_THROW(apply_shifted_channel(bits("01"), ShiftSpec::point_mass(2), ChannelParams(0, 0), rng),
                 InvalidArgument);
}

TEST(ShiftSpecBasics, GeneratingFunctionAndValidation) {
    const auto s = ShiftSpec::uniform(1, 2);
    EXPECT_NEAR(std::abs(s.eval(Complex(0.5, 0.0)) - Complex(0.5 * 0.5 + 0.5 * 0.25, 0.0)), 0.0, 1e-15);
    EXPECT_THROW(ShiftSpec(0, {0.5, 0.4}), InvalidArgument);
    EXPECT_THROW(ShiftSpec(0, {}), InvalidArgument);
    EXPECT_THROW(ShiftSpec(0, {1.5, -0.5}), InvalidArgument);
}

TEST(Misalignment, NoiselessTraceDistances) {
    Rng rng(1);
    const auto rec = apply_channel(bits("0110101101"), ChannelParams(0, 0), rng);
    for (std::size_t k = 0; k < 7; ++k) {
        EXPECT_EQ(misalignment(rec, k, k), 0u);
        EXPECT_EQ(misalignment(rec, k, k + 3), 3u);
    }
}

TEST(Misalignment, AgreesWithProvenanceRecomputation) {
    Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const BitString x = random_bits(60, rng);
        const auto rec = apply_channel(x, ChannelParams(0.1, 0.1), rng);
        for (std::size_t k = 0; k <= x.size(); ++k)
            for (std::size_t kp = 0; kp <= rec.bits.size(); kp += 3)
                ASSERT_EQ(misalignment(rec, k, kp), oracle::misalignment(rec, k, kp)) << "k=" << k << " k'=" << kp;
    }
}

TEST(Misalignment, OutOfRangeIndexThrows) {
    Rng rng(1);
    const auto rec = apply_channel(bits("0101"), ChannelParams(0, 0), rng);
    EXPECT_THROW(misalignment(rec, 5, 0), InvalidArgument);
    EXPECT_THROW(misalignment(rec, 0, 5), InvalidArgument);
}

TEST(SamplePoolGeneration, EpsilonExtremes) {
    const BitString x = bits("0110101101");
    const auto p0 = make_sample_pool(x, ShiftSpec{}, ChannelParams(0.1, 0.1), 0.0, {}, 500, 1);
    EXPECT_EQ(p0.false_count(), 0u);
    const auto p1 = make_sample_pool(x, ShiftSpec{}, ChannelParams(0.1, 0.1), 1.0, {}, 500, 1);
    EXPECT_EQ(p1.false_count(), 500u);
}

TEST(SamplePoolGeneration, FalseSampleCountIsBinomial) {
    const std::size_t N = 10000;
    const auto p = make_sample_pool(bits("0110101101"), ShiftSpec{}, ChannelParams(0.1, 0.1), 0.1, {}, N, 77);
    EXPECT_NEAR(static_cast<double>(p.false_count()), 1000.0, 3.0 * std::sqrt(N * 0.1 * 0.9));
}

TEST(SamplePoolGeneration, IndependentOfWorkerCount) {
    Rng rng(4);
    const BitString x = random_bits(40, rng);
    const auto a = make_sample_pool(x, ShiftSpec::uniform(0, 2), ChannelParams(0.2, 0.1), 0.05, {}, 3000, 9, 1);
    const auto b = make_sample_pool(x, ShiftSpec::uniform(0, 2), ChannelParams(0.2, 0.1), 0.05, {}, 3000, 9, 4);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_EQ(a.is_false, b.is_false);
}

TEST(PoolFile, RoundTripPreservesSamplesAndFlags) {
    const auto p = make_sample_pool(bits("0110101101"), ShiftSpec{}, ChannelParams(0.25, 0.125), 0.3, {}, 50, 5);
    std::stringstream ss;
    write_pool(ss, p);
    const auto back = read_pool(ss);
    EXPECT_EQ(back.samples, p.samples);
    EXPECT_EQ(back.is_false, p.is_false);
    EXPECT_EQ(back.params.q, 0.25);
    EXPECT_EQ(back.params.qp, 0.125);
    EXPECT_EQ(back.seed, 5u);
}

TEST(PoolFile, CommentLinesAreSkipped) {
    std::stringstream ss("#tracelab-pool v1 q=0 qp=0 eps=0 seed=1 n=2\n# note\n0101\n!11\n");
    const auto p = read_pool(ss);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p.samples[0].str(), "0101");
    EXPECT_EQ(p.is_false[1], 1);
}

TEST(PoolFile, MalformedInputIsRejected) {
    std::stringstream no_header("0101\n");
    EXPECT_THROW(read_pool(no_header), InvalidArgument);
    std::stringstream bad_key("#tracelab-pool v1 q=0 colour=3\n");
    EXPECT_THROW(read_pool(bad_key), InvalidArgument);
    std::stringstream bad_count("#tracelab-pool v1 q=0 qp=0 n=3\n01\n");
    EXPECT_THROW(read_pool(bad_count), InvalidArgument);
    std::stringstream bad_bits("#tracelab-pool v1 q=0 qp=0\n0121\n");
    EXPECT_THROW(read_pool(bad_bits), InvalidArgument);
}
