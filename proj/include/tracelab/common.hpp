#pragma once

// Shared value types and utilities: bit strings, errors, seeding, and a
// deterministic parallel-for.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace tracelab {

inline constexpr const char* kVersion = "0.3.0";

using Complex = std::complex<double>;

/// Invalid input or configuration. The message names the offending field.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical or algorithmic failure at run time.
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

/// Finite 0/1 sequence. Storage is 0-indexed; when a position appears as a
/// polynomial exponent the 1-indexed convention applies (storage index k
/// contributes exponent k).
class BitString {
public:
    BitString() = default;
    explicit BitString(std::size_t n, std::uint8_t fill = 0) : bits_(n, fill) {
        require(fill <= 1, "BitString: fill must be 0 or 1");
    }
    BitString(std::initializer_list<int> bits) {
        bits_.reserve(bits.size());
        for (int b : bits) push_back(b);
    }
    explicit BitString(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
        for (auto b : bits_) require(b <= 1, "BitString: element outside {0,1}");
    }

    static BitString parse(std::string_view text) {
        BitString out;
        out.bits_.reserve(text.size());
        for (char ch : text) {
            if (ch != '0' && ch != '1')
                throw InvalidArgument("BitString: unexpected character '" + std::string(1, ch) + "'");
            out.bits_.push_back(static_cast<std::uint8_t>(ch - '0'));
        }
        return out;
    }

    [[nodiscard]] std::string str() const {
        std::string s(bits_.size(), '0');
        for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = static_cast<char>('0' + bits_[i]);
        return s;
    }

    [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }
    [[nodiscard]] bool empty() const noexcept { return bits_.empty(); }
    [[nodiscard]] std::uint8_t operator[](std::size_t i) const noexcept { return bits_[i]; }
    [[nodiscard]] std::uint8_t at(std::size_t i) const {
        if (i >= bits_.size()) throw InvalidArgument("BitString: index out of range");
        return bits_[i];
    }
    void set(std::size_t i, std::uint8_t b) {
        require(b <= 1, "BitString: element outside {0,1}");
        bits_.at(i) = b;
    }
    void push_back(int b) {
        require(b == 0 || b == 1, "BitString: element outside {0,1}");
        bits_.push_back(static_cast<std::uint8_t>(b));
    }
    void append(const BitString& other) { bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end()); }
    void reserve(std::size_t n) { bits_.reserve(n); }

    /// Bits [begin, end) clipped to the string.
    [[nodiscard]] BitString slice(std::size_t begin, std::size_t end) const {
        end = std::min(end, bits_.size());
        begin = std::min(begin, end);
        BitString out;
        out.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(begin),
                         bits_.begin() + static_cast<std::ptrdiff_t>(end));
        return out;
    }
    [[nodiscard]] BitString suffix(std::size_t begin) const { return slice(begin, bits_.size()); }

    [[nodiscard]] std::span<const std::uint8_t> view() const noexcept { return bits_; }
    [[nodiscard]] const std::vector<std::uint8_t>& data() const noexcept { return bits_; }

    friend bool operator==(const BitString&, const BitString&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

inline BitString operator+(BitString a, const BitString& b) {
    a.append(b);
    return a;
}

// ---------------------------------------------------------------------------
// Seeding. Sub-seeds are splitmix64 mixes of (master, label hash, index) so any
// individual sample can be regenerated without replaying the stream.

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master ^ hash_label(label)) + splitmix64(index + 0x5851F42D4C957F2DULL));
}

using Rng = std::mt19937_64;

/// Uniform on (0, 1], 53-bit resolution; never returns 0 so log() is safe.
inline double uniform_open0(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

inline int random_bit(Rng& rng) { return static_cast<int>(rng() >> 63); }

inline BitString random_bits(std::size_t n, Rng& rng) {
    BitString out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_bit(rng));
    return out;
}

// ---------------------------------------------------------------------------

/// Runs body(i) for i in [0, n) over `workers` threads. Tasks are assigned in
/// fixed contiguous ranges; callers write results into per-task slots, so the
/// outcome never depends on the worker count.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Pairwise sum with a fixed split topology; bit-stable for a given input order.
template <class T>
T pairwise_sum(std::span<const T> v) {
    if (v.empty()) return T{};
    if (v.size() <= 8) {
        T s{};
        for (const auto& x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace tracelab
