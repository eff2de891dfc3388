#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace surveyforge::rng {

/// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// 64-bit FNV-1a, used to turn string tags into substream ids.
constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based generator ("keyed SplitMix64"): output n is a pure function
/// of (key, n), so a stream can be split into independent substreams by
/// deriving child keys, and no state is shared between substreams.
///
/// Satisfies UniformRandomBitGenerator. The helper draws below are written
/// out explicitly so sequences are identical across standard libraries.
class Stream {
public:
    using result_type = std::uint64_t;

    constexpr explicit Stream(std::uint64_t key) noexcept : key_{mix64(key ^ kSalt)} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGamma); }

    /// Child stream identified by an integer tag. Does not advance this stream.
    constexpr Stream substream(std::uint64_t tag) const noexcept {
        return Stream{key_ ^ mix64(tag * kGamma + kSalt), Derived{}};
    }

    constexpr Stream substream(std::string_view tag) const noexcept { return substream(fnv1a(tag)); }

    /// Uniform on [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer on [0, n). Rejection sampling keeps it unbiased.
    constexpr std::size_t below(std::size_t n) noexcept {
        if (n <= 1) {
            return 0;
        }
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = max() - (max() % bound);
        std::uint64_t x = (*this)();
        while (x >= limit) {
            x = (*this)();
        }
        return static_cast<std::size_t>(x % bound);
    }

    /// Uniform integer on [lo, hi].
    constexpr long between(long lo, long hi) noexcept {
        return lo + static_cast<long>(below(static_cast<std::size_t>(hi - lo + 1)));
    }

    /// Index drawn from unnormalised nonnegative weights.
    template <class Range>
    std::size_t categorical(const Range &weights) noexcept {
        double total = 0.0;
        for (double w : weights) {
            total += w;
        }
        double u = uniform() * total;
        std::size_t i = 0;
        std::size_t last_positive = 0;
        for (double w : weights) {
            if (w > 0.0) {
                last_positive = i;
                if (u < w) {
                    return i;
                }
                u -= w;
            }
            ++i;
        }
        return last_positive;
    }

    /// Standard normal via Box-Muller (one value per call).
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    constexpr std::uint64_t key() const noexcept { return key_; }

private:
    struct Derived {};
    constexpr Stream(std::uint64_t key, Derived) noexcept : key_{mix64(key)} {}

    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    static constexpr std::uint64_t kSalt = 0x5851f42d4c957f2dULL;

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle driven by a Stream.
template <class Container>
void shuffle(Container &items, Stream &stream) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = stream.below(i);
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

} // namespace surveyforge::rng
