#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace endonoise {

// Name recorded in manifests so synthetic data can be traced to the generator
// that produced it. Variates are drawn with the standard library's
// distributions, so bit-exact reproduction also needs the same C++ runtime.
inline constexpr std::string_view kRngAlgorithm = "splitmix64-counter/std-distributions";

std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based generator: each (seed, stream, index) triple names an
/// independent sequence, so per-pixel draws do not depend on visiting order.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace endonoise
