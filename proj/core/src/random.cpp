#include "endonoise/random.hpp"

namespace endonoise {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
}

std::uint64_t mix64(std::uint64_t x) noexcept
{
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept
    : key_(mix64(mix64(mix64(seed + kGamma) + stream * kGamma) + index))
{
}

CounterRng::result_type CounterRng::operator()() noexcept
{
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double CounterRng::uniform() noexcept
{
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

} // namespace endonoise
