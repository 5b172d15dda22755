#include "driftlock/rng.hpp"

#include <cmath>

namespace driftlock {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace

double Rng::gauss() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - u keeps the argument of log strictly positive.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
}

long long Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 50.0) {
        const double limit = std::exp(-mean);
        double product = uniform01();
        long long count = 0;
        while (product > limit) {
            ++count;
            product *= uniform01();
        }
        return count;
    }
    double draw = mean + std::sqrt(mean) * gauss();
    return draw < 0.0 ? 0 : static_cast<long long>(std::llround(draw));
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1)));
}

} // namespace driftlock
