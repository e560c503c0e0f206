#ifndef CONDROT_RANDOM_HPP
#define CONDROT_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace condrot {

/// SplitMix64 finalizer, used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for sub-stream `index` of `master`; distinct indices give unrelated seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/**
 * Seeded generator with platform-independent variates.
 *
 * std::uniform_real_distribution and friends are implementation-defined,
 * so the variates here are built directly from mt19937_64 output to keep
 * runs bit-identical across standard libraries.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Exponential waiting time with the given rate; always strictly positive.
    double exponential(double rate) {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return -std::log(u) / rate;
    }

private:
    std::mt19937_64 engine_;
};

}

#endif
