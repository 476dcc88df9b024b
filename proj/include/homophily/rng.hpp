#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace homophily {

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Deterministic random source. Conversions to uniform reals and bounded
/// integers are written out here instead of going through <random>
/// distributions, whose output is implementation-defined; traces must be
/// bit-identical across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on {0, ..., n-1}; n must be positive (Lemire's method).
    std::uint64_t index(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(engine_()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::string state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
    }

private:
    std::mt19937_64 engine_;
};

/// Fisher-Yates with the portable index() draw.
template <class Container>
void shuffle(Container& c, Rng& rng) {
    for (std::size_t i = c.size(); i > 1; --i) {
        std::size_t j = rng.index(i);
        using std::swap;
        swap(c[i - 1], c[j]);
    }
}

}  // namespace homophily
