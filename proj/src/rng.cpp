#include "decgnn/rng.hpp"

#include <cmath>
#include <string>

namespace decgnn {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t hash_label(std::uint64_t seed, std::string_view label) {
    // FNV-1a over the label, then mixed with the seed.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    std::uint64_t x = seed ^ rotl(h, 17);
    std::uint64_t a = splitmix64(x);
    return a ^ splitmix64(x);
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view label)
    : master_seed_(master_seed), key_(hash_label(master_seed, label)) {
    std::uint64_t x = key_;
    for (auto& s : state_) s = splitmix64(x);
}

RngStream RngStream::derive(std::string_view label) const {
    std::string full = std::to_string(key_);
    full += '/';
    full += label;
    return RngStream(master_seed_, full);
}

std::uint64_t RngStream::next_u64() {
    // xoshiro256**
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open(double lo, double hi) {
    double u;
    do {
        u = uniform();
    } while (u == 0.0);
    double x = lo + (hi - lo) * u;
    return x < hi ? x : std::nextafter(hi, lo);
}

std::uint64_t RngStream::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    // Lemire's nearly-divisionless rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next_u64()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

}  // namespace decgnn
