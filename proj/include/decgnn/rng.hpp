#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace decgnn {

// Deterministic stream keyed by (master_seed, label). Derived streams are
// independent of each other, so adding a consumer never perturbs another.
// All sampling is done in-house so sequences do not depend on the standard
// library's distribution implementations.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::string_view label);

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t key() const noexcept { return key_; }

    // Child stream: same master seed, label "<parent-key>/<label>".
    RngStream derive(std::string_view label) const;

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    // Uniform in (lo, hi); never returns either endpoint.
    double uniform_open(double lo, double hi);
    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t master_seed_;
    std::uint64_t key_;
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t hash_label(std::uint64_t seed, std::string_view label);

}  // namespace decgnn
