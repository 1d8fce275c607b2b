#ifndef PROTOFLOW_RNG_HPP
#define PROTOFLOW_RNG_HPP

#include <cstdint>
#include <vector>

namespace protoflow {

// splitmix64; deterministic across platforms and standard libraries,
// which the seeded-reproducibility guarantees depend on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    double uniform() { return (next() >> 11) * 0x1.0p-53; }

    // index sampled proportionally to non-negative weights
    std::size_t discrete(const std::vector<double>& weights) {
        double total = 0;
        for (double w : weights) total += w;
        if (total <= 0) return 0;
        double u = uniform() * total;
        double acc = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0xA24BAED4963EE407ull * (stream + 1)));
        return r.next();
    }

private:
    std::uint64_t state_;
};

}  // namespace protoflow

#endif
