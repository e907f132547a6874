#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hierlog {

// Error taxonomy, mapped to CLI exit codes: config = 2, data = 3, training = 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/contract violations inside the numeric stack.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG wrapper. std::mt19937_64 has a standard-specified output
// sequence; the distribution helpers below avoid the implementation-defined
// std::uniform_*_distribution so results are reproducible across toolchains.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) via rejection sampling.
    size_t index(size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: n must be > 0");
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<size_t>(x % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

  private:
    std::mt19937_64 gen_;
};

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Derives a per-record seed so parallel or reordered processing cannot change
// the stream drawn for any given record.
inline uint64_t derive_seed(uint64_t global_seed, std::string_view key) {
    return fnv1a64(key) ^ (global_seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
}

}  // namespace hierlog
