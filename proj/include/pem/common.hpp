#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace pem {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// All randomness goes through Rng. Draws are defined directly on the raw
// mt19937_64 output stream (which the standard pins down bit-for-bit), so a
// seeded run is reproducible everywhere and tests can re-derive the exact
// draw sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 bits of mantissa.
    Scalar uniform01() {
        return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53;
    }

    Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Modulo bias is < n / 2^64, irrelevant here.
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

    // Standard normal via Box-Muller (one value per two draws; the spare is
    // discarded to keep the draw count per call fixed).
    Scalar normal() {
        Scalar u1 = uniform01();
        Scalar u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Independent stream for one concern of a seeded run. Streams with different
// tags never share state, so adding a consumer (e.g. discriminator init)
// cannot shift the draws seen by another (e.g. the embedding update loop).
inline Rng derive_rng(std::uint64_t seed, std::string_view tag) {
    return Rng(splitmix64(seed ^ splitmix64(hash_tag(tag))));
}

template <typename T>
T sigmoid(T x) {
    if (x >= 0) {
        T e = std::exp(-x);
        return 1 / (1 + e);
    }
    T e = std::exp(x);
    return e / (1 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
template <typename T>
T log_sigmoid(T x) {
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

// Softmax of a vector expression, shifted by the max for stability.
template <typename Derived>
Vector softmax(const Eigen::MatrixBase<Derived>& scores) {
    Vector s = scores;
    const Scalar shift = s.maxCoeff();
    s = (s.array() - shift).exp();
    return s / s.sum();
}

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pem
