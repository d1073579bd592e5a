#pragma once

#include <cstdint>
#include <random>

namespace textpsy {

/// Seeded generator with a fully specified output sequence.
///
/// std::mt19937_64's raw stream is pinned by the standard, but the standard
/// distributions are not, so uniforms and normals are derived here directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal();

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace textpsy
