#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nfk {

// Identifies one reproducible random stream: identical (master_seed,
// stream_index) pairs reproduce identical draws bit for bit.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_index = 0;

    SeedSpec stream(std::uint64_t offset) const { return {master_seed, stream_index + offset}; }
};

// mt19937_64 with hand-rolled variate transforms. The standard specifies the
// engine output exactly; the std:: distributions do not, so the transforms
// here keep streams reproducible across toolchains.
class Rng {
  public:
    explicit Rng(const SeedSpec& s) {
        std::seed_seq seq{s.master_seed & 0xffffffffu, s.master_seed >> 32,
                          s.stream_index & 0xffffffffu, s.stream_index >> 32};
        eng_.seed(seq);
    }

    std::uint64_t raw() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return double(eng_() >> 11) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    // Standard normal (Marsaglia polar, cached pair).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace nfk
