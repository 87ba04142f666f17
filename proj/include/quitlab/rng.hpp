#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace quitlab {

std::uint64_t fnv1a64(std::string_view s);

// Derives a child seed from a root seed and a component tag, so that all
// randomness in an experiment flows from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);

// xoshiro256++ with a cached gaussian spare. Self-contained so that streams
// are bit-reproducible across standard libraries, and the full state
// (including the spare) can be captured into checkpoints.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next_u64();
    double uniform01();                    // [0, 1), 53-bit resolution
    double uniform(double lo, double hi);  // [lo, hi)
    int uniform_int(int lo, int hi);       // inclusive bounds, unbiased
    double normal();                       // standard normal, Marsaglia polar
    double normal(double mean, double sd);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[uniform_int(0, i)]);
        }
    }

    // State words: 4 xoshiro words, has_spare flag, spare payload bits.
    using State = std::array<std::uint64_t, 6>;
    State state() const;
    void set_state(const State& st);

  private:
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace quitlab
