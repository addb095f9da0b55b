#include "potpred/random.hpp"

namespace potpred {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index);
}

Rng make_rng(std::uint64_t root, std::uint64_t stream, std::uint64_t index) {
    return Rng(derive_seed(root, stream, index));
}

double uniform_open(Rng& rng) {
    // 53 random bits, offset by half a unit so 0 and 1 are unreachable.
    const std::uint64_t bits = rng() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace potpred
