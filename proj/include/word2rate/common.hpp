/**
 * @file
 * @brief Shared vocabulary of the library: modes, errors, seeding.
 * @copyright Apache License v.2 (http://www.apache.org/licenses/LICENSE-2.0)
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace word2rate {

using WordId = std::uint32_t;
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Single composition kind. A hybrid mode is a pair of these.
enum class Composition { cbow, cmow, fos, fop, sos };

/// Training/analysis mode as exposed to users.
enum class Mode { cbow, cmow, fos, fop, sos, hybrid_fos_fop, hybrid_fos_sos };

inline constexpr bool is_rate(Composition c) {
    return c == Composition::fos || c == Composition::fop || c == Composition::sos;
}

inline constexpr bool is_hybrid(Mode m) {
    return m == Mode::hybrid_fos_fop || m == Mode::hybrid_fos_sos;
}

inline std::vector<Composition> components(Mode m) {
    switch (m) {
    case Mode::cbow: return {Composition::cbow};
    case Mode::cmow: return {Composition::cmow};
    case Mode::fos: return {Composition::fos};
    case Mode::fop: return {Composition::fop};
    case Mode::sos: return {Composition::sos};
    case Mode::hybrid_fos_fop: return {Composition::fos, Composition::fop};
    case Mode::hybrid_fos_sos: return {Composition::fos, Composition::sos};
    }
    throw Error("unknown mode");
}

inline bool uses_rate_matrices(Mode m) {
    for (auto c : components(m)) {
        if (is_rate(c)) return true;
    }
    return false;
}

inline std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::cbow: return "cbow";
    case Mode::cmow: return "cmow";
    case Mode::fos: return "fos";
    case Mode::fop: return "fop";
    case Mode::sos: return "sos";
    case Mode::hybrid_fos_fop: return "hybrid-fos-fop";
    case Mode::hybrid_fos_sos: return "hybrid-fos-sos";
    }
    return "?";
}

inline std::string_view to_string(Composition c) {
    switch (c) {
    case Composition::cbow: return "cbow";
    case Composition::cmow: return "cmow";
    case Composition::fos: return "fos";
    case Composition::fop: return "fop";
    case Composition::sos: return "sos";
    }
    return "?";
}

inline constexpr Mode all_modes[] = {Mode::cbow,          Mode::cmow,
                                     Mode::fos,           Mode::fop,
                                     Mode::sos,           Mode::hybrid_fos_fop,
                                     Mode::hybrid_fos_sos};

inline Mode parse_mode(std::string_view name) {
    for (auto m : all_modes) {
        if (to_string(m) == name) return m;
    }
    throw Error("unknown mode '" + std::string(name) + "'");
}

/// Taylor step per mode: FOS 0.01, FOP and SOS 0.001, hybrids 0.0001.
/// CBOW/CMOW ignore it.
inline double default_epsilon(Mode m) {
    switch (m) {
    case Mode::fos: return 0.01;
    case Mode::fop:
    case Mode::sos: return 0.001;
    case Mode::hybrid_fos_fop:
    case Mode::hybrid_fos_sos: return 0.0001;
    default: return 0.01;
    }
}

inline std::size_t default_dim(Mode m) { return is_hybrid(m) ? 50 : 25; }

/// Embedding dimension of each component. Hybrids split the total evenly
/// (first component takes the floor).
inline std::vector<std::size_t> component_dims(Mode m, std::size_t dim) {
    if (!is_hybrid(m)) return {dim};
    return {dim / 2, dim - dim / 2};
}

/// Side length of a CMOW word matrix; dim must be a perfect square.
inline std::size_t cmow_side(std::size_t dim) {
    auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
    if (side * side != dim) {
        throw Error("cmow dimension " + std::to_string(dim) + " is not a perfect square");
    }
    return side;
}

/// splitmix64 finalizer; used to derive independent stream seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed) { return splitmix64(seed); }

template <class... Rest>
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t next, Rest... rest) {
    return derive_seed(splitmix64(seed) ^ (next + 0x632be59bd9b4e019ULL), rest...);
}

// Stream tags so that derived seeds for different purposes never collide.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t examples = 2;
inline constexpr std::uint64_t shuffle = 3;
inline constexpr std::uint64_t negatives = 4;
inline constexpr std::uint64_t stability = 5;
inline constexpr std::uint64_t probe = 6;
inline constexpr std::uint64_t synth = 7;
} // namespace stream

} // namespace word2rate
