#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace scagc {

/// Invalid argument values (bad hyper-parameters, impossible sizes).
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unreadable or syntactically invalid input files.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structurally invalid graph data (e.g. edge endpoint out of range).
struct MalformedGraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite value produced where the caller guarantees finiteness.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Violation of an internal API contract (shape mismatch etc.).
struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Mixes a master seed with stream/step/lane indices into an independent
/// sub-seed. Used everywhere a reproducible derived RNG stream is needed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ a);
    h = detail::splitmix64(h ^ b);
    h = detail::splitmix64(h ^ c);
    return h;
}

}  // namespace scagc
