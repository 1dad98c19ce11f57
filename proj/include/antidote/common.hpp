#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace antidote {

using Bytes = std::vector<std::uint8_t>;
using Micros = std::int64_t; // microseconds since an arbitrary epoch
using Rng = std::mt19937_64;

constexpr Micros kMillisecond = 1000;
constexpr Micros kSecond = 1000 * kMillisecond;

// Addresses are kept as dotted-quad strings; the simulator treats them as
// opaque tokens, the gateway parses them with inet_pton.
using IpAddress = std::string;

struct Endpoint {
    IpAddress ip;
    std::uint16_t port = 0;

    bool operator==(const Endpoint&) const = default;
};

using LogFn = std::function<void(std::string_view)>;

/// Derives an independent generator stream for one logical query, so that
/// concurrent resolutions stay replayable under a single master seed.
inline Rng make_query_rng(std::uint64_t seed, std::uint64_t serial) {
    std::seed_seq seq{seed, serial, std::uint64_t{0x9e3779b97f4a7c15ULL}};
    return Rng(seq);
}

} // namespace antidote
