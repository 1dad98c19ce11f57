#pragma once

// Unilateral entropy mechanisms: transaction-ID randomization, source port
// randomization (SPR), source/destination IP pools, 0x20 case encoding and
// the fixed-prefix extension for short queries, plus the resulting
// per-query entropy budget and the analytic spoof-success probability.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "antidote/common.hpp"
#include "antidote/wire.hpp"

namespace antidote {

struct EntropyConfig {
    bool randomize_txid = true;
    // Simulations may shrink the txid space so poisoning events are
    // observable in thousands of trials instead of billions.
    unsigned txid_space_bits = 16;

    bool spr_enabled = false;
    std::uint16_t port_min = 1024;
    std::uint16_t port_max = 65535;
    std::uint16_t fixed_port = 53000; // used when SPR is off

    std::vector<IpAddress> ip_pool{"0.0.0.0"};
    std::vector<IpAddress> dst_ip_candidates{"127.0.0.1"};

    bool encode_0x20 = false;
    bool short_query_extension = false;
    std::string fixed_prefix = "FixedRandomisationString";
    unsigned min_letters = 12;

    std::uint64_t rng_seed = 0;

    bool valid() const {
        if (spr_enabled && (port_min < 1024 || port_min > port_max)) return false;
        if (ip_pool.empty() || dst_ip_candidates.empty()) return false;
        return true;
    }
};

/// The per-query secret state a forged response has to reproduce.
struct ValidationTuple {
    std::uint16_t txid = 0;
    std::uint16_t src_port = 0;
    IpAddress src_ip;
    IpAddress dst_ip;
    DnsName cased_qname;
    std::uint16_t qtype = kTypeA;
    std::uint16_t qclass = kClassIN;
};

struct EntropyBudget {
    double txid_bits = 0;
    double port_bits = 0;
    double src_ip_bits = 0;
    double dst_ip_bits = 0;
    double case_bits = 0;
    double total_bits = 0;
};

inline std::size_t count_letters(const DnsName& name) { return name.letter_count(); }

struct CasedName {
    DnsName name;
    std::vector<bool> mask; // one bit per letter, true = uppercase
};

/// Randomly toggles the case of every ASCII letter; non-letters pass
/// through untouched. Deterministic under a fixed generator state.
inline CasedName apply_0x20(const DnsName& name, Rng& rng) {
    CasedName out;
    out.name = name;
    for (auto& label : out.name.labels) {
        for (auto& c : label) {
            auto b = static_cast<std::uint8_t>(c);
            if (!is_ascii_alpha(b)) continue;
            bool upper = (rng() >> 32) & 1;
            out.mask.push_back(upper);
            c = static_cast<char>(upper ? (ascii_lower(b) - 32) : ascii_lower(b));
        }
    }
    return out;
}

inline bool validate_0x20(const DnsName& sent, const DnsName& received) {
    return name_equal_case_exact(sent, received);
}

inline std::uint16_t pick_txid(const EntropyConfig& cfg, Rng& rng) {
    if (!cfg.randomize_txid) return 0;
    unsigned bits = cfg.txid_space_bits;
    if (bits >= 16) return static_cast<std::uint16_t>(rng() & 0xffff);
    return static_cast<std::uint16_t>(rng() & ((1u << bits) - 1));
}

inline std::uint16_t pick_source_port(const EntropyConfig& cfg, Rng& rng) {
    if (!cfg.spr_enabled) return cfg.fixed_port;
    std::uniform_int_distribution<std::uint32_t> d(cfg.port_min, cfg.port_max);
    return static_cast<std::uint16_t>(d(rng));
}

inline const IpAddress& pick_source_ip(const EntropyConfig& cfg, Rng& rng) {
    if (cfg.ip_pool.empty()) throw std::invalid_argument("empty-pool");
    std::uniform_int_distribution<std::size_t> d(0, cfg.ip_pool.size() - 1);
    return cfg.ip_pool[d(rng)];
}

inline const IpAddress& pick_dst_ip(const EntropyConfig& cfg, Rng& rng) {
    if (cfg.dst_ip_candidates.empty()) throw std::invalid_argument("empty-pool");
    std::uniform_int_distribution<std::size_t> d(0, cfg.dst_ip_candidates.size() - 1);
    return cfg.dst_ip_candidates[d(rng)];
}

/// Prepends the fixed reserved label when the name carries too few letters
/// for 0x20 to bite. Only meaningful for delegation-style queries where the
/// answer is the zone's NS/glue regardless of the leftmost label.
inline DnsName extend_short_query(const DnsName& name, const EntropyConfig& cfg) {
    if (count_letters(name) >= cfg.min_letters) return name;
    DnsName out;
    out.labels.reserve(name.labels.size() + 1);
    out.labels.push_back(cfg.fixed_prefix);
    out.labels.insert(out.labels.end(), name.labels.begin(), name.labels.end());
    if (out.wire_length() > 255) throw WireError(WireErrc::ExtendedNameTooLong);
    return out;
}

inline EntropyBudget entropy_budget(const EntropyConfig& cfg, const DnsName& name) {
    EntropyBudget b;
    if (cfg.randomize_txid) b.txid_bits = cfg.txid_space_bits;
    if (cfg.spr_enabled)
        b.port_bits = std::log2(static_cast<double>(cfg.port_max) - cfg.port_min + 1.0);
    b.src_ip_bits = std::log2(static_cast<double>(cfg.ip_pool.size()));
    b.dst_ip_bits = std::log2(static_cast<double>(cfg.dst_ip_candidates.size()));
    if (cfg.encode_0x20) {
        DnsName effective = name;
        if (cfg.short_query_extension) effective = extend_short_query(name, cfg);
        b.case_bits = static_cast<double>(count_letters(effective));
    }
    b.total_bits = b.txid_bits + b.port_bits + b.src_ip_bits + b.dst_ip_bits + b.case_bits;
    return b;
}

/// P(at least one of n independent uniform guesses over a 2^bits space
/// hits) = 1 - (1 - 2^-bits)^n. Models a blind flooder that cannot observe
/// failures; the without-replacement brute-force variant lives in the
/// simulator as an attacker strategy.
inline double spoof_success_probability(double bits, std::int64_t n_spoofed) {
    if (bits < 0 || n_spoofed < 0) throw std::invalid_argument("negative inputs");
    if (n_spoofed == 0) return 0.0;
    double p_single = std::exp2(-bits);
    if (p_single >= 1.0) return 1.0;
    double p = -std::expm1(static_cast<double>(n_spoofed) * std::log1p(-p_single));
    if (p < 0.0) return 0.0;
    if (p > 1.0) return 1.0;
    return p;
}

} // namespace antidote
