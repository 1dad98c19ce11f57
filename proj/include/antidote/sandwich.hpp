#pragma once

// Two-phase sandwich antidote: classify responses against the validation
// tuple, detect forgery attempts via mismatches, then protect the retried
// query by sending it between two queries for unpredictable nonexistent
// names. Answers are accepted only if all three validate and arrive in the
// order they were sent.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "antidote/common.hpp"
#include "antidote/entropy.hpp"
#include "antidote/wire.hpp"

namespace antidote {

// Fields a response can fail on, as a bitmask.
enum MismatchField : unsigned {
    kFieldTxid = 1u << 0,
    kFieldPort = 1u << 1,
    kFieldSrcAddr = 1u << 2,
    kFieldCase = 1u << 3,
    kFieldQname = 1u << 4,
    kFieldQtype = 1u << 5,
};

struct ResponseMeta {
    IpAddress src_ip;          // who the packet claims to be from
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0; // local port it arrived on
    bool forged = false;        // simulator ground truth; never read by logic
};

struct Classification {
    bool match = false;
    unsigned failed = 0; // MismatchField bits, empty on match
};

/// A response matches only when txid, destination port, claimed source
/// address and the case-exact query name all agree with what was sent.
inline Classification classify_response(const ValidationTuple& tuple,
                                        const DnsMessage& r,
                                        const ResponseMeta& meta) {
    Classification c;
    if (r.header.txid != tuple.txid) c.failed |= kFieldTxid;
    if (meta.dst_port != tuple.src_port) c.failed |= kFieldPort;
    if (meta.src_ip != tuple.dst_ip) c.failed |= kFieldSrcAddr;
    if (r.questions.size() != 1) {
        c.failed |= kFieldQname;
    } else {
        const Question& q = r.questions.front();
        if (q.qtype != tuple.qtype || q.qclass != tuple.qclass) c.failed |= kFieldQtype;
        if (!name_equal_case_insensitive(q.name, tuple.cased_qname))
            c.failed |= kFieldQname;
        else if (!validate_0x20(tuple.cased_qname, q.name))
            c.failed |= kFieldCase;
    }
    c.match = (c.failed == 0);
    return c;
}

enum class QueryMode { Normal, Sandwich };

struct PendingQuery {
    DnsName qname; // original, case as asked
    std::uint16_t qtype = kTypeA;
    std::uint16_t qclass = kClassIN;
    ValidationTuple tuple;
    QueryMode mode = QueryMode::Normal;
    Micros deadline = 0;
    int mismatch_count = 0;
};

/// Counts a mismatched response; true once the configured threshold fires
/// and the resolution must escalate to Sandwich mode.
inline bool detect_forgery(PendingQuery& p, int detection_threshold) {
    ++p.mismatch_count;
    return p.mismatch_count >= detection_threshold;
}

enum class SubQueryId : int { Pre = 0, Mid = 1, Post = 2 };

struct SubQuery {
    DnsName name; // 0x20-cased, equals tuple.cased_qname
    ValidationTuple tuple;
    bool expect_nxdomain = false;
    enum class Status { Outstanding, Validated, Failed } status = Status::Outstanding;
    std::vector<ResourceRecord> answers; // mid only, filled on validation
    bool nxdomain = false;                 // mid only: validated negative answer
    std::vector<ResourceRecord> authority; // mid only: SOA for negative caching
};

struct SandwichConfig {
    int detection_threshold = 1;
    unsigned prefix_len = 12;
    int retries = 3;
    Micros deadline = 2 * kSecond;
};

struct SandwichSession {
    std::uint64_t id = 0;
    DnsName zone; // bailiwick for the mid answer
    std::array<SubQuery, 3> sub; // indexed by SubQueryId, send order
    std::vector<SubQueryId> arrivals;
    int retries_left = 0;
    Micros deadline = 0;

    SubQuery& operator[](SubQueryId w) { return sub[static_cast<int>(w)]; }
    const SubQuery& operator[](SubQueryId w) const { return sub[static_cast<int>(w)]; }
};

inline DnsName random_guard_prefix(unsigned len, Rng& rng) {
    std::uniform_int_distribution<int> d(0, 25);
    std::string label;
    label.reserve(len);
    for (unsigned i = 0; i < len; ++i) label.push_back(static_cast<char>('a' + d(rng)));
    DnsName n;
    n.labels.push_back(std::move(label));
    return n;
}

/// Zone of a name = the name minus its leftmost label. A forwarder has no
/// delegation knowledge, so this is the conservative cut; single-label
/// names keep themselves as the zone.
inline DnsName zone_of(const DnsName& name) {
    if (name.labels.size() <= 1) return name;
    DnsName z;
    z.labels.assign(name.labels.begin() + 1, name.labels.end());
    return z;
}

struct TuplePicker {
    const EntropyConfig& entropy;
    Rng& rng;

    ValidationTuple make(const DnsName& name, std::uint16_t qtype) const {
        ValidationTuple t;
        t.txid = pick_txid(entropy, rng);
        t.src_port = pick_source_port(entropy, rng);
        t.src_ip = pick_source_ip(entropy, rng);
        t.dst_ip = pick_dst_ip(entropy, rng);
        t.qtype = qtype;
        t.qclass = kClassIN;
        if (entropy.encode_0x20) {
            t.cased_qname = apply_0x20(name, rng).name;
        } else {
            t.cased_qname = name;
        }
        return t;
    }
};

/// Builds a fresh session: two guard queries for distinct random-prefix
/// names around the original query, each with its own fully re-randomized
/// validation tuple.
inline SandwichSession build_sandwich(const DnsName& original, std::uint16_t qtype,
                                      const EntropyConfig& entropy,
                                      const SandwichConfig& cfg, Rng& rng,
                                      std::uint64_t session_id, Micros now) {
    SandwichSession s;
    s.id = session_id;
    s.zone = zone_of(original).lowercased();
    s.retries_left = cfg.retries;
    s.deadline = now + cfg.deadline;

    DnsName pre_name = random_guard_prefix(cfg.prefix_len, rng);
    DnsName post_name;
    do {
        post_name = random_guard_prefix(cfg.prefix_len, rng);
    } while (name_equal_case_insensitive(post_name, pre_name));
    for (auto& l : s.zone.labels) {
        pre_name.labels.push_back(l);
        post_name.labels.push_back(l);
    }

    TuplePicker pick{entropy, rng};
    auto init = [&](SubQuery& sq, const DnsName& name, bool nx) {
        sq.tuple = pick.make(name, qtype);
        sq.name = sq.tuple.cased_qname;
        sq.expect_nxdomain = nx;
        sq.status = SubQuery::Status::Outstanding;
        sq.answers.clear();
    };
    init(s[SubQueryId::Pre], pre_name, true);
    init(s[SubQueryId::Mid], original, false);
    init(s[SubQueryId::Post], post_name, true);
    return s;
}

enum class SandwichVerdict { Continue, Accept, Restart };

/// Feeds one decoded response for the given sub-query into the session.
/// Accept fires only when all three validated in exact send order; any
/// tuple mismatch, wrong rcode, out-of-order validated arrival or a guard
/// name that unexpectedly resolves forces a Restart.
inline SandwichVerdict on_sandwich_response(SandwichSession& s, SubQueryId which,
                                            const DnsMessage& r,
                                            const ResponseMeta& meta) {
    SubQuery& sq = s[which];
    if (sq.status == SubQuery::Status::Validated) return SandwichVerdict::Continue;

    Classification c = classify_response(sq.tuple, r, meta);
    if (!c.match) return SandwichVerdict::Restart;

    if (sq.expect_nxdomain) {
        if (r.header.rcode != kRcodeNxDomain) {
            // A guard name that exists (wildcard zone or a lucky forgery)
            // is an anomaly either way.
            return SandwichVerdict::Restart;
        }
    } else if (r.header.rcode == kRcodeNxDomain) {
        // a validated negative answer for the original name is authentic
        sq.nxdomain = true;
        sq.authority = r.authority;
    } else {
        if (r.header.rcode != kRcodeNoError) return SandwichVerdict::Restart;
        std::vector<ResourceRecord> in_bailiwick;
        for (const auto& rr : r.answers)
            if (rr.name.ends_with(s.zone)) in_bailiwick.push_back(rr);
        if (in_bailiwick.empty()) return SandwichVerdict::Restart;
        sq.answers = std::move(in_bailiwick);
    }

    sq.status = SubQuery::Status::Validated;
    s.arrivals.push_back(which);
    static constexpr std::array<SubQueryId, 3> kSendOrder{SubQueryId::Pre, SubQueryId::Mid,
                                                          SubQueryId::Post};
    for (std::size_t i = 0; i < s.arrivals.size(); ++i)
        if (s.arrivals[i] != kSendOrder[i]) return SandwichVerdict::Restart;
    if (s.arrivals.size() == 3) return SandwichVerdict::Accept;
    return SandwichVerdict::Continue;
}

} // namespace antidote
