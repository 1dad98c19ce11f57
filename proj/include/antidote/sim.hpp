#pragma once

// Deterministic discrete-event harness: virtual-time transport with NAT
// models, a case-preserving authority, off-path spoofing attacker
// strategies, and the per-trial driver that measures whether a defense
// configuration got poisoned.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "antidote/common.hpp"
#include "antidote/resolver.hpp"
#include "antidote/transport.hpp"

namespace antidote::sim {

// ---------------------------------------------------------------- network

class SimNetwork {
public:
    using EventFn = std::function<void()>;

    Micros now() const { return now_; }
    std::uint64_t events_processed() const { return processed_; }

    void schedule_at(Micros t, EventFn fn) {
        queue_.push(Event{t < now_ ? now_ : t, seq_++, std::move(fn)});
    }

    bool has_event_before(Micros deadline) const {
        return !queue_.empty() && queue_.top().t <= deadline;
    }

    /// Runs the earliest event and advances the clock to it.
    void step() {
        Event e = queue_.top();
        queue_.pop();
        now_ = e.t;
        ++processed_;
        e.fn();
    }

    void advance_to(Micros t) {
        if (t > now_) now_ = t;
    }

private:
    struct Event {
        Micros t;
        std::uint64_t seq; // tie-break keeps delivery deterministic
        EventFn fn;
        bool operator>(const Event& o) const {
            return t != o.t ? t > o.t : seq > o.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    Micros now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t processed_ = 0;
};

enum class NatMode { Passthrough, SequentialPorts, SingleIpMasquerade };

/// Virtual-time Transport. Sockets get an externally visible endpoint
/// through the NAT model; inbound datagrams are matched against it, then
/// rewritten to the internal port, which is exactly how sequential NAT
/// cancels source-port randomization.
class SimTransport : public Transport {
public:
    // (socket, externally visible source, destination, payload)
    struct SendInfo {
        SocketId socket;
        Endpoint external_src;
        Endpoint dst;
        const Bytes& payload;
    };
    using SendHook = std::function<void(const SendInfo&)>;

    explicit SimTransport(SimNetwork& net, NatMode nat = NatMode::Passthrough,
                          IpAddress nat_ip = "198.51.100.1")
        : net_(net), nat_(nat), nat_ip_(std::move(nat_ip)) {}

    void set_send_hook(SendHook hook) { hook_ = std::move(hook); }
    NatMode nat_mode() const { return nat_; }
    const IpAddress& nat_ip() const { return nat_ip_; }

    SocketId open_socket(const IpAddress& src_ip, std::uint16_t port) override {
        for (const auto& [id, s] : socks_)
            if (s.open && s.port == port && s.src == src_ip) return kInvalidSocket;
        SocketId id = next_id_++;
        Sock s;
        s.src = src_ip;
        s.port = port != 0 ? port : ephemeral_port_++;
        switch (nat_) {
        case NatMode::Passthrough:
            s.external = {src_ip, s.port};
            break;
        case NatMode::SequentialPorts:
            s.external = {src_ip, nat_port_++};
            break;
        case NatMode::SingleIpMasquerade:
            s.external = {nat_ip_, s.port};
            break;
        }
        socks_.emplace(id, std::move(s));
        return id;
    }

    void close_socket(SocketId id) override {
        auto it = socks_.find(id);
        if (it != socks_.end()) it->second.open = false;
    }

    bool send_to(SocketId id, const Endpoint& dst, const Bytes& payload) override {
        auto it = socks_.find(id);
        if (it == socks_.end() || !it->second.open) return false;
        if (hook_) hook_(SendInfo{id, it->second.external, dst, payload});
        return true;
    }

    /// Injects a datagram addressed to an external endpoint. Returns true
    /// when some open socket matched; unmatched packets vanish, as a
    /// wrong-port guess does on a real network.
    bool deliver(const Endpoint& to, ResponseMeta meta, Bytes payload) {
        for (auto& [id, s] : socks_) {
            if (!s.open) continue;
            if (s.external.port != to.port) continue;
            if (s.external.ip != to.ip && s.src != "0.0.0.0") continue;
            meta.dst_port = s.port; // NAT rewrites back to the internal port
            inbox_.push_back(Datagram{id, std::move(meta), std::move(payload)});
            return true;
        }
        return false;
    }

    Endpoint external_endpoint(SocketId id) const { return socks_.at(id).external; }

    std::uint16_t local_port(SocketId id) override { return socks_.at(id).port; }

    std::optional<Datagram> receive(const std::vector<SocketId>& sockets,
                                    Micros deadline) override {
        for (;;) {
            for (auto it = inbox_.begin(); it != inbox_.end(); ++it) {
                for (SocketId want : sockets) {
                    if (it->socket != want) continue;
                    Datagram dg = std::move(*it);
                    inbox_.erase(it);
                    return dg;
                }
            }
            if (!net_.has_event_before(deadline)) {
                net_.advance_to(deadline);
                return std::nullopt;
            }
            net_.step();
        }
    }

    Micros now() override { return net_.now(); }

private:
    struct Sock {
        IpAddress src;
        std::uint16_t port = 0;
        Endpoint external;
        bool open = true;
    };

    SimNetwork& net_;
    NatMode nat_;
    IpAddress nat_ip_;
    std::map<SocketId, Sock> socks_;
    std::deque<Datagram> inbox_;
    SocketId next_id_ = 1;
    std::uint16_t nat_port_ = 40000;
    std::uint16_t ephemeral_port_ = 50000;
    SendHook hook_;
};

// --------------------------------------------------------------- authority

/// Scripted authoritative server. By default it echoes the question name
/// byte-identically (the behavior 0x20 encoding depends on).
struct AuthoritySim {
    std::vector<Endpoint> endpoints{{"9.9.9.9", 53}};
    DnsName zone = DnsName::from_string("google.com");
    std::map<std::string, Bytes> a_records; // lowercase name -> 4-byte rdata
    bool wildcard = false;
    Bytes wildcard_rdata = make_a_rdata(10, 0, 0, 99);
    bool case_preserving = true;
    bool delegation_mode = false; // every subdomain answers with NS + glue
    std::uint32_t ttl = 3600;

    Bytes respond(const Bytes& query) const {
        DnsMessage q = decode_message(query);
        DnsMessage r;
        r.header.txid = q.header.txid;
        r.header.qr = true;
        r.header.rd = q.header.rd;
        r.header.ra = true;
        r.header.aa = true;
        if (q.questions.empty()) {
            r.header.rcode = kRcodeFormErr;
            return encode_message(r);
        }
        Question echoed = q.questions.front();
        if (!case_preserving) echoed.name = echoed.name.lowercased();
        r.questions.push_back(echoed);

        const DnsName& qn = q.questions.front().name;
        auto it = a_records.find(qn.lowercased().to_string());
        if (it != a_records.end()) {
            r.answers.push_back({echoed.name, kTypeA, kClassIN, ttl, it->second});
        } else if (delegation_mode && qn.ends_with(zone)) {
            DnsName ns_name = DnsName::from_string("ns1." + zone.to_string());
            r.answers.push_back({zone, kTypeNS, kClassIN, ttl, make_name_rdata(ns_name)});
            r.additional.push_back({ns_name, kTypeA, kClassIN, ttl, make_a_rdata(10, 0, 0, 53)});
        } else if (wildcard && qn.ends_with(zone)) {
            r.answers.push_back({echoed.name, kTypeA, kClassIN, ttl, wildcard_rdata});
        } else {
            r.header.rcode = kRcodeNxDomain;
            DnsName mname = DnsName::from_string("ns1." + zone.to_string());
            r.authority.push_back({zone, kTypeSOA, kClassIN, ttl,
                                   make_soa_rdata(mname, mname, 1, 3600, 600, 86400, 300)});
        }
        return encode_message(r);
    }
};

// ---------------------------------------------------------------- attacker

enum KnownField : unsigned {
    kKnowTxid = 1u << 0,
    kKnowPort = 1u << 1,
    kKnowSrcIp = 1u << 2,
    kKnowCase = 1u << 3,
};

enum class AttackStrategy { BlindFlood, BruteForceTxid, Kaminsky };

inline const char* to_string(AttackStrategy s) {
    switch (s) {
    case AttackStrategy::BlindFlood: return "blind-flood";
    case AttackStrategy::BruteForceTxid: return "bruteforce-txid";
    case AttackStrategy::Kaminsky: return "kaminsky";
    }
    return "?";
}

struct AttackerConfig {
    AttackStrategy strategy = AttackStrategy::BlindFlood;
    int packets_per_window = 16;
    unsigned known_fields = 0;
    // Grants model observed leakage of the current Normal-mode query; the
    // freshly re-randomized sandwich sub-queries are only covered when the
    // leak channel persists (explicitly opted in).
    bool grants_apply_to_sandwich = false;
    int kaminsky_windows = 4;
    Bytes poison_rdata = make_a_rdata(66, 66, 66, 66);
};

inline DnsName kaminsky_query_name(const DnsName& target_zone, Rng& rng) {
    std::uniform_int_distribution<int> digit(0, 9);
    std::string label;
    for (int i = 0; i < 8; ++i) label.push_back(static_cast<char>('0' + digit(rng)));
    DnsName n;
    n.labels.push_back(std::move(label));
    n.labels.insert(n.labels.end(), target_zone.labels.begin(), target_zone.labels.end());
    return n;
}

// ------------------------------------------------------------------ trial

struct SimLink {
    Micros latency = 100 * kMillisecond; // authentic response delay
    double loss = 0.0;
    double reorder_prob = 0.0;          // chance a response gets held back
    Micros reorder_delay = 50 * kMillisecond;
};

struct DefenseConfig {
    std::string name = "txid-only";
    EntropyConfig entropy;
    bool sandwich_enabled = false;
    SandwichConfig sandwich;
    bool accept_first = false;
    NatMode nat = NatMode::Passthrough;
};

struct TrialConfig {
    DefenseConfig defense;
    AttackerConfig attacker;
    SimLink link;
    DnsName query_name = DnsName::from_string("www.google.com");
    std::uint16_t qtype = kTypeA;
    AuthoritySim authority; // endpoints are overwritten from the defense's dst pool
};

struct AttackOutcome {
    bool poisoned = false;
    std::string poisoned_key;
    std::int64_t spoofed_packets_sent = 0;
    std::uint64_t wall_events = 0;
    bool resolved = false; // legitimate answer delivered to the client
    Metrics::Snapshot metrics{};
};

/// Runs one client query (or a Kaminsky query stream) through the resolver
/// over the simulated network while the attacker injects spoofed
/// responses. Fully reproducible from (config, seed).
inline AttackOutcome run_trial(const TrialConfig& trial, std::uint64_t seed) {
    SimNetwork net;
    SimTransport transport(net, trial.defense.nat);

    AuthoritySim authority = trial.authority;
    authority.endpoints.clear();
    for (const auto& ip : trial.defense.entropy.dst_ip_candidates)
        authority.endpoints.push_back({ip, 53});

    ResolverConfig rc;
    rc.entropy = trial.defense.entropy;
    rc.entropy.rng_seed = seed;
    rc.upstreams = authority.endpoints;
    rc.sandwich_enabled = trial.defense.sandwich_enabled;
    rc.sandwich = trial.defense.sandwich;
    rc.accept_first_response = trial.defense.accept_first;
    rc.query_timeout = 2 * trial.link.latency + 100 * kMillisecond;
    Metrics metrics;
    Resolver resolver(rc, transport, &metrics);

    AttackOutcome outcome;
    resolver.cache().set_write_hook([&](const CacheKey& key, const CacheEntry& e) {
        if (e.provenance.forged_origin) {
            outcome.poisoned = true;
            outcome.poisoned_key = key.name_lc;
        }
    });

    Rng attacker_rng = make_query_rng(seed, 0xa77ac3);
    Rng net_rng = make_query_rng(seed, 0x11e7);

    unsigned grants = trial.attacker.known_fields;
    if (trial.defense.nat == NatMode::SequentialPorts) grants |= kKnowPort;
    const EntropyConfig& def = trial.defense.entropy; // attacker knows the config

    int bruteforce_counter = 0;

    transport.set_send_hook([&](const SimTransport::SendInfo& info) {
        Micros now = net.now();
        // authentic response from the queried authority
        Bytes reply = authority.respond(info.payload);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        if (uni(net_rng) >= trial.link.loss) {
            Micros delay = trial.link.latency;
            if (uni(net_rng) < trial.link.reorder_prob) delay += trial.link.reorder_delay;
            Endpoint to = info.external_src;
            Endpoint from = info.dst;
            net.schedule_at(now + delay, [&transport, to, from, reply] {
                transport.deliver(to, ResponseMeta{from.ip, from.port, 0, false}, reply);
            });
        }

        // off-path attacker: triggered by timing only; field values reach it
        // exclusively through explicit grants
        bool sandwich_phase = metrics.sandwich_activations.load() > 0;
        unsigned g = grants;
        if (sandwich_phase && !trial.attacker.grants_apply_to_sandwich) g = 0;

        DnsMessage query = decode_message(info.payload);
        const DnsName& real_cased = query.questions.front().name;
        DnsName known_name = real_cased.lowercased(); // attacker chose/knows the name
        std::uint16_t qtype = query.questions.front().qtype;

        for (int i = 0; i < trial.attacker.packets_per_window; ++i) {
            ++outcome.spoofed_packets_sent;

            DnsMessage forged;
            if (g & kKnowTxid) {
                forged.header.txid = query.header.txid;
            } else if (trial.attacker.strategy == AttackStrategy::BruteForceTxid) {
                unsigned space = 1u << std::min(def.txid_space_bits, 16u);
                forged.header.txid =
                    static_cast<std::uint16_t>(bruteforce_counter++ % space);
            } else {
                forged.header.txid = pick_txid(def, attacker_rng);
            }
            forged.header.qr = true;
            forged.header.ra = true;

            DnsName forged_name;
            if (g & kKnowCase) {
                forged_name = real_cased;
            } else if (def.encode_0x20) {
                forged_name = apply_0x20(known_name, attacker_rng).name;
            } else {
                forged_name = known_name;
            }
            forged.questions.push_back({forged_name, qtype, kClassIN});
            forged.answers.push_back(
                {forged_name, kTypeA, kClassIN, 3600, trial.attacker.poison_rdata});
            if (trial.attacker.strategy == AttackStrategy::Kaminsky) {
                DnsName zone = zone_of(known_name);
                DnsName ns_name = DnsName::from_string("ns." + zone.to_string());
                forged.authority.push_back(
                    {zone, kTypeNS, kClassIN, 3600, make_name_rdata(ns_name)});
                forged.additional.push_back(
                    {ns_name, kTypeA, kClassIN, 3600, trial.attacker.poison_rdata});
            }

            Endpoint target;
            target.port = (g & kKnowPort)
                              ? info.external_src.port
                              : static_cast<std::uint16_t>(
                                    std::uniform_int_distribution<std::uint32_t>(
                                        1024, 65535)(attacker_rng));
            if (trial.defense.nat == NatMode::SingleIpMasquerade) {
                target.ip = transport.nat_ip(); // publicly visible NAT address
            } else if (g & kKnowSrcIp) {
                target.ip = info.external_src.ip;
            } else {
                target.ip = pick_source_ip(def, attacker_rng);
            }
            IpAddress claimed_src = pick_dst_ip(def, attacker_rng);

            Micros at = now + static_cast<Micros>(uni(attacker_rng) *
                                                  static_cast<double>(trial.link.latency));
            Bytes wire = encode_message(forged);
            net.schedule_at(at, [&transport, target, claimed_src, wire] {
                transport.deliver(target, ResponseMeta{claimed_src, 53, 0, true}, wire);
            });
        }
    });

    int windows = trial.attacker.strategy == AttackStrategy::Kaminsky
                      ? trial.attacker.kaminsky_windows
                      : 1;
    bool all_resolved = true;
    for (int w = 0; w < windows; ++w) {
        DnsName qname = trial.query_name;
        if (trial.attacker.strategy == AttackStrategy::Kaminsky)
            qname = kaminsky_query_name(zone_of(trial.query_name), attacker_rng);
        ResolveResult res = resolver.resolve(qname, trial.qtype);
        bool ok = res.status == ResolveResult::Status::Answered ||
                  res.status == ResolveResult::Status::NxDomain;
        all_resolved = all_resolved && ok;
    }
    outcome.resolved = all_resolved;
    outcome.wall_events = net.events_processed();
    outcome.metrics = metrics.snapshot();
    return outcome;
}

} // namespace antidote::sim
