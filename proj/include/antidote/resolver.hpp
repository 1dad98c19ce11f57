#pragma once

// Forwarding-resolver orchestration: cache lookup, Normal-mode dispatch
// with the configured entropy mechanisms, escalation into Sandwich mode on
// forgery detection, and answer acceptance. Concurrent resolutions of the
// same key are coalesced into one upstream exchange.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "antidote/cache.hpp"
#include "antidote/common.hpp"
#include "antidote/entropy.hpp"
#include "antidote/sandwich.hpp"
#include "antidote/transport.hpp"
#include "antidote/wire.hpp"

namespace antidote {

struct Metrics {
    std::atomic<std::uint64_t> queries{0};
    std::atomic<std::uint64_t> cache_hits{0};
    std::atomic<std::uint64_t> mismatched_responses{0};
    std::atomic<std::uint64_t> sandwich_activations{0};
    std::atomic<std::uint64_t> sandwich_restarts{0};
    std::atomic<std::uint64_t> accepted{0};
    std::atomic<std::uint64_t> servfail{0};
    std::atomic<std::uint64_t> malformed_dropped{0};

    struct Snapshot {
        std::uint64_t queries, cache_hits, mismatched_responses, sandwich_activations,
            sandwich_restarts, accepted, servfail, malformed_dropped;
    };
    Snapshot snapshot() const {
        return {queries.load(), cache_hits.load(), mismatched_responses.load(),
                sandwich_activations.load(), sandwich_restarts.load(), accepted.load(),
                servfail.load(), malformed_dropped.load()};
    }
};

struct ResolverConfig {
    EntropyConfig entropy;
    std::vector<Endpoint> upstreams{{"127.0.0.1", 53}};

    bool sandwich_enabled = true;
    SandwichConfig sandwich;

    Micros query_timeout = 2 * kSecond;
    int normal_attempts = 2;

    std::uint32_t max_ttl = 86400;
    std::size_t cache_capacity = 10000;

    // Collaborative-baseline behavior: accept the first response that
    // arrives, skipping tuple validation entirely. Simulator baseline only.
    bool accept_first_response = false;
};

struct ResolveResult {
    enum class Status { Answered, NxDomain, ServFail, Timeout } status = Status::Timeout;
    std::vector<ResourceRecord> answers;
    bool from_cache = false;
};

class Resolver {
public:
    Resolver(ResolverConfig cfg, Transport& transport, Metrics* metrics = nullptr,
             LogFn log = nullptr)
        : cfg_(std::move(cfg)), transport_(transport),
          cache_(cfg_.cache_capacity, cfg_.max_ttl), metrics_(metrics),
          log_(std::move(log)) {
        // keep the budget's destination pool in sync with the upstream set
        cfg_.entropy.dst_ip_candidates.clear();
        for (const auto& u : cfg_.upstreams) cfg_.entropy.dst_ip_candidates.push_back(u.ip);
    }

    TtlCache& cache() { return cache_; }
    const ResolverConfig& config() const { return cfg_; }

    ResolveResult resolve(const DnsName& qname, std::uint16_t qtype) {
        if (metrics_) metrics_->queries++;
        CacheKey key = CacheKey::make(qname, qtype);
        if (auto hit = cache_.get(key, transport_.now())) {
            if (metrics_) metrics_->cache_hits++;
            ResolveResult r;
            r.status = hit->negative ? ResolveResult::Status::NxDomain
                                     : ResolveResult::Status::Answered;
            r.answers = hit->records;
            r.from_cache = true;
            return r;
        }

        // single-flight: one leader per key, followers wait for its result
        std::shared_ptr<Flight> flight;
        bool leader = false;
        {
            std::lock_guard lock(flights_mu_);
            auto it = flights_.find(key);
            if (it == flights_.end()) {
                flight = std::make_shared<Flight>();
                flights_.emplace(key, flight);
                leader = true;
            } else {
                flight = it->second;
            }
        }
        if (!leader) {
            std::unique_lock lock(flight->mu);
            flight->cv.wait(lock, [&] { return flight->done; });
            return flight->result;
        }

        ResolveResult result = resolve_upstream(qname, qtype);
        {
            std::lock_guard lock(flights_mu_);
            flights_.erase(key);
        }
        {
            std::lock_guard lock(flight->mu);
            flight->result = result;
            flight->done = true;
        }
        flight->cv.notify_all();
        return result;
    }

private:
    struct Flight {
        std::mutex mu;
        std::condition_variable cv;
        bool done = false;
        ResolveResult result;
    };

    void log_event(std::uint64_t session, std::string_view event) {
        if (!log_) return;
        std::ostringstream os;
        os << "ts=" << transport_.now() << " event=" << event << " session=" << session;
        log_(os.str());
    }

    Endpoint upstream_for(const IpAddress& dst_ip) const {
        for (const auto& u : cfg_.upstreams)
            if (u.ip == dst_ip) return u;
        return cfg_.upstreams.front();
    }

    SocketId open_with_tuple(ValidationTuple& tuple, Rng& rng) {
        for (int tries = 0; tries < 32; ++tries) {
            SocketId s = transport_.open_socket(tuple.src_ip, tuple.src_port);
            if (s != kInvalidSocket) {
                tuple.src_port = transport_.local_port(s);
                return s;
            }
            // port collision: re-pick, falling back to an OS-assigned
            // ephemeral port when SPR is off
            tuple.src_port = cfg_.entropy.spr_enabled
                                 ? pick_source_port(cfg_.entropy, rng)
                                 : 0;
        }
        return kInvalidSocket;
    }

    Bytes build_query(const ValidationTuple& tuple) const {
        DnsMessage q;
        q.header.txid = tuple.txid;
        q.header.rd = true;
        q.questions.push_back({tuple.cased_qname, tuple.qtype, tuple.qclass});
        return encode_message(q);
    }

    void cache_accepted(const DnsName& qname, std::uint16_t qtype, const DnsMessage& r,
                        CacheSource source, bool forged) {
        Micros now = transport_.now();
        CacheKey key = CacheKey::make(qname, qtype);
        CacheProvenance prov{source, forged};
        DnsName zone = zone_of(qname);

        if (r.header.rcode == kRcodeNxDomain) {
            // negative caching: min(SOA minimum, 300s) when an SOA is
            // present, otherwise not cached at all
            for (const auto& rr : r.authority) {
                if (auto soa_min = soa_minimum(rr)) {
                    CacheEntry e;
                    e.inserted_at = now;
                    e.ttl = std::min<std::uint32_t>(*soa_min, 300);
                    e.negative = true;
                    e.provenance = prov;
                    cache_.put(key, std::move(e));
                    break;
                }
            }
            return;
        }
        if (!r.answers.empty()) {
            CacheEntry e;
            e.records = r.answers;
            e.inserted_at = now;
            e.ttl = r.answers.front().ttl;
            e.provenance = prov;
            cache_.put(key, std::move(e));
        }
        // in-bailiwick glue from the additional section is cached under its
        // own name; out-of-zone glue is dropped
        for (const auto& rr : r.additional) {
            if (rr.type != kTypeA || !rr.name.ends_with(zone)) continue;
            CacheEntry e;
            e.records = {rr};
            e.inserted_at = now;
            e.ttl = rr.ttl;
            e.provenance = prov;
            cache_.put(CacheKey::make(rr.name, rr.type), std::move(e));
        }
    }

    static ResolveResult result_from(const DnsMessage& r) {
        ResolveResult res;
        if (r.header.rcode == kRcodeNxDomain) {
            res.status = ResolveResult::Status::NxDomain;
        } else {
            res.status = ResolveResult::Status::Answered;
            res.answers = r.answers;
        }
        return res;
    }

    ResolveResult resolve_upstream(const DnsName& qname, std::uint16_t qtype) {
        Rng rng = make_query_rng(cfg_.entropy.rng_seed, serial_++);

        DnsName effective = qname;
        if (cfg_.entropy.short_query_extension)
            effective = extend_short_query(qname, cfg_.entropy);

        for (int attempt = 0; attempt < cfg_.normal_attempts; ++attempt) {
            PendingQuery pending;
            pending.qname = qname;
            pending.qtype = qtype;
            pending.tuple = TuplePicker{cfg_.entropy, rng}.make(effective, qtype);
            pending.deadline = transport_.now() + cfg_.query_timeout;

            SocketId sock = open_with_tuple(pending.tuple, rng);
            if (sock == kInvalidSocket) break;
            Endpoint dst = upstream_for(pending.tuple.dst_ip);
            transport_.send_to(sock, dst, build_query(pending.tuple));

            bool escalate = false;
            while (true) {
                auto dg = transport_.receive({sock}, pending.deadline);
                if (!dg) break; // timeout, next attempt
                DnsMessage r;
                try {
                    r = decode_message(dg->payload);
                } catch (const WireError&) {
                    if (metrics_) metrics_->malformed_dropped++;
                    continue;
                }
                if (cfg_.accept_first_response) {
                    transport_.close_socket(sock);
                    cache_accepted(qname, qtype, r, CacheSource::NormalValidated,
                                   dg->meta.forged);
                    if (metrics_) metrics_->accepted++;
                    return result_from(r);
                }
                Classification c = classify_response(pending.tuple, r, dg->meta);
                if (c.match) {
                    transport_.close_socket(sock);
                    cache_accepted(qname, qtype, r, CacheSource::NormalValidated,
                                   dg->meta.forged);
                    if (metrics_) metrics_->accepted++;
                    return result_from(r);
                }
                if (metrics_) metrics_->mismatched_responses++;
                if (detect_forgery(pending, cfg_.sandwich.detection_threshold) &&
                    cfg_.sandwich_enabled) {
                    escalate = true;
                    break;
                }
            }
            transport_.close_socket(sock);
            if (escalate) {
                // any tuple-valid response still in flight for the Normal
                // query is dead with its socket: fail closed during attack
                return resolve_sandwich(qname, qtype, effective, rng);
            }
        }
        ResolveResult r;
        r.status = ResolveResult::Status::Timeout;
        if (metrics_) metrics_->servfail++;
        return r;
    }

    ResolveResult resolve_sandwich(const DnsName& qname, std::uint16_t qtype,
                                   const DnsName& effective, Rng& rng) {
        std::uint64_t sid = next_session_++;
        if (metrics_) metrics_->sandwich_activations++;
        log_event(sid, "detect");

        int retries_left = cfg_.sandwich.retries;
        while (true) {
            SandwichSession session = build_sandwich(effective, qtype, cfg_.entropy,
                                                     cfg_.sandwich, rng, sid,
                                                     transport_.now());
            session.retries_left = retries_left;
            log_event(sid, "build");

            std::array<SocketId, 3> socks{};
            std::vector<SocketId> open;
            bool bind_ok = true;
            for (int i = 0; i < 3 && bind_ok; ++i) {
                SubQuery& sq = session.sub[static_cast<std::size_t>(i)];
                socks[static_cast<std::size_t>(i)] = open_with_tuple(sq.tuple, rng);
                bind_ok = socks[static_cast<std::size_t>(i)] != kInvalidSocket;
            }
            auto close_all = [&] {
                for (SocketId s : socks)
                    if (s != kInvalidSocket) transport_.close_socket(s);
            };
            if (!bind_ok) {
                close_all();
                break;
            }
            // strict send order: pre, mid, post
            for (int i = 0; i < 3; ++i) {
                const SubQuery& sq = session.sub[static_cast<std::size_t>(i)];
                transport_.send_to(socks[static_cast<std::size_t>(i)],
                                   upstream_for(sq.tuple.dst_ip), build_query(sq.tuple));
                open.push_back(socks[static_cast<std::size_t>(i)]);
            }

            SandwichVerdict verdict = SandwichVerdict::Restart;
            while (true) {
                auto dg = transport_.receive(open, session.deadline);
                if (!dg) {
                    verdict = SandwichVerdict::Restart;
                    break;
                }
                int which = -1;
                for (int i = 0; i < 3; ++i)
                    if (socks[static_cast<std::size_t>(i)] == dg->socket) which = i;
                if (which < 0) continue;
                DnsMessage r;
                try {
                    r = decode_message(dg->payload);
                } catch (const WireError&) {
                    if (metrics_) metrics_->malformed_dropped++;
                    continue;
                }
                verdict = on_sandwich_response(session, static_cast<SubQueryId>(which), r,
                                               dg->meta);
                if (verdict == SandwichVerdict::Accept) {
                    close_all();
                    const SubQuery& mid = session[SubQueryId::Mid];
                    DnsMessage accepted;
                    accepted.answers = mid.answers;
                    if (mid.nxdomain) {
                        accepted.header.rcode = kRcodeNxDomain;
                        accepted.authority = mid.authority;
                    }
                    cache_accepted(qname, qtype, accepted, CacheSource::SandwichAccepted,
                                   dg->meta.forged);
                    if (metrics_) metrics_->accepted++;
                    log_event(sid, "accept");
                    ResolveResult res;
                    res.status = mid.nxdomain ? ResolveResult::Status::NxDomain
                                              : ResolveResult::Status::Answered;
                    res.answers = mid.answers;
                    return res;
                }
                if (verdict == SandwichVerdict::Restart) break;
            }
            close_all();
            if (metrics_) metrics_->sandwich_restarts++;
            log_event(sid, "restart");
            if (retries_left == 0) break;
            --retries_left;
        }
        // retries exhausted: fail closed, nothing cached
        if (metrics_) metrics_->servfail++;
        ResolveResult res;
        res.status = ResolveResult::Status::ServFail;
        return res;
    }

    ResolverConfig cfg_;
    Transport& transport_;
    TtlCache cache_;
    Metrics* metrics_;
    LogFn log_;
    std::atomic<std::uint64_t> serial_{1};
    std::atomic<std::uint64_t> next_session_{1};

    std::mutex flights_mu_;
    std::unordered_map<CacheKey, std::shared_ptr<Flight>, CacheKeyHash> flights_;
};

} // namespace antidote
