#pragma once

// TTL cache with case-folded keys, bounded LRU eviction and a write hook
// so tests can audit the provenance of every insert.

#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "antidote/common.hpp"
#include "antidote/wire.hpp"

namespace antidote {

struct CacheKey {
    std::string name_lc; // dotted, lowercase
    std::uint16_t qtype = kTypeA;
    std::uint16_t qclass = kClassIN;

    static CacheKey make(const DnsName& name, std::uint16_t qtype,
                         std::uint16_t qclass = kClassIN) {
        return CacheKey{name.lowercased().to_string(), qtype, qclass};
    }

    bool operator==(const CacheKey&) const = default;
};

struct CacheKeyHash {
    std::size_t operator()(const CacheKey& k) const {
        std::size_t h = std::hash<std::string>{}(k.name_lc);
        return h ^ (static_cast<std::size_t>(k.qtype) << 1) ^
               (static_cast<std::size_t>(k.qclass) << 17);
    }
};

enum class CacheSource { NormalValidated, SandwichAccepted };

struct CacheProvenance {
    CacheSource source = CacheSource::NormalValidated;
    bool forged_origin = false; // simulator ground truth, audit only
};

struct CacheEntry {
    std::vector<ResourceRecord> records; // original case kept
    Micros inserted_at = 0;
    std::uint32_t ttl = 0;
    bool negative = false; // cached NXDOMAIN
    CacheProvenance provenance;
};

class TtlCache {
public:
    using WriteHook = std::function<void(const CacheKey&, const CacheEntry&)>;

    explicit TtlCache(std::size_t capacity = 10000, std::uint32_t max_ttl = 86400)
        : capacity_(capacity), max_ttl_(max_ttl) {}

    void set_write_hook(WriteHook hook) { hook_ = std::move(hook); }

    void put(const CacheKey& key, CacheEntry entry) {
        std::lock_guard lock(mu_);
        entry.ttl = std::min(entry.ttl, max_ttl_);
        if (hook_) hook_(key, entry);
        if (entry.ttl == 0) return; // TTL 0 is never cached
        auto it = map_.find(key);
        if (it != map_.end()) {
            lru_.erase(it->second.lru_it);
            map_.erase(it);
        }
        lru_.push_front(key);
        map_.emplace(key, Slot{std::move(entry), lru_.begin()});
        while (map_.size() > capacity_) {
            map_.erase(lru_.back());
            lru_.pop_back();
        }
    }

    std::optional<CacheEntry> get(const CacheKey& key, Micros now) {
        std::lock_guard lock(mu_);
        auto it = map_.find(key);
        if (it == map_.end()) return std::nullopt;
        const CacheEntry& e = it->second.entry;
        // expiry is exclusive: a get at exactly inserted_at + ttl misses
        if (now >= e.inserted_at + static_cast<Micros>(e.ttl) * kSecond) {
            lru_.erase(it->second.lru_it);
            map_.erase(it);
            return std::nullopt;
        }
        lru_.splice(lru_.begin(), lru_, it->second.lru_it);
        return e;
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return map_.size();
    }

private:
    struct Slot {
        CacheEntry entry;
        std::list<CacheKey>::iterator lru_it;
    };

    mutable std::mutex mu_;
    std::size_t capacity_;
    std::uint32_t max_ttl_;
    std::list<CacheKey> lru_;
    std::unordered_map<CacheKey, Slot, CacheKeyHash> map_;
    WriteHook hook_;
};

} // namespace antidote
