#pragma once

// DNS message model and bit-exact wire codec (RFC 1035 subset).
//
//   +---------------------+
//   | Header              |
//   +---------------------+
//   | Question            |
//   +---------------------+
//   | Answer              |
//   +---------------------+
//   | Authority           |
//   +---------------------+
//   | Additional          |
//   +---------------------+
//
// Names are emitted uncompressed and with every label byte exactly as
// stored; compression pointers are accepted on decode only. Case is
// never folded anywhere in this module.

#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "antidote/common.hpp"

namespace antidote {

enum class WireErrc {
    TruncatedPacket,
    PointerLoop,
    LabelTooLong,
    NameTooLong,
    CountMismatch,
    TooManyRecords,
    TrailingGarbage,
    ExtendedNameTooLong,
};

inline const char* to_string(WireErrc e) {
    switch (e) {
    case WireErrc::TruncatedPacket: return "truncated-packet";
    case WireErrc::PointerLoop: return "pointer-loop";
    case WireErrc::LabelTooLong: return "label-too-long";
    case WireErrc::NameTooLong: return "name-too-long";
    case WireErrc::CountMismatch: return "count-mismatch";
    case WireErrc::TooManyRecords: return "too-many-records";
    case WireErrc::TrailingGarbage: return "trailing-garbage";
    case WireErrc::ExtendedNameTooLong: return "extended-name-too-long";
    }
    return "unknown";
}

class WireError : public std::runtime_error {
public:
    explicit WireError(WireErrc code)
        : std::runtime_error(to_string(code)), code_(code) {}
    WireErrc code() const { return code_; }

private:
    WireErrc code_;
};

// Record types and classes used by the defense stack; anything else is
// carried with opaque rdata.
enum RecordType : std::uint16_t {
    kTypeA = 1,
    kTypeNS = 2,
    kTypeCNAME = 5,
    kTypeSOA = 6,
};
constexpr std::uint16_t kClassIN = 1;

enum Rcode : std::uint8_t {
    kRcodeNoError = 0,
    kRcodeFormErr = 1,
    kRcodeServFail = 2,
    kRcodeNxDomain = 3,
};

inline bool is_ascii_alpha(std::uint8_t b) {
    return (b >= 'A' && b <= 'Z') || (b >= 'a' && b <= 'z');
}
inline std::uint8_t ascii_lower(std::uint8_t b) {
    return (b >= 'A' && b <= 'Z') ? static_cast<std::uint8_t>(b + 32) : b;
}

/// A domain name as an ordered list of labels, original byte case kept.
struct DnsName {
    std::vector<std::string> labels;

    static DnsName from_string(const std::string& dotted) {
        DnsName n;
        std::string cur;
        for (char c : dotted) {
            if (c == '.') {
                if (!cur.empty()) n.labels.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) n.labels.push_back(cur);
        return n;
    }

    std::string to_string() const {
        if (labels.empty()) return ".";
        std::string s;
        for (const auto& l : labels) {
            if (!s.empty()) s.push_back('.');
            s += l;
        }
        return s;
    }

    /// Encoded size: one length byte per label plus the root byte.
    std::size_t wire_length() const {
        std::size_t n = 1;
        for (const auto& l : labels) n += 1 + l.size();
        return n;
    }

    bool valid() const {
        if (wire_length() > 255) return false;
        for (const auto& l : labels)
            if (l.empty() || l.size() > 63) return false;
        return true;
    }

    std::size_t letter_count() const {
        std::size_t n = 0;
        for (const auto& l : labels)
            for (unsigned char b : l)
                if (is_ascii_alpha(b)) ++n;
        return n;
    }

    DnsName lowercased() const {
        DnsName out = *this;
        for (auto& l : out.labels)
            for (auto& c : l) c = static_cast<char>(ascii_lower(static_cast<std::uint8_t>(c)));
        return out;
    }

    /// True when `this` is equal to or a subdomain of `zone` (label-wise,
    /// case-insensitive). Used for bailiwick checks.
    bool ends_with(const DnsName& zone) const;

    bool operator==(const DnsName&) const = default;
};

inline bool name_equal_case_exact(const DnsName& a, const DnsName& b) {
    return a.labels == b.labels;
}

inline bool name_equal_case_insensitive(const DnsName& a, const DnsName& b) {
    if (a.labels.size() != b.labels.size()) return false;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        const auto& la = a.labels[i];
        const auto& lb = b.labels[i];
        if (la.size() != lb.size()) return false;
        for (std::size_t j = 0; j < la.size(); ++j)
            if (ascii_lower(static_cast<std::uint8_t>(la[j])) !=
                ascii_lower(static_cast<std::uint8_t>(lb[j])))
                return false;
    }
    return true;
}

inline bool DnsName::ends_with(const DnsName& zone) const {
    if (zone.labels.size() > labels.size()) return false;
    DnsName tail;
    tail.labels.assign(labels.end() - static_cast<std::ptrdiff_t>(zone.labels.size()),
                       labels.end());
    return name_equal_case_insensitive(tail, zone);
}

struct DnsHeader {
    std::uint16_t txid = 0;
    bool qr = false;
    std::uint8_t opcode = 0;
    bool aa = false;
    bool tc = false;
    bool rd = false;
    bool ra = false;
    std::uint8_t rcode = kRcodeNoError;

    bool operator==(const DnsHeader&) const = default;
};

struct Question {
    DnsName name;
    std::uint16_t qtype = kTypeA;
    std::uint16_t qclass = kClassIN;

    bool operator==(const Question&) const = default;
};

struct ResourceRecord {
    DnsName name;
    std::uint16_t type = kTypeA;
    std::uint16_t rclass = kClassIN;
    std::uint32_t ttl = 0;
    Bytes rdata; // normalized: embedded names stored uncompressed

    bool operator==(const ResourceRecord&) const = default;
};

struct DnsMessage {
    DnsHeader header;
    std::vector<Question> questions;
    std::vector<ResourceRecord> answers;
    std::vector<ResourceRecord> authority;
    std::vector<ResourceRecord> additional;

    bool operator==(const DnsMessage&) const = default;
};

namespace wire_detail {

inline void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}
inline void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline void put_name(Bytes& out, const DnsName& n) {
    if (n.wire_length() > 255) throw WireError(WireErrc::NameTooLong);
    for (const auto& l : n.labels) {
        if (l.empty() || l.size() > 63) throw WireError(WireErrc::LabelTooLong);
        out.push_back(static_cast<std::uint8_t>(l.size()));
        out.insert(out.end(), l.begin(), l.end());
    }
    out.push_back(0);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

    std::size_t pos() const { return pos_; }
    std::size_t size() const { return buf_.size(); }

    std::uint8_t u8() {
        need(1);
        return buf_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] << 8 | buf_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | buf_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }
    Bytes take(std::size_t n) {
        need(n);
        Bytes b(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return b;
    }

    /// Reads a possibly-compressed name starting at the current position.
    /// Pointers must target an earlier offset than the pointer itself, which
    /// rules out loops without bookkeeping.
    DnsName name() {
        DnsName out;
        std::size_t at = pos_;
        bool jumped = false;
        std::size_t total = 1;
        for (;;) {
            if (at >= buf_.size()) throw WireError(WireErrc::TruncatedPacket);
            std::uint8_t len = buf_[at];
            if ((len & 0xc0) == 0xc0) {
                if (at + 1 >= buf_.size()) throw WireError(WireErrc::TruncatedPacket);
                std::size_t target =
                    static_cast<std::size_t>((len & 0x3f) << 8 | buf_[at + 1]);
                if (target >= at) throw WireError(WireErrc::PointerLoop);
                if (!jumped) pos_ = at + 2;
                jumped = true;
                at = target;
                continue;
            }
            if (len & 0xc0) throw WireError(WireErrc::LabelTooLong);
            if (len == 0) {
                if (!jumped) pos_ = at + 1;
                return out;
            }
            if (at + 1 + len > buf_.size()) throw WireError(WireErrc::TruncatedPacket);
            total += 1 + len;
            if (total > 255) throw WireError(WireErrc::NameTooLong);
            out.labels.emplace_back(reinterpret_cast<const char*>(&buf_[at + 1]), len);
            at += 1 + static_cast<std::size_t>(len);
        }
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw WireError(WireErrc::TruncatedPacket);
    }

    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

// Re-encodes name-bearing rdata uncompressed so records survive caching
// and later emission regardless of how the upstream compressed them.
inline Bytes normalize_rdata(std::uint16_t type, Reader& r, std::size_t rdlen) {
    std::size_t end = r.pos() + rdlen;
    if (end > r.size()) throw WireError(WireErrc::TruncatedPacket);
    Bytes out;
    switch (type) {
    case kTypeNS:
    case kTypeCNAME:
        put_name(out, r.name());
        break;
    case kTypeSOA: {
        put_name(out, r.name());
        put_name(out, r.name());
        for (int i = 0; i < 5; ++i) put_u32(out, r.u32());
        break;
    }
    default:
        out = r.take(rdlen);
        return out;
    }
    if (r.pos() != end) throw WireError(WireErrc::CountMismatch);
    return out;
}

} // namespace wire_detail

inline Bytes encode_message(const DnsMessage& m) {
    using namespace wire_detail;
    auto fits16 = [](std::size_t n) { return n <= 0xffff; };
    if (!fits16(m.questions.size()) || !fits16(m.answers.size()) ||
        !fits16(m.authority.size()) || !fits16(m.additional.size()))
        throw WireError(WireErrc::TooManyRecords);

    Bytes out;
    put_u16(out, m.header.txid);
    std::uint16_t flags = 0;
    flags |= static_cast<std::uint16_t>(m.header.qr) << 15;
    flags |= static_cast<std::uint16_t>(m.header.opcode & 0x0f) << 11;
    flags |= static_cast<std::uint16_t>(m.header.aa) << 10;
    flags |= static_cast<std::uint16_t>(m.header.tc) << 9;
    flags |= static_cast<std::uint16_t>(m.header.rd) << 8;
    flags |= static_cast<std::uint16_t>(m.header.ra) << 7;
    flags |= static_cast<std::uint16_t>(m.header.rcode & 0x0f);
    put_u16(out, flags);
    put_u16(out, static_cast<std::uint16_t>(m.questions.size()));
    put_u16(out, static_cast<std::uint16_t>(m.answers.size()));
    put_u16(out, static_cast<std::uint16_t>(m.authority.size()));
    put_u16(out, static_cast<std::uint16_t>(m.additional.size()));

    for (const auto& q : m.questions) {
        put_name(out, q.name);
        put_u16(out, q.qtype);
        put_u16(out, q.qclass);
    }
    for (const auto* sec : {&m.answers, &m.authority, &m.additional}) {
        for (const auto& rr : *sec) {
            put_name(out, rr.name);
            put_u16(out, rr.type);
            put_u16(out, rr.rclass);
            put_u32(out, rr.ttl);
            if (rr.rdata.size() > 0xffff) throw WireError(WireErrc::TooManyRecords);
            put_u16(out, static_cast<std::uint16_t>(rr.rdata.size()));
            out.insert(out.end(), rr.rdata.begin(), rr.rdata.end());
        }
    }
    return out;
}

inline DnsMessage decode_message(std::span<const std::uint8_t> buf, bool strict = false) {
    using namespace wire_detail;
    Reader r(buf);
    DnsMessage m;
    m.header.txid = r.u16();
    std::uint16_t flags = r.u16();
    m.header.qr = (flags >> 15) & 1;
    m.header.opcode = static_cast<std::uint8_t>((flags >> 11) & 0x0f);
    m.header.aa = (flags >> 10) & 1;
    m.header.tc = (flags >> 9) & 1;
    m.header.rd = (flags >> 8) & 1;
    m.header.ra = (flags >> 7) & 1;
    m.header.rcode = static_cast<std::uint8_t>(flags & 0x0f);
    std::uint16_t qd = r.u16();
    std::uint16_t an = r.u16();
    std::uint16_t ns = r.u16();
    std::uint16_t ar = r.u16();
    if (qd > 8) throw WireError(WireErrc::CountMismatch);

    for (std::uint16_t i = 0; i < qd; ++i) {
        Question q;
        q.name = r.name();
        q.qtype = r.u16();
        q.qclass = r.u16();
        m.questions.push_back(std::move(q));
    }
    auto read_section = [&](std::vector<ResourceRecord>& sec, std::uint16_t count) {
        for (std::uint16_t i = 0; i < count; ++i) {
            ResourceRecord rr;
            rr.name = r.name();
            rr.type = r.u16();
            rr.rclass = r.u16();
            rr.ttl = r.u32();
            std::uint16_t rdlen = r.u16();
            rr.rdata = normalize_rdata(rr.type, r, rdlen);
            sec.push_back(std::move(rr));
        }
    };
    read_section(m.answers, an);
    read_section(m.authority, ns);
    read_section(m.additional, ar);

    if (strict && r.pos() != buf.size()) throw WireError(WireErrc::TrailingGarbage);
    return m;
}

// rdata builders for the record types the toolkit emits itself

inline Bytes make_a_rdata(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
    return Bytes{a, b, c, d};
}

inline Bytes make_name_rdata(const DnsName& n) {
    Bytes out;
    wire_detail::put_name(out, n);
    return out;
}

inline Bytes make_soa_rdata(const DnsName& mname, const DnsName& rname,
                            std::uint32_t serial, std::uint32_t refresh,
                            std::uint32_t retry, std::uint32_t expire,
                            std::uint32_t minimum) {
    Bytes out;
    wire_detail::put_name(out, mname);
    wire_detail::put_name(out, rname);
    wire_detail::put_u32(out, serial);
    wire_detail::put_u32(out, refresh);
    wire_detail::put_u32(out, retry);
    wire_detail::put_u32(out, expire);
    wire_detail::put_u32(out, minimum);
    return out;
}

/// SOA minimum field, used for negative-caching TTLs.
inline std::optional<std::uint32_t> soa_minimum(const ResourceRecord& rr) {
    if (rr.type != kTypeSOA || rr.rdata.size() < 4) return std::nullopt;
    std::uint32_t v = 0;
    for (std::size_t i = rr.rdata.size() - 4; i < rr.rdata.size(); ++i)
        v = (v << 8) | rr.rdata[i];
    return v;
}

} // namespace antidote
