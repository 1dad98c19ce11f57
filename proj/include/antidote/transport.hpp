#pragma once

// Socket abstraction shared by the real UDP gateway and the deterministic
// simulator. The resolver only ever opens sockets, sends datagrams and
// waits on its own socket set, so the same validation path runs in both
// worlds.

#include <cstdint>
#include <optional>
#include <vector>

#include "antidote/common.hpp"
#include "antidote/sandwich.hpp"

namespace antidote {

using SocketId = std::uint64_t;
constexpr SocketId kInvalidSocket = 0;

struct Datagram {
    SocketId socket = kInvalidSocket;
    ResponseMeta meta; // claimed source, local port, sim forged flag
    Bytes payload;
};

class Transport {
public:
    virtual ~Transport() = default;

    /// Binds a socket to (src_ip, port). Returns kInvalidSocket when the
    /// port is unavailable so the caller can re-pick.
    virtual SocketId open_socket(const IpAddress& src_ip, std::uint16_t port) = 0;
    virtual void close_socket(SocketId id) = 0;
    virtual bool send_to(SocketId id, const Endpoint& dst, const Bytes& payload) = 0;

    /// Next datagram on any of the given sockets, or nullopt once the
    /// deadline passes. The simulator advances virtual time here.
    virtual std::optional<Datagram> receive(const std::vector<SocketId>& sockets,
                                            Micros deadline) = 0;

    /// Actual bound port (relevant when opened with port 0).
    virtual std::uint16_t local_port(SocketId id) = 0;

    virtual Micros now() = 0;
};

} // namespace antidote
