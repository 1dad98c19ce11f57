#pragma once

// Real-socket Transport for the gateway: one UDP socket per upstream
// exchange, poll-based receive with a deadline on the monotonic clock.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <mutex>
#include <unordered_map>

#include "antidote/transport.hpp"

namespace antidote {

inline Micros steady_now() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline bool parse_ipv4(const IpAddress& ip, in_addr* out) {
    return inet_pton(AF_INET, ip.c_str(), out) == 1;
}

class UdpTransport : public Transport {
public:
    ~UdpTransport() override {
        std::lock_guard lock(mu_);
        for (auto& [id, s] : socks_) ::close(s.fd);
    }

    SocketId open_socket(const IpAddress& src_ip, std::uint16_t port) override {
        int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd < 0) return kInvalidSocket;
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (!parse_ipv4(src_ip, &addr.sin_addr)) {
            ::close(fd);
            return kInvalidSocket;
        }
        if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(fd);
            return kInvalidSocket;
        }
        std::lock_guard lock(mu_);
        SocketId id = next_id_++;
        socks_.emplace(id, Sock{fd, port});
        return id;
    }

    void close_socket(SocketId id) override {
        std::lock_guard lock(mu_);
        auto it = socks_.find(id);
        if (it == socks_.end()) return;
        ::close(it->second.fd);
        socks_.erase(it);
    }

    bool send_to(SocketId id, const Endpoint& dst, const Bytes& payload) override {
        int fd = -1;
        {
            std::lock_guard lock(mu_);
            auto it = socks_.find(id);
            if (it == socks_.end()) return false;
            fd = it->second.fd;
        }
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(dst.port);
        if (!parse_ipv4(dst.ip, &addr.sin_addr)) return false;
        return ::sendto(fd, payload.data(), payload.size(), 0,
                        reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) >= 0;
    }

    std::optional<Datagram> receive(const std::vector<SocketId>& sockets,
                                    Micros deadline) override {
        std::vector<pollfd> fds;
        std::vector<SocketId> ids;
        std::vector<std::uint16_t> ports;
        {
            std::lock_guard lock(mu_);
            for (SocketId id : sockets) {
                auto it = socks_.find(id);
                if (it == socks_.end()) continue;
                fds.push_back(pollfd{it->second.fd, POLLIN, 0});
                ids.push_back(id);
                ports.push_back(it->second.port);
            }
        }
        if (fds.empty()) return std::nullopt;
        for (;;) {
            Micros remain = deadline - steady_now();
            if (remain <= 0) return std::nullopt;
            int timeout_ms = static_cast<int>((remain + 999) / 1000);
            int rv = ::poll(fds.data(), fds.size(), timeout_ms);
            if (rv < 0) {
                if (errno == EINTR) continue;
                return std::nullopt;
            }
            if (rv == 0) return std::nullopt;
            for (std::size_t i = 0; i < fds.size(); ++i) {
                if (!(fds[i].revents & POLLIN)) continue;
                std::uint8_t buf[4096];
                sockaddr_in from{};
                socklen_t from_len = sizeof(from);
                ssize_t n = ::recvfrom(fds[i].fd, buf, sizeof(buf), 0,
                                       reinterpret_cast<sockaddr*>(&from), &from_len);
                if (n < 0) continue;
                char ip_str[INET_ADDRSTRLEN] = {0};
                inet_ntop(AF_INET, &from.sin_addr, ip_str, sizeof(ip_str));
                Datagram dg;
                dg.socket = ids[i];
                dg.meta.src_ip = ip_str;
                dg.meta.src_port = ntohs(from.sin_port);
                dg.meta.dst_port = ports[i];
                dg.payload.assign(buf, buf + n);
                return dg;
            }
        }
    }

    Micros now() override { return steady_now(); }

    /// Local port of a socket bound to port 0.
    std::uint16_t local_port(SocketId id) override {
        std::lock_guard lock(mu_);
        auto it = socks_.find(id);
        if (it == socks_.end()) return 0;
        if (it->second.port == 0) {
            sockaddr_in addr{};
            socklen_t len = sizeof(addr);
            if (::getsockname(it->second.fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0)
                it->second.port = ntohs(addr.sin_port);
        }
        return it->second.port;
    }

private:
    struct Sock {
        int fd;
        std::uint16_t port;
    };

    std::mutex mu_;
    std::unordered_map<SocketId, Sock> socks_;
    SocketId next_id_ = 1;
};

} // namespace antidote
