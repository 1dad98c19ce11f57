#pragma once

// Deployable UDP forwarding gateway: listens for client queries, resolves
// them through the defense stack over real sockets, and answers with the
// client's own txid while every upstream exchange is independently
// randomized. Optional plain-text metrics endpoint over HTTP.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "antidote/resolver.hpp"
#include "antidote/udp_transport.hpp"

#include <httplib.h>

namespace antidote {

struct GatewayConfig {
    Endpoint listen{"127.0.0.1", 5353};
    ResolverConfig resolver;
    int metrics_port = -1; // disabled when negative
    std::string log_level = "info";

    bool valid(std::string* why = nullptr) const {
        if (resolver.upstreams.empty()) {
            if (why) *why = "at least one upstream required";
            return false;
        }
        for (const auto& u : resolver.upstreams) {
            if (u == listen) {
                if (why) *why = "listen address equals an upstream";
                return false;
            }
        }
        return true;
    }
};

inline Endpoint parse_endpoint(const std::string& s, std::uint16_t default_port = 53) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos) return {s, default_port};
    return {s.substr(0, colon),
            static_cast<std::uint16_t>(std::stoul(s.substr(colon + 1)))};
}

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat key-value config file; `#` starts a comment. CLI flags override.
inline GatewayConfig parse_gateway_config(std::istream& in) {
    GatewayConfig cfg;
    cfg.resolver.upstreams.clear();
    cfg.resolver.entropy.ip_pool.clear();
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            s.erase(s.begin());
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.pop_back();
        return s;
    };
    auto as_bool = [](const std::string& v) { return v == "true" || v == "1" || v == "on"; };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "listen") cfg.listen = parse_endpoint(val, 5353);
            else if (key == "upstream") cfg.resolver.upstreams.push_back(parse_endpoint(val));
            else if (key == "seed") cfg.resolver.entropy.rng_seed = std::stoull(val);
            else if (key == "log_level") cfg.log_level = val;
            else if (key == "metrics_port") cfg.metrics_port = std::stoi(val);
            else if (key == "spr") cfg.resolver.entropy.spr_enabled = as_bool(val);
            else if (key == "port_min") cfg.resolver.entropy.port_min = static_cast<std::uint16_t>(std::stoul(val));
            else if (key == "port_max") cfg.resolver.entropy.port_max = static_cast<std::uint16_t>(std::stoul(val));
            else if (key == "encode_0x20") cfg.resolver.entropy.encode_0x20 = as_bool(val);
            else if (key == "ip_pool") cfg.resolver.entropy.ip_pool.push_back(val);
            else if (key == "short_query_extension") cfg.resolver.entropy.short_query_extension = as_bool(val);
            else if (key == "fixed_prefix") cfg.resolver.entropy.fixed_prefix = val;
            else if (key == "min_letters") cfg.resolver.entropy.min_letters = static_cast<unsigned>(std::stoul(val));
            else if (key == "sandwich") cfg.resolver.sandwich_enabled = as_bool(val);
            else if (key == "detection_threshold") cfg.resolver.sandwich.detection_threshold = std::stoi(val);
            else if (key == "prefix_len") cfg.resolver.sandwich.prefix_len = static_cast<unsigned>(std::stoul(val));
            else if (key == "retries") cfg.resolver.sandwich.retries = std::stoi(val);
            else if (key == "deadline_ms") cfg.resolver.sandwich.deadline = std::stoll(val) * kMillisecond;
            else if (key == "query_timeout_ms") cfg.resolver.query_timeout = std::stoll(val) * kMillisecond;
            else if (key == "cache_capacity") cfg.resolver.cache_capacity = std::stoul(val);
            else if (key == "max_ttl") cfg.resolver.max_ttl = static_cast<std::uint32_t>(std::stoul(val));
            else throw ConfigError("unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw ConfigError("config line " + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    if (cfg.resolver.entropy.ip_pool.empty())
        cfg.resolver.entropy.ip_pool.push_back("0.0.0.0");
    if (cfg.resolver.upstreams.empty())
        cfg.resolver.upstreams.push_back({"127.0.0.1", 53});
    return cfg;
}

inline GatewayConfig load_gateway_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_gateway_config(in);
}

class Gateway {
public:
    explicit Gateway(GatewayConfig cfg, LogFn log = nullptr)
        : cfg_(std::move(cfg)), log_(log ? std::move(log) : default_log()) {
        std::string why;
        if (!cfg_.valid(&why)) throw ConfigError(why);
        validate_ip_pool();
        resolver_ = std::make_unique<Resolver>(cfg_.resolver, transport_, &metrics_, log_);
    }

    ~Gateway() { stop(); }

    Metrics& metrics() { return metrics_; }
    Resolver& resolver() { return *resolver_; }

    /// Port actually bound (useful when configured with port 0).
    std::uint16_t listen_port() const { return bound_port_; }

    std::string metrics_text() const {
        auto s = metrics_.snapshot();
        std::ostringstream os;
        os << "queries " << s.queries << "\n"
           << "cache_hits " << s.cache_hits << "\n"
           << "mismatched_responses " << s.mismatched_responses << "\n"
           << "sandwich_activations " << s.sandwich_activations << "\n"
           << "sandwich_restarts " << s.sandwich_restarts << "\n"
           << "accepted " << s.accepted << "\n"
           << "servfail " << s.servfail << "\n"
           << "malformed_dropped " << s.malformed_dropped << "\n";
        return os.str();
    }

    /// Binds the listen socket; throws on failure. Separate from run() so
    /// tests can learn the bound port before serving.
    void bind_listen() {
        if (listen_fd_ >= 0) return;
        listen_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (listen_fd_ < 0) throw ConfigError("bind-failure: cannot create socket");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(cfg_.listen.port);
        if (!parse_ipv4(cfg_.listen.ip, &addr.sin_addr))
            throw ConfigError("bind-failure: bad listen address " + cfg_.listen.ip);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw ConfigError("bind-failure: cannot bind " + cfg_.listen.ip + ":" +
                              std::to_string(cfg_.listen.port));
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        bound_port_ = ntohs(addr.sin_port);
    }

    /// Serves until stop(). Blocks the calling thread.
    void run() {
        bind_listen();
        running_ = true;
        if (cfg_.metrics_port >= 0) start_metrics_server();
        log_("gateway listening on " + cfg_.listen.ip + ":" + std::to_string(bound_port_));

        while (running_) {
            pollfd pfd{listen_fd_, POLLIN, 0};
            int rv = ::poll(&pfd, 1, 200);
            if (rv <= 0) continue;
            std::uint8_t buf[4096];
            sockaddr_in from{};
            socklen_t from_len = sizeof(from);
            ssize_t n = ::recvfrom(listen_fd_, buf, sizeof(buf), 0,
                                   reinterpret_cast<sockaddr*>(&from), &from_len);
            if (n <= 0) continue;
            Bytes query(buf, buf + n);
            DnsMessage q;
            try {
                q = decode_message(query);
            } catch (const WireError&) {
                metrics_.malformed_dropped++;
                continue;
            }
            if (q.questions.size() != 1) {
                metrics_.malformed_dropped++;
                continue;
            }
            ++inflight_;
            std::thread([this, q = std::move(q), from] {
                handle_query(q, from);
                --inflight_;
            }).detach();
        }
        // graceful shutdown: let in-flight resolutions finish
        while (inflight_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }

    void stop() {
        running_ = false;
        if (metrics_server_) metrics_server_->stop();
        if (metrics_thread_.joinable()) metrics_thread_.join();
        if (listen_fd_ >= 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
        }
    }

private:
    static LogFn default_log() {
        return [](std::string_view s) { std::cerr << s << "\n"; };
    }

    // Source-IP pool entries are only usable when the host owns them;
    // unbindable addresses are dropped with a warning, and the gateway
    // degrades to single-address mode when nothing remains.
    void validate_ip_pool() {
        std::vector<IpAddress> usable;
        for (const auto& ip : cfg_.resolver.entropy.ip_pool) {
            SocketId probe = transport_.open_socket(ip, 0);
            if (probe != kInvalidSocket) {
                transport_.close_socket(probe);
                usable.push_back(ip);
            } else {
                log_("warning: source address " + ip + " not bindable, dropped from pool");
            }
        }
        if (usable.empty()) {
            log_("warning: no bindable pool address, degrading to 0.0.0.0");
            usable.push_back("0.0.0.0");
        }
        cfg_.resolver.entropy.ip_pool = std::move(usable);
    }

    void handle_query(const DnsMessage& q, const sockaddr_in& from) {
        const Question& question = q.questions.front();
        ResolveResult res = resolver_->resolve(question.name, question.qtype);

        DnsMessage reply;
        reply.header.txid = q.header.txid; // client txid preserved
        reply.header.qr = true;
        reply.header.rd = q.header.rd;
        reply.header.ra = true;
        reply.questions.push_back(question); // echoed with the client's case
        switch (res.status) {
        case ResolveResult::Status::Answered:
            reply.answers = res.answers;
            break;
        case ResolveResult::Status::NxDomain:
            reply.header.rcode = kRcodeNxDomain;
            break;
        default:
            reply.header.rcode = kRcodeServFail;
            break;
        }
        Bytes wire = encode_message(reply);
        ::sendto(listen_fd_, wire.data(), wire.size(), 0,
                 reinterpret_cast<const sockaddr*>(&from), sizeof(from));
    }

    void start_metrics_server() {
        metrics_server_ = std::make_unique<httplib::Server>();
        metrics_server_->Get("/metrics", [this](const httplib::Request&,
                                                httplib::Response& res) {
            res.set_content(metrics_text(), "text/plain");
        });
        int port = cfg_.metrics_port;
        metrics_thread_ = std::thread([this, port] {
            metrics_server_->listen("127.0.0.1", port);
        });
    }

    GatewayConfig cfg_;
    LogFn log_;
    UdpTransport transport_;
    Metrics metrics_;
    std::unique_ptr<Resolver> resolver_;

    int listen_fd_ = -1;
    std::uint16_t bound_port_ = 0;
    std::atomic<bool> running_{false};
    std::atomic<int> inflight_{0};
    std::unique_ptr<httplib::Server> metrics_server_;
    std::thread metrics_thread_;
};

} // namespace antidote
