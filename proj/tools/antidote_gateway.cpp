// antidote-gateway: UDP DNS forwarding gateway applying the anti-poisoning
// defense stack between clients and a configured upstream.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "antidote/gateway.hpp"

namespace {
antidote::Gateway* g_gateway = nullptr;
void handle_signal(int) {
    if (g_gateway) g_gateway->stop();
}
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DNS anti-poisoning forwarding gateway"};

    std::string config_path;
    std::string listen;
    std::vector<std::string> upstreams;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string log_level;
    int metrics_port = -2;

    app.add_option("--config", config_path, "Config file (flat key=value)");
    app.add_option("--listen", listen, "Listen ADDR:PORT");
    app.add_option("--upstream", upstreams, "Upstream ADDR:PORT (repeatable)");
    app.add_option("--seed", seed, "RNG seed (testing only)")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--log-level", log_level, "Log level");
    app.add_option("--metrics-port", metrics_port, "Plain-text metrics over HTTP GET /metrics");

    CLI11_PARSE(app, argc, argv);

    antidote::GatewayConfig cfg;
    try {
        if (!config_path.empty()) cfg = antidote::load_gateway_config(config_path);
        // flags override the file
        if (!listen.empty()) cfg.listen = antidote::parse_endpoint(listen, 5353);
        if (!upstreams.empty()) {
            cfg.resolver.upstreams.clear();
            for (const auto& u : upstreams)
                cfg.resolver.upstreams.push_back(antidote::parse_endpoint(u));
        }
        if (seed_set) cfg.resolver.entropy.rng_seed = seed;
        if (!log_level.empty()) cfg.log_level = log_level;
        if (metrics_port != -2) cfg.metrics_port = metrics_port;

        antidote::Gateway gateway(std::move(cfg));
        g_gateway = &gateway;
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        gateway.run();
    } catch (const antidote::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
