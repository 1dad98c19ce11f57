#pragma once

// Grid experiments over defense x attacker configurations. Emits one CSV
// row per cell with a Wilson 95% interval, plus an accept-first-response
// baseline representing the weakest collaborative behavior.
//
// Config files are flat key-value text with a versioned header line:
//
//   antidote-sim v1
//   trials = 500
//   base_seed = 1
//   defenses = accept-first,txid-only,entropy-full,sandwich
//   attackers = blind-flood,bruteforce-txid,kaminsky
//   txid_bits = 8
//   packets_per_window = 16
//   grant_port = true

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "antidote/sim.hpp"

namespace antidote::sim {

struct WilsonInterval {
    double lo = 0;
    double hi = 0;
};

inline WilsonInterval wilson_interval(std::int64_t successes, std::int64_t n,
                                      double z = 1.96) {
    if (n <= 0) return {0, 1};
    double p = static_cast<double>(successes) / static_cast<double>(n);
    double nn = static_cast<double>(n);
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double center = p + z2 / (2.0 * nn);
    double margin = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return {std::max(0.0, (center - margin) / denom),
            std::min(1.0, (center + margin) / denom)};
}

struct ExperimentCell {
    std::string defense;
    std::string attacker;
    std::int64_t trials = 0;
    std::int64_t poisoned = 0;
    double rate = 0;
    WilsonInterval ci;
    double mean_spoofed_packets = 0;
};

inline std::string csv_header() {
    return "defense,attacker,trials,poisoned,rate,ci_lo,ci_hi,mean_spoofed_packets";
}

inline std::string csv_row(const ExperimentCell& c) {
    std::ostringstream os;
    os << c.defense << ',' << c.attacker << ',' << c.trials << ',' << c.poisoned << ','
       << c.rate << ',' << c.ci.lo << ',' << c.ci.hi << ',' << c.mean_spoofed_packets;
    return os.str();
}

struct ExperimentConfig {
    std::int64_t trials = 500;
    std::uint64_t base_seed = 1;
    std::vector<std::string> defenses{"accept-first", "txid-only", "entropy-full",
                                      "sandwich"};
    std::vector<std::string> attackers{"blind-flood", "bruteforce-txid", "kaminsky"};
    unsigned txid_bits = 8;
    int packets_per_window = 16;
    bool grant_port = true; // lets spoofed packets reach the socket at all
    double reorder_prob = 0.0;
    std::string query_name = "www.google.com";
};

inline DefenseConfig make_defense(const std::string& name, unsigned txid_bits) {
    DefenseConfig d;
    d.name = name;
    d.entropy.txid_space_bits = txid_bits;
    d.entropy.dst_ip_candidates = {"9.9.9.9"};
    if (name == "accept-first") {
        d.accept_first = true;
    } else if (name == "txid-only") {
        // nothing beyond the randomized txid
    } else if (name == "txid-spr") {
        d.entropy.spr_enabled = true;
    } else if (name == "entropy-full") {
        d.entropy.spr_enabled = true;
        d.entropy.encode_0x20 = true;
    } else if (name == "sandwich") {
        d.entropy.spr_enabled = true;
        d.entropy.encode_0x20 = true;
        d.sandwich_enabled = true;
    } else {
        throw std::invalid_argument("unknown defense preset: " + name);
    }
    return d;
}

inline AttackerConfig make_attacker(const std::string& name, int packets_per_window,
                                    bool grant_port) {
    AttackerConfig a;
    a.packets_per_window = packets_per_window;
    if (grant_port) a.known_fields |= kKnowPort;
    if (name == "blind-flood") {
        a.strategy = AttackStrategy::BlindFlood;
    } else if (name == "bruteforce-txid") {
        a.strategy = AttackStrategy::BruteForceTxid;
    } else if (name == "kaminsky") {
        a.strategy = AttackStrategy::Kaminsky;
        a.kaminsky_windows = 4;
    } else {
        throw std::invalid_argument("unknown attacker preset: " + name);
    }
    return a;
}

inline ExperimentCell run_cell(const DefenseConfig& defense, const AttackerConfig& attacker,
                               std::int64_t trials, std::uint64_t base_seed,
                               double reorder_prob = 0.0,
                               const std::string& query_name = "www.google.com") {
    ExperimentCell cell;
    cell.defense = defense.name;
    cell.attacker = to_string(attacker.strategy);
    cell.trials = trials;
    std::int64_t total_packets = 0;
    for (std::int64_t i = 0; i < trials; ++i) {
        TrialConfig t;
        t.defense = defense;
        t.attacker = attacker;
        t.link.reorder_prob = reorder_prob;
        t.query_name = DnsName::from_string(query_name);
        t.authority.zone = zone_of(t.query_name);
        t.authority.a_records[t.query_name.lowercased().to_string()] =
            make_a_rdata(93, 184, 216, 34);
        AttackOutcome out = run_trial(t, base_seed + static_cast<std::uint64_t>(i));
        if (out.poisoned) ++cell.poisoned;
        total_packets += out.spoofed_packets_sent;
    }
    cell.rate = trials ? static_cast<double>(cell.poisoned) / static_cast<double>(trials) : 0;
    cell.ci = wilson_interval(cell.poisoned, trials);
    cell.mean_spoofed_packets =
        trials ? static_cast<double>(total_packets) / static_cast<double>(trials) : 0;
    return cell;
}

inline std::vector<ExperimentCell> run_experiment(const ExperimentConfig& cfg) {
    std::vector<ExperimentCell> table;
    for (const auto& dname : cfg.defenses) {
        DefenseConfig d = make_defense(dname, cfg.txid_bits);
        for (const auto& aname : cfg.attackers) {
            AttackerConfig a = make_attacker(aname, cfg.packets_per_window, cfg.grant_port);
            table.push_back(run_cell(d, a, cfg.trials, cfg.base_seed, cfg.reorder_prob,
                                     cfg.query_name));
        }
    }
    return table;
}

// ------------------------------------------------------------ config file

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline ExperimentConfig parse_experiment_config(std::istream& in) {
    std::string header;
    std::getline(in, header);
    if (header != "antidote-sim v1")
        throw std::runtime_error("bad config header, expected 'antidote-sim v1'");
    ExperimentConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
                s.pop_back();
            return s;
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "trials") cfg.trials = std::stoll(val);
        else if (key == "base_seed") cfg.base_seed = std::stoull(val);
        else if (key == "defenses") cfg.defenses = split_csv(val);
        else if (key == "attackers") cfg.attackers = split_csv(val);
        else if (key == "txid_bits") cfg.txid_bits = static_cast<unsigned>(std::stoul(val));
        else if (key == "packets_per_window") cfg.packets_per_window = std::stoi(val);
        else if (key == "grant_port") cfg.grant_port = (val == "true" || val == "1");
        else if (key == "reorder_prob") cfg.reorder_prob = std::stod(val);
        else if (key == "query_name") cfg.query_name = val;
        else throw std::runtime_error("unknown config key: " + key);
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse_experiment_config(in);
}

} // namespace antidote::sim
