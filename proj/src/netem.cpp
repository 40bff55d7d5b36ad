#include "eeo/netem.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "eeo/errors.hpp"

namespace eeo {

void NetworkProfile::validate() const {
    if (!(throughput_bps > 0.0) || !(rtt_ms > 0.0)) {
        throw ConfigError("network profile '" + name + "' needs positive throughput and RTT");
    }
}

std::optional<NetworkProfile> builtin_profile(const std::string& name) {
    for (const NetworkProfile& p : builtin_profiles()) {
        if (p.name == name) return p;
    }
    return std::nullopt;
}

std::vector<NetworkProfile> builtin_profiles() {
    return {
        {"sa-east-1", 93e6, 12.0},
        {"us-west-1", 68e6, 182.0},
        {"eu-west-3", 42e6, 213.0},
    };
}

NetworkProfile parse_profile(const std::string& text) {
    std::istringstream is(text);
    std::string name, tput, rtt;
    if (!std::getline(is, name, ',') || !std::getline(is, tput, ',') || !std::getline(is, rtt)) {
        throw ConfigError("profile spec must be name,throughput_bps,rtt_ms: '" + text + "'");
    }
    NetworkProfile p{name, std::stod(tput), std::stod(rtt)};
    p.validate();
    return p;
}

std::vector<NetworkProfile> load_profiles_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open profiles file " + path);
    std::vector<NetworkProfile> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_profile(line));
    }
    if (out.empty()) throw ConfigError("profiles file " + path + " contains no profiles");
    return out;
}

double emulate_transfer_ms(std::size_t payload_bytes, const NetworkProfile& profile) {
    profile.validate();
    return profile.rtt_ms +
           1000.0 * (8.0 * static_cast<double>(payload_bytes)) / profile.throughput_bps;
}

TransferEmulator::TransferEmulator(NetworkProfile profile, RttJitter jitter)
    : profile_(std::move(profile)), jitter_(jitter), rng_(jitter.seed) {
    profile_.validate();
}

double TransferEmulator::delay_ms(std::size_t payload_bytes) {
    double delay = emulate_transfer_ms(payload_bytes, profile_);
    if (jitter_.stddev_ms > 0.0) {
        delay += rng_.normal(0.0, jitter_.stddev_ms);
        if (delay < 0.0) delay = 0.0;
    }
    return delay;
}

double WallClock::now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void WallClock::advance(double ms) {
    if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

} // namespace eeo
