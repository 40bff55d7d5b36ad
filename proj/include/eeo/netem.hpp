#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eeo/rng.hpp"

namespace eeo {

/// Named (throughput, RTT) pair driving the transfer-delay emulator.
struct NetworkProfile {
    std::string name;
    double throughput_bps = 0.0;
    double rtt_ms = 0.0;

    void validate() const;
};

/// Presets measured between the paper's edge site and three cloud regions.
std::optional<NetworkProfile> builtin_profile(const std::string& name);
std::vector<NetworkProfile> builtin_profiles();

/// Parses "name,throughput_bps,rtt_ms" or a key=value profile file line set.
NetworkProfile parse_profile(const std::string& text);
std::vector<NetworkProfile> load_profiles_file(const std::string& path);

/// rtt_ms + 1000 * (8 * payload_bytes) / throughput_bps. The request carries
/// the payload; the response is assumed small and covered by the RTT term.
double emulate_transfer_ms(std::size_t payload_bytes, const NetworkProfile& profile);

/// Optional seeded Gaussian jitter on the RTT term.
struct RttJitter {
    double stddev_ms = 0.0;
    std::uint64_t seed = 0;
};

/// Stateful delay source: deterministic formula plus optional jitter stream.
class TransferEmulator {
public:
    explicit TransferEmulator(NetworkProfile profile, RttJitter jitter = {});
    double delay_ms(std::size_t payload_bytes);
    const NetworkProfile& profile() const { return profile_; }

private:
    NetworkProfile profile_;
    RttJitter jitter_;
    Rng rng_;
};

/// Millisecond clock the runtime charges latency against. The virtual clock
/// makes distributed traces deterministic; the wall clock is for demo runs.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_ms() = 0;
    virtual void advance(double ms) = 0;  // virtual: jump; wall: sleep
    virtual bool is_virtual() const = 0;
};

class VirtualClock final : public Clock {
public:
    double now_ms() override { return t_ms_; }
    void advance(double ms) override { t_ms_ += ms; }
    bool is_virtual() const override { return true; }

private:
    double t_ms_ = 0.0;
};

class WallClock final : public Clock {
public:
    double now_ms() override;
    void advance(double ms) override;
    bool is_virtual() const override { return false; }
};

/// Deterministic compute-cost model used under the virtual clock: elapsed
/// time is executed MACs (or serialized bytes) divided by a rate.
struct ComputeCostModel {
    double edge_macs_per_ms = 2.0e6;
    double cloud_macs_per_ms = 2.0e7;
    double serialize_bytes_per_ms = 5.0e6;

    double edge_ms(std::size_t macs) const { return static_cast<double>(macs) / edge_macs_per_ms; }
    double cloud_ms(std::size_t macs) const { return static_cast<double>(macs) / cloud_macs_per_ms; }
    double serialize_ms(std::size_t bytes) const {
        return static_cast<double>(bytes) / serialize_bytes_per_ms;
    }
};

} // namespace eeo
