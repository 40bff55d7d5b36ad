#pragma once

#include <memory>
#include <string>

#include "eeo/services.hpp"

namespace eeo {

/// Offload frames wrapped in HTTP/1.1 POST bodies against /v1/infer-tail.
class HttpTransport final : public Transport {
public:
    HttpTransport(const std::string& host, int port);
    ~HttpTransport() override;

private:
    std::vector<std::uint8_t> do_roundtrip(std::span<const std::uint8_t> frame) override;

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Cloud endpoint: POST /v1/infer-tail with a request frame body returns a
/// response (or error) frame.
class CloudHttpServer {
public:
    explicit CloudHttpServer(const CloudService& service);
    ~CloudHttpServer();

    /// Binds an ephemeral port and serves from a background thread.
    int start(const std::string& host);
    /// Serves on a fixed port; blocks until stop().
    void listen_blocking(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Edge endpoint: POST /v1/infer with a PNG or binary-PPM body returns a
/// JSON document with the inference result and the latency breakdown.
class EdgeHttpServer {
public:
    explicit EdgeHttpServer(EdgeService& edge);
    ~EdgeHttpServer();

    int start(const std::string& host);
    void listen_blocking(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace eeo
