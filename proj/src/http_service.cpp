#include "eeo/http_service.hpp"

#include <httplib.h>

#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "eeo/errors.hpp"

namespace eeo {

namespace {

std::string to_body(const std::vector<std::uint8_t>& bytes) {
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::vector<std::uint8_t> from_body(const std::string& body) {
    return std::vector<std::uint8_t>(body.begin(), body.end());
}

} // namespace

struct HttpTransport::Impl {
    httplib::Client client;
    Impl(const std::string& host, int port) : client(host, port) {
        client.set_read_timeout(60, 0);
        client.set_connection_timeout(10, 0);
    }
};

HttpTransport::HttpTransport(const std::string& host, int port)
    : impl_(std::make_unique<Impl>(host, port)) {}

HttpTransport::~HttpTransport() = default;

std::vector<std::uint8_t> HttpTransport::do_roundtrip(std::span<const std::uint8_t> frame) {
    auto res = impl_->client.Post("/v1/infer-tail",
                                  reinterpret_cast<const char*>(frame.data()), frame.size(),
                                  "application/octet-stream");
    if (!res) {
        throw TransportError("cloud unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError("cloud returned HTTP " + std::to_string(res->status));
    }
    return from_body(res->body);
}

struct CloudHttpServer::Impl {
    const CloudService& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(const CloudService& svc) : service(svc) {
        server.Post("/v1/infer-tail", [this](const httplib::Request& req, httplib::Response& res) {
            const auto reply = service.handle_frame(from_body(req.body));
            res.set_content(to_body(reply), "application/octet-stream");
        });
    }
};

CloudHttpServer::CloudHttpServer(const CloudService& service)
    : impl_(std::make_unique<Impl>(service)) {}

CloudHttpServer::~CloudHttpServer() { stop(); }

int CloudHttpServer::start(const std::string& host) {
    const int port = impl_->server.bind_to_any_port(host);
    if (port <= 0) throw TransportError("cloud server failed to bind on " + host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void CloudHttpServer::listen_blocking(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw TransportError("cloud server failed to listen on " + host + ":" + std::to_string(port));
    }
}

void CloudHttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

struct EdgeHttpServer::Impl {
    EdgeService& edge;
    std::mutex mutex;  // EdgeService streams latency through one clock
    httplib::Server server;
    std::thread thread;

    explicit Impl(EdgeService& svc) : edge(svc) {
        server.Post("/v1/infer", [this](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json doc;
            try {
                const ImageU8 image = decode_image(from_body(req.body));
                EdgeService::Outcome out;
                {
                    const std::lock_guard<std::mutex> lock(mutex);
                    out = edge.handle(image);
                }
                doc["predicted_class"] = out.result.predicted_class;
                doc["confidence"] = out.result.confidence;
                doc["exit"] = exit_slot_name(out.result.exit_slot);
                doc["exit_taken"] = exit_taken_name(out.result.exit_taken);
                doc["offloaded"] = out.result.offloaded;
                doc["kind"] = distortion_kind_name(out.kind_used);
                doc["latency_ms"] = {
                    {"classifier", out.latency.classifier_ms},
                    {"edge_compute", out.latency.edge_compute_ms},
                    {"serialize", out.latency.serialize_ms},
                    {"emulated_network", out.latency.emulated_network_ms},
                    {"cloud_compute", out.latency.cloud_compute_ms},
                    {"total", out.latency.total_ms},
                };
                res.set_content(doc.dump(2), "application/json");
            } catch (const Error& e) {
                doc["error"] = e.what();
                res.status = 400;
                res.set_content(doc.dump(2), "application/json");
            }
        });
    }
};

EdgeHttpServer::EdgeHttpServer(EdgeService& edge) : impl_(std::make_unique<Impl>(edge)) {}

EdgeHttpServer::~EdgeHttpServer() { stop(); }

int EdgeHttpServer::start(const std::string& host) {
    const int port = impl_->server.bind_to_any_port(host);
    if (port <= 0) throw TransportError("edge server failed to bind on " + host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void EdgeHttpServer::listen_blocking(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw TransportError("edge server failed to listen on " + host + ":" + std::to_string(port));
    }
}

void EdgeHttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace eeo
