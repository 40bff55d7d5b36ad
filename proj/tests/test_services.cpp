#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <httplib.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "eeo/checkpoint.hpp"
#include "eeo/errors.hpp"
#include "eeo/http_service.hpp"
#include "eeo/rng.hpp"
#include "eeo/services.hpp"

using namespace eeo;

namespace {

EarlyExitModel tiny_model(std::uint64_t seed = 3) {
    const std::vector<LayerSpec> specs{
        LayerSpec::conv2d(3, 4, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(4, 6, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(6, 8, 3, 1, 1), LayerSpec::relu(),
    };
    EarlyExitModel m = EarlyExitModel::build(specs, {3, 16, 16}, 4, 3, seed);
    m.add_expert_set(DistortionKind::Blur);
    m.add_expert_set(DistortionKind::Noise);
    return m;
}

ImageU8 random_image(Rng& rng, int size = 16) {
    ImageU8 img(size, size, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_below(256));
    return img;
}

EdgeConfig edge_config(const std::string& id, float p_tar, bool expert = false) {
    EdgeConfig cfg;
    cfg.model_id = id;
    cfg.p_tar = p_tar;
    cfg.use_classifier = expert;
    cfg.profile = *builtin_profile("sa-east-1");
    return cfg;
}

} // namespace

TEST_CASE("split equality: distributed result is bit-identical to single-process") {
    const EarlyExitModel model = tiny_model();
    const CloudService cloud(model, "m1");
    LoopbackTransport transport(&cloud);
    VirtualClock clock;
    EdgeService edge(model, std::nullopt, edge_config("m1", 0.45f), &transport, &clock);

    Rng rng(11);
    int offloaded = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const ImageU8 img = random_image(rng);
        const DistortionKind kind = static_cast<DistortionKind>(rng.uniform_below(3));
        const InferenceResult want = full_forward(model, kind, preprocess_image(img), 0.45f);
        const EdgeService::Outcome got = edge.handle_with_kind(img, kind);
        CHECK(got.result == want);
        if (want.offloaded) ++offloaded;
    }
    CHECK(offloaded > 0);              // the sweep exercised the wire
    CHECK(offloaded < 300);            // and the on-device path
    CHECK(transport.calls() == offloaded);
}

TEST_CASE("on-device inferences never touch the transport") {
    const EarlyExitModel model = tiny_model();
    const CloudService cloud(model, "m1");
    LoopbackTransport transport(&cloud);
    VirtualClock clock;
    EdgeService edge(model, std::nullopt, edge_config("m1", 0.0f), &transport, &clock);

    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const EdgeService::Outcome out = edge.handle_with_kind(random_image(rng), DistortionKind::Pristine);
        CHECK_FALSE(out.result.offloaded);
        CHECK(out.latency.emulated_network_ms == 0.0);
        CHECK(out.latency.serialize_ms == 0.0);
        CHECK(out.latency.cloud_compute_ms == 0.0);
    }
    CHECK(transport.calls() == 0);
}

TEST_CASE("latency breakdown is additive and forced offloads pay the transfer delay") {
    const EarlyExitModel model = tiny_model();
    const CloudService cloud(model, "m1");
    LoopbackTransport transport(&cloud);
    VirtualClock clock;
    EdgeService edge(model, std::nullopt, edge_config("m1", 1.0f), &transport, &clock);

    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const EdgeService::Outcome out = edge.handle_with_kind(random_image(rng), DistortionKind::Pristine);
        CHECK(out.result.offloaded);
        const double sum = out.latency.classifier_ms + out.latency.edge_compute_ms +
                           out.latency.serialize_ms + out.latency.emulated_network_ms +
                           out.latency.cloud_compute_ms;
        CHECK(std::abs(out.latency.total_ms - sum) < 0.01);
        CHECK(out.latency.emulated_network_ms >= builtin_profile("sa-east-1")->rtt_ms);
        CHECK(out.latency.total_ms >= out.latency.emulated_network_ms);
    }
    // The virtual clock advanced by the total latency of all runs.
    CHECK(clock.now_ms() > 0.0);
}

TEST_CASE("same profile difference shows up as pure transfer-delay difference") {
    const EarlyExitModel model = tiny_model();
    const CloudService cloud(model, "m1");
    Rng rng(19);
    const ImageU8 img = random_image(rng);

    auto run_with = [&](const char* profile) {
        LoopbackTransport transport(&cloud);
        VirtualClock clock;
        EdgeConfig cfg = edge_config("m1", 1.0f);
        cfg.profile = *builtin_profile(profile);
        EdgeService edge(model, std::nullopt, cfg, &transport, &clock);
        return edge.handle_with_kind(img, DistortionKind::Pristine).latency;
    };
    const LatencyBreakdown sa = run_with("sa-east-1");
    const LatencyBreakdown eu = run_with("eu-west-3");
    const double delay_diff = eu.emulated_network_ms - sa.emulated_network_ms;
    CHECK(delay_diff > 0.0);
    CHECK(eu.total_ms - sa.total_ms == doctest::Approx(delay_diff).epsilon(1e-9));
}

TEST_CASE("distributed trace is reproducible under the virtual clock") {
    const EarlyExitModel model = tiny_model();
    const CloudService cloud(model, "m1");
    auto run = [&]() {
        LoopbackTransport transport(&cloud);
        VirtualClock clock;
        EdgeConfig cfg = edge_config("m1", 0.8f);
        cfg.jitter = {2.0, 99};
        EdgeService edge(model, std::nullopt, cfg, &transport, &clock);
        Rng rng(23);
        std::vector<std::pair<InferenceResult, double>> trace;
        for (int i = 0; i < 40; ++i) {
            const auto out = edge.handle_with_kind(random_image(rng), DistortionKind::Noise);
            trace.emplace_back(out.result, out.latency.total_ms);
        }
        return trace;
    };
    CHECK(run() == run());
}

TEST_CASE("cloud rejects mismatched model ids and malformed payloads") {
    const EarlyExitModel model = tiny_model();
    const CloudService cloud(model, "m1");

    OffloadRequest req;
    req.model_id = "other-model";
    req.kind = DistortionKind::Pristine;
    req.partition_point = model.partition_point();
    req.payload = Tensor(model.tap_shape(model.exit_points().back().index));
    req.p_tar = 0.8f;
    const auto reply1 = cloud.handle_frame(encode_request(req));
    CHECK(peek_message_type(reply1) == WireMessage::Error);
    CHECK_THROWS_AS(decode_response_or_throw(reply1), TransportError);

    req.model_id = "m1";
    req.payload = Tensor({1, 2, 2, 2});  // wrong partition shape
    const auto reply2 = cloud.handle_frame(encode_request(req));
    CHECK(peek_message_type(reply2) == WireMessage::Error);

    // Garbage bytes produce an error frame, not a crash.
    const std::vector<std::uint8_t> garbage{1, 2, 3, 4, 5};
    CHECK(peek_message_type(cloud.handle_frame(garbage)) == WireMessage::Error);
}

TEST_CASE("split equality holds across real HTTP") {
    const EarlyExitModel model = tiny_model(7);
    const CloudService cloud(model, "m-http");
    CloudHttpServer server(cloud);
    const int port = server.start("127.0.0.1");
    REQUIRE(port > 0);

    HttpTransport transport("127.0.0.1", port);
    VirtualClock clock;
    EdgeService edge(model, std::nullopt, edge_config("m-http", 0.9f), &transport, &clock);

    Rng rng(29);
    int offloaded = 0;
    for (int i = 0; i < 25; ++i) {
        const ImageU8 img = random_image(rng);
        const InferenceResult want = full_forward(model, DistortionKind::Blur,
                                                  preprocess_image(img), 0.9f);
        const auto got = edge.handle_with_kind(img, DistortionKind::Blur);
        CHECK(got.result == want);
        if (want.offloaded) ++offloaded;
    }
    CHECK(offloaded > 0);
    server.stop();
}

TEST_CASE("edge HTTP endpoint answers with a JSON result") {
    const EarlyExitModel model = tiny_model(9);
    const CloudService cloud(model, "m-edge");
    LoopbackTransport transport(&cloud);
    VirtualClock clock;
    EdgeService edge(model, std::nullopt, edge_config("m-edge", 0.5f), &transport, &clock);

    EdgeHttpServer server(edge);
    const int port = server.start("127.0.0.1");
    REQUIRE(port > 0);

    Rng rng(31);
    const auto ppm = encode_ppm(random_image(rng));
    httplib::Client client("127.0.0.1", port);
    const auto res = client.Post("/v1/infer", std::string(ppm.begin(), ppm.end()), "image/x-portable-pixmap");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto doc = nlohmann::json::parse(res->body);
    CHECK(doc.contains("predicted_class"));
    CHECK(doc.contains("latency_ms"));
    CHECK(doc["latency_ms"].contains("total"));
    CHECK(doc["kind"] == "pristine");

    const auto bad = client.Post("/v1/infer", std::string("not an image"), "text/plain");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    server.stop();
}
