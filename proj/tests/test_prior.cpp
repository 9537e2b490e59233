#include <catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include "gpr/prior.hpp"
#include "gpr/remote_prior.hpp"
#include "test_util.hpp"

using namespace gpr;

namespace {

Errc thrown_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a gpr::Error");
    return Errc::IoFailure;
}

// one-shot local mock endpoint
class MockServer {
public:
    explicit MockServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

RemotePriorConfig remote_config(const std::string& url, const std::string& template_path) {
    RemotePriorConfig cfg;
    cfg.url = url;
    cfg.model = "mock-vlm";
    cfg.prompt_template_path = template_path;
    cfg.timeout_s = 5.0;
    cfg.retries = 1;
    cfg.initial_backoff_ms = 10;
    return cfg;
}

const std::vector<unsigned char> kImage = {0xff, 0xd8, 0x00, 0x42};

}  // namespace

TEST_CASE("extract_coordinates takes the last pair that normalizes") {
    SECTION("single clean pair") {
        const auto est = extract_coordinates("... final answer: 48.8566, 2.3522");
        REQUIRE(est.status == PriorStatus::Parsed);
        CHECK(est.location->lat() == 48.8566);
        CHECK(est.location->lon() == 2.3522);
    }
    SECTION("years and counts before the answer are skipped") {
        const auto est =
            extract_coordinates("city founded in 1850 ... coordinates 40.71, -74.00");
        REQUIRE(est.status == PriorStatus::Parsed);
        CHECK(est.location->lat() == 40.71);
        CHECK(est.location->lon() == -74.00);
    }
    SECTION("no numeric tokens") {
        const auto est = extract_coordinates("I cannot determine the location.");
        CHECK(est.status == PriorStatus::FallbackUnavailable);
        CHECK_FALSE(est.location.has_value());
    }
    SECTION("an invalid final pair falls back to the overlapping earlier pair") {
        // tokens 40.0, 95.0, 10.0: (95, 10) has lat out of range, (40, 95) works
        const auto est = extract_coordinates("maybe 40.0, then 95.0, 10.0");
        REQUIRE(est.status == PriorStatus::Parsed);
        CHECK(est.location->lat() == 40.0);
        CHECK(est.location->lon() == 95.0);
    }
    SECTION("integers match unsigned: the minus on a bare integer is dropped") {
        const auto est = extract_coordinates("Answer: -33, 151");
        REQUIRE(est.status == PriorStatus::Parsed);
        CHECK(est.location->lat() == 33.0);  // pattern [-+]?\d*\.\d+|\d+ has no signed-int branch
        CHECK(est.location->lon() == 151.0);
    }
    SECTION("signed decimals keep their sign") {
        const auto est = extract_coordinates("lat -33.86 lon +151.21");
        REQUIRE(est.status == PriorStatus::Parsed);
        CHECK(est.location->lat() == -33.86);
        CHECK(est.location->lon() == 151.21);
    }
    SECTION("bare fractions parse") {
        const auto est = extract_coordinates("it is at .5, .25 roughly");
        REQUIRE(est.status == PriorStatus::Parsed);
        CHECK(est.location->lat() == 0.5);
        CHECK(est.location->lon() == 0.25);
    }
    SECTION("longitude is wrapped") {
        const auto est = extract_coordinates("45.0, 200.0");
        REQUIRE(est.status == PriorStatus::Parsed);
        CHECK(est.location->lat() == 45.0);
        CHECK(est.location->lon() == -160.0);
    }
    SECTION("out-of-range-only pairs are unavailable") {
        const auto est = extract_coordinates("95.5, 100.0");
        CHECK(est.status == PriorStatus::FallbackUnavailable);
    }
    SECTION("pure function of the text") {
        const std::string text = "somewhere near 12.5, 7.25 in 2019";
        const auto a = extract_coordinates(text);
        const auto b = extract_coordinates(text);
        REQUIRE(a.status == b.status);
        CHECK(a.location->lat() == b.location->lat());
        CHECK(a.location->lon() == b.location->lon());
    }
}

TEST_CASE("file prior provider looks up pre-parsed coordinates") {
    TempDir tmp;
    write_file(tmp.file("p.tsv"), "17, 48.8566, 2.3522\n21, -33.86, 151.21, seen near the opera\n");
    auto provider = FilePriorProvider::load(tmp.file("p.tsv"));

    const auto est = provider->get_prior(17);
    REQUIRE(est.status == PriorStatus::Parsed);
    CHECK(est.location->lat() == 48.8566);
    CHECK(est.location->lon() == 2.3522);

    // missing id degrades, it does not throw
    const auto missing = provider->get_prior(18);
    CHECK(missing.status == PriorStatus::FallbackUnavailable);

    // no network, no image bytes: file priors resolve entirely locally
    const auto hermetic = provider->get_prior(21, {});
    REQUIRE(hermetic.status == PriorStatus::Parsed);
    CHECK(hermetic.location->lat() == -33.86);
}

TEST_CASE("file prior provider accepts raw-responses lines") {
    TempDir tmp;
    write_file(tmp.file("raw.tsv"),
               "1\tAnswer: -33.86, 151.21\n"
               "2\tI cannot tell.\n"
               "3, 95.0, 10.0\n");  // invalid as structured, falls through to extraction
    PriorFileStats stats;
    auto provider = FilePriorProvider::load(tmp.file("raw.tsv"), &stats);
    CHECK(stats.entries == 3);
    CHECK(stats.parse_failures == 2);  // ids 2 and 3

    const auto est = provider->get_prior(1);
    REQUIRE(est.status == PriorStatus::Parsed);
    CHECK(est.location->lat() == -33.86);
    CHECK(est.location->lon() == 151.21);
    CHECK(provider->get_prior(2).status == PriorStatus::FallbackUnavailable);
    CHECK(provider->get_prior(3).status == PriorStatus::FallbackUnavailable);
}

TEST_CASE("file prior provider rejects id-less lines") {
    TempDir tmp;
    write_file(tmp.file("bad.tsv"), "not-an-id, 48.85, 2.35\n");
    CHECK(thrown_code([&] { FilePriorProvider::load(tmp.file("bad.tsv")); }) == Errc::ParseError);
}

TEST_CASE("prior file writer round-trips through the loader") {
    TempDir tmp;
    std::map<uint64_t, PriorEstimate> table;
    table[5] = PriorEstimate::parsed(GeoPoint::normalized(48.8566, 2.3522), "", "t");
    table[9] = PriorEstimate::parsed(GeoPoint::normalized(-33.8688, 151.2093), "", "t");
    table[12] = PriorEstimate::unavailable("nope", "t");
    write_prior_file(table, tmp.file("out.tsv"));

    auto provider = FilePriorProvider::load(tmp.file("out.tsv"));
    CHECK(provider->get_prior(5).location->lat() == 48.8566);
    CHECK(provider->get_prior(9).location->lon() == 151.2093);
    CHECK(provider->get_prior(12).status == PriorStatus::FallbackUnavailable);  // omitted
}

TEST_CASE("raw responses loader is strict") {
    TempDir tmp;
    write_file(tmp.file("r.tsv"), "4\tsome text with 1.5, 2.5\n");
    const auto rows = load_raw_responses(tmp.file("r.tsv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].first == 4);
    CHECK(rows[0].second == "some text with 1.5, 2.5");

    write_file(tmp.file("bad.tsv"), "no tab here\n");
    CHECK(thrown_code([&] { load_raw_responses(tmp.file("bad.tsv")); }) == Errc::ParseError);
}

TEST_CASE("remote provider parses a chat-completion response") {
    TempDir tmp;
    write_file(tmp.file("tpl.txt"), "Where was this photo taken?");
    std::atomic<int> calls{0};
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        const auto body = nlohmann::json::parse(req.body);
        CHECK(body.at("model") == "mock-vlm");
        CHECK(body.at("temperature") == 0);
        const auto& content = body.at("messages").at(0).at("content");
        CHECK(content.at(0).at("text") == "Where was this photo taken?");
        const std::string data_url = content.at(1).at("image_url").at("url");
        CHECK(data_url.rfind("data:image/jpeg;base64,", 0) == 0);
        nlohmann::json reply = {
            {"choices",
             {{{"message", {{"role", "assistant"}, {"content", "Answer: -33.86, 151.21"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });

    RemotePriorProvider provider(remote_config(server.url(), tmp.file("tpl.txt")));
    const auto est = provider.get_prior(7, kImage);
    REQUIRE(est.status == PriorStatus::Parsed);
    CHECK(est.location->lat() == -33.86);
    CHECK(est.location->lon() == 151.21);
    CHECK(est.provider_tag == "remote:mock-vlm");
    CHECK(calls == 1);
    CHECK(provider.transport_exhaustions() == 0);
}

TEST_CASE("remote provider accepts plain-text bodies") {
    TempDir tmp;
    write_file(tmp.file("tpl.txt"), "prompt");
    MockServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content("The location is 40.71, -74.00.", "text/plain");
    });
    RemotePriorProvider provider(remote_config(server.url(), tmp.file("tpl.txt")));
    const auto est = provider.get_prior(1, kImage);
    REQUIRE(est.status == PriorStatus::Parsed);
    CHECK(est.location->lat() == 40.71);
}

TEST_CASE("remote provider sends the bearer token from the environment") {
    TempDir tmp;
    write_file(tmp.file("tpl.txt"), "prompt");
    ::setenv("GPR_TEST_TOKEN", "sk-secret", 1);
    std::string seen_auth;
    MockServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content("0.0, 0.0", "text/plain");
    });
    auto cfg = remote_config(server.url(), tmp.file("tpl.txt"));
    cfg.auth_env = "GPR_TEST_TOKEN";
    RemotePriorProvider provider(cfg);
    provider.get_prior(1, kImage);
    CHECK(seen_auth == "Bearer sk-secret");

    ::unsetenv("GPR_TEST_TOKEN");
    CHECK(thrown_code([&] { RemotePriorProvider p(cfg); }) == Errc::ConfigError);
}

TEST_CASE("remote provider retries then degrades on server errors") {
    TempDir tmp;
    write_file(tmp.file("tpl.txt"), "prompt");
    std::atomic<int> calls{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    auto cfg = remote_config(server.url(), tmp.file("tpl.txt"));
    cfg.retries = 2;
    RemotePriorProvider provider(cfg);
    const auto est = provider.get_prior(1, kImage);
    CHECK(est.status == PriorStatus::FallbackUnavailable);
    CHECK(calls == 3);  // first attempt + 2 retries
    CHECK(provider.transport_exhaustions() == 1);
}

TEST_CASE("remote provider degrades when the endpoint is unreachable") {
    TempDir tmp;
    write_file(tmp.file("tpl.txt"), "prompt");
    auto cfg = remote_config("http://127.0.0.1:1/v1/chat/completions", tmp.file("tpl.txt"));
    cfg.retries = 0;
    cfg.timeout_s = 0.5;
    RemotePriorProvider provider(cfg);
    const auto est = provider.get_prior(1, kImage);
    CHECK(est.status == PriorStatus::FallbackUnavailable);
    CHECK(provider.transport_exhaustions() == 1);
}

TEST_CASE("remote provider validates its configuration") {
    TempDir tmp;
    write_file(tmp.file("tpl.txt"), "prompt");
    auto cfg = remote_config("no-scheme-url", tmp.file("tpl.txt"));
    CHECK(thrown_code([&] { RemotePriorProvider p(cfg); }) == Errc::ConfigError);

    auto ok = remote_config("http://127.0.0.1:1/x", tmp.file("tpl.txt"));
    RemotePriorProvider provider(ok);
    CHECK(thrown_code([&] { provider.get_prior(1, {}); }) == Errc::ConfigError);  // image required
}

TEST_CASE("base64 encoder padding") {
    using gpr::detail::base64_encode;
    const std::vector<unsigned char> one = {'M'};
    const std::vector<unsigned char> two = {'M', 'a'};
    const std::vector<unsigned char> three = {'M', 'a', 'n'};
    CHECK(base64_encode(one) == "TQ==");
    CHECK(base64_encode(two) == "TWE=");
    CHECK(base64_encode(three) == "TWFu");
}
