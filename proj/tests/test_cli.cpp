#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <json.hpp>

#include "gpr/prior.hpp"
#include "gpr/rng.hpp"
#include "gpr/store.hpp"
#include "test_util.hpp"

using namespace gpr;

namespace {

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run_cli(const TempDir& tmp, const std::string& args) {
    const std::string out_path = tmp.file("cli.out");
    const std::string err_path = tmp.file("cli.err");
    const std::string cmd =
        std::string(GPR_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

std::string raw_f32_bytes(const std::vector<float>& values) {
    std::string bytes;
    for (float v : values) put_f32(bytes, v);
    return bytes;
}

}  // namespace

TEST_CASE("ingest builds a store from a sidecar manifest") {
    TempDir tmp;
    // one vector file per record, plus one record addressed by offset
    write_file(tmp.file("v1.f32"), raw_f32_bytes({1, 2, 3, 4}));
    write_file(tmp.file("v2.f32"), raw_f32_bytes({5, 6, 7, 8}));
    write_file(tmp.file("block.f32"), raw_f32_bytes({0, 0, 9, 10, 11, 12}));
    write_file(tmp.file("m.tsv"),
               "1, 48.85, 2.35, v1.f32\n"
               "2, 40.71, -74.0, v2.f32\n"
               "3, -33.86, 151.21, block.f32, 8\n");

    const auto r =
        run_cli(tmp, "ingest " + tmp.file("m.tsv") + " " + tmp.file("s.gprstore") +
                         " --dim 4 --tag vpr512");
    REQUIRE(r.exit_code == 0);

    auto store = StoreHandle::open(tmp.file("s.gprstore"));
    REQUIRE(store.size() == 3);
    CHECK(store.header().extractor_tag == "vpr512");
    const auto rec = store.get(3);
    CHECK(rec.vector == std::vector<float>{9, 10, 11, 12});  // offset form
    CHECK(rec.location.lat() == -33.86);
}

TEST_CASE("ingest dimension mismatch exits 2 with a machine-parsable error") {
    TempDir tmp;
    write_file(tmp.file("short.f32"), raw_f32_bytes({1, 2}));
    write_file(tmp.file("m.tsv"), "1, 10, 20, short.f32\n");
    const auto r =
        run_cli(tmp, "ingest " + tmp.file("m.tsv") + " " + tmp.file("s.gprstore") + " --dim 4");
    CHECK(r.exit_code == 2);
    CHECK(r.err.rfind("DimensionMismatch:", 0) == 0);
}

TEST_CASE("ingested 10k-record manifest matches a direct store write checksum") {
    TempDir tmp;
    Rng rng(5150);
    const uint32_t d = 16;
    std::vector<DescriptorRecord> records;
    std::string block;
    std::string manifest;
    for (uint64_t i = 0; i < 10000; ++i) {
        DescriptorRecord r;
        r.id = i + 1;
        r.location = GeoPoint::normalized(rng.uniform(-85, 85), rng.uniform(-180, 180));
        r.vector.resize(d);
        for (auto& v : r.vector) v = float(rng.gaussian());
        manifest += std::to_string(r.id) + "," + format_double(r.location.lat()) + "," +
                    format_double(r.location.lon()) + ",block.f32," +
                    std::to_string(block.size()) + "\n";
        block += raw_f32_bytes(r.vector);
        records.push_back(std::move(r));
    }
    write_file(tmp.file("block.f32"), block);
    write_file(tmp.file("m.csv"), manifest);

    const auto r = run_cli(tmp, "ingest " + tmp.file("m.csv") + " " + tmp.file("cli.gprstore") +
                                    " --dim 16 --tag t");
    REQUIRE(r.exit_code == 0);
    write_store(records, d, tmp.file("direct.gprstore"), "t");

    const auto inspect_cli = run_cli(tmp, "inspect " + tmp.file("cli.gprstore"));
    const auto inspect_direct = run_cli(tmp, "inspect " + tmp.file("direct.gprstore"));
    REQUIRE(inspect_cli.exit_code == 0);
    CHECK(inspect_cli.out == inspect_direct.out);
    CHECK(inspect_cli.out.find("content_checksum") != std::string::npos);
}

TEST_CASE("extract-prior reports the parse-failure count") {
    TempDir tmp;
    write_file(tmp.file("raw.tsv"),
               "1\tAnswer: 48.85, 2.35\n"
               "2\tno idea at all\n"
               "3\tlikely 40.71, -74.0\n");
    const auto r =
        run_cli(tmp, "extract-prior " + tmp.file("raw.tsv") + " " + tmp.file("p.tsv"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.err.find("parse_failures=1") != std::string::npos);

    auto provider = FilePriorProvider::load(tmp.file("p.tsv"));
    CHECK(provider->get_prior(1).status == PriorStatus::Parsed);
    CHECK(provider->get_prior(2).status == PriorStatus::FallbackUnavailable);
    CHECK(provider->get_prior(3).status == PriorStatus::Parsed);
}

TEST_CASE("config file values apply and command-line flags win") {
    TempDir tmp;
    write_file(tmp.file("cfg.ini"),
               "config_version=1\n\n[synth]\nn-ref=64\nn-query=8\ndim=4\nquery-noise=0\n");

    const auto from_config = run_cli(tmp, "synth " + tmp.file("ds1") + " --config " +
                                              tmp.file("cfg.ini"));
    REQUIRE(from_config.exit_code == 0);
    const auto m1 = nlohmann::json::parse(read_file(tmp.file("ds1") + "/manifest.json"));
    CHECK(m1.at("resolved").at("n_reference") == "64");
    CHECK(m1.at("config_file") == tmp.file("cfg.ini"));

    const auto overridden = run_cli(tmp, "synth " + tmp.file("ds2") + " --config " +
                                             tmp.file("cfg.ini") + " --n-ref 128");
    REQUIRE(overridden.exit_code == 0);
    const auto m2 = nlohmann::json::parse(read_file(tmp.file("ds2") + "/manifest.json"));
    CHECK(m2.at("resolved").at("n_reference") == "128");  // flag beats config

    auto store = StoreHandle::open(tmp.file("ds2") + "/store.gprstore");
    CHECK(store.size() == 128);
}

TEST_CASE("index command writes openable per-submap caches") {
    TempDir tmp;
    REQUIRE(run_cli(tmp, "synth " + tmp.file("ds") + " --n-ref 60 --n-query 5 --dim 4")
                .exit_code == 0);
    REQUIRE(run_cli(tmp, "partition " + tmp.file("ds") + "/store.gprstore " + tmp.file("ds") +
                             "/p.gprpart --strategy cluster --k 4 --seed 2")
                .exit_code == 0);
    REQUIRE(run_cli(tmp, "index " + tmp.file("ds") + "/store.gprstore " + tmp.file("ds") +
                             "/p.gprpart " + tmp.file("cache"))
                .exit_code == 0);

    size_t total = 0;
    for (uint32_t sub = 0; sub < 4; ++sub) {
        auto cache = StoreHandle::open(tmp.file("cache") + "/submap_" + std::to_string(sub) +
                                       ".gprstore");
        total += size_t(cache.size());
        CHECK(cache.dimension() == 4);
    }
    CHECK(total == 60);
    const auto listing = read_file(tmp.file("cache") + "/index_manifest.tsv");
    CHECK(std::count(listing.begin(), listing.end(), '\n') == 5);  // header + 4 submaps
}

TEST_CASE("localize exits 3 when the remote provider is exhausted") {
    TempDir tmp;
    REQUIRE(run_cli(tmp, "synth " + tmp.file("ds") + " --n-ref 30 --n-query 2 --dim 4")
                .exit_code == 0);
    write_file(tmp.file("tpl.txt"), "where?");
    std::filesystem::create_directories(tmp.file("imgs"));
    write_file(tmp.file("imgs") + "/1.jpg", "xx");
    write_file(tmp.file("imgs") + "/2.jpg", "yy");

    const auto r = run_cli(
        tmp, "localize " + tmp.file("ds") + "/store.gprstore " + tmp.file("ds") +
                 "/queries.gprstore " + tmp.file("out.jsonl") +
                 " --strategy none --remote-url http://127.0.0.1:1/v1/chat/completions "
                 "--model m --prompt-template " + tmp.file("tpl.txt") +
                 " --images-dir " + tmp.file("imgs") +
                 " --remote-retries 0 --remote-timeout 0.3");
    CHECK(r.exit_code == 3);

    // the results were still written; every query degraded to global search
    const auto lines = read_file(tmp.file("out.jsonl"));
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 2);
    CHECK(lines.find("PriorUnavailable-GlobalSearch") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
    TempDir tmp;
    CHECK(run_cli(tmp, "no-such-command").exit_code == 1);
    CHECK(run_cli(tmp, "partition").exit_code == 1);  // missing required args
    CHECK(run_cli(tmp, "--version").exit_code == 0);
}

TEST_CASE("inspect classifies prior tables") {
    TempDir tmp;
    write_file(tmp.file("p.tsv"), "1, 10.0, 20.0\n2\tcannot say\n");
    const auto r = run_cli(tmp, "inspect " + tmp.file("p.tsv"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("type: prior-table") != std::string::npos);
    CHECK(r.out.find("entries: 2") != std::string::npos);
    CHECK(r.out.find("parse_failures: 1") != std::string::npos);
}
