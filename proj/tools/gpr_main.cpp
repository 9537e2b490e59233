// gpr: geo-constrained vector retrieval engine and evaluation harness.
//
// Subcommands: ingest, partition, index, extract-prior, localize, evaluate,
// synth, sweep, inspect. Exit codes: 0 success, 1 usage, 2 data error,
// 3 remote-provider exhaustion. Data goes to files/stdout; stage timings and
// fallback counts go to stderr.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "gpr/eval.hpp"
#include "gpr/index.hpp"
#include "gpr/partition.hpp"
#include "gpr/pipeline.hpp"
#include "gpr/prior.hpp"
#include "gpr/remote_prior.hpp"
#include "gpr/run_manifest.hpp"
#include "gpr/store.hpp"
#include "gpr/synthetic.hpp"
#include "gpr/version.hpp"

namespace fs = std::filesystem;
using namespace gpr;

namespace {

constexpr int EXIT_OK = 0;
constexpr int EXIT_USAGE = 1;
constexpr int EXIT_DATA = 2;
constexpr int EXIT_REMOTE = 3;

struct CommonOpts {
    uint64_t seed = 1;
    unsigned threads = 0;  // 0 = all cores
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->fallthrough();  // lets --config / --config-version follow the subcommand
    cmd->add_option("--seed", opts.seed, "RNG seed; echoed in the run manifest")
        ->capture_default_str();
    cmd->add_option("--threads", opts.threads, "worker cap, 0 = available cores")
        ->capture_default_str();
}

class Stage {
public:
    Stage(RunManifest& manifest, std::string name)
        : manifest_(manifest), name_(std::move(name)),
          start_(std::chrono::steady_clock::now()) {}
    ~Stage() {
        // a failing stage reports through the error path, not a timing line
        if (std::uncaught_exceptions() > uncaught_) return;
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start_)
                              .count();
        manifest_.add_timing(name_, ms);
        std::fprintf(stderr, "[gpr] stage=%s ms=%.1f\n", name_.c_str(), ms);
    }

private:
    RunManifest& manifest_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
    int uncaught_ = std::uncaught_exceptions();
};

void finish_manifest(RunManifest& manifest, const CommonOpts& opts, const CLI::App& app,
                     const std::string& path) {
    manifest.seed = opts.seed;
    manifest.threads = opts.threads;
    const auto* config_opt = app.get_config_ptr();
    manifest.config_file = config_opt != nullptr && config_opt->count() > 0
                               ? config_opt->as<std::string>()
                               : "";
    manifest.save(path);
}

// ---- ingest -------------------------------------------------------------------

// Sidecar manifest, one record per line (comma or tab):
//   id, lat, lon, vector-file [, byte-offset]
// The vector file holds d raw little-endian f32s at the given offset;
// relative paths resolve against the manifest's directory.
std::vector<DescriptorRecord> read_ingest_manifest(const std::string& path, uint32_t dim) {
    const fs::path base = fs::path(path).parent_path();
    std::vector<DescriptorRecord> records;
    const std::string data = read_file(path);
    size_t line_no = 0;
    for (std::string_view line : split(data, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const char delim = line.find('\t') != std::string_view::npos ? '\t' : ',';
        const auto fields = split(line, delim);
        if (fields.size() < 4) {
            raise(Errc::ParseError, path + ":" + std::to_string(line_no) +
                                        ": expected id, lat, lon, vector-file[, offset]");
        }
        auto id = parse_u64(fields[0]);
        auto lat = parse_double(fields[1]);
        auto lon = parse_double(fields[2]);
        if (!id || !lat || !lon) {
            raise(Errc::ParseError, path + ":" + std::to_string(line_no) + ": bad record");
        }
        uint64_t offset = 0;
        if (fields.size() >= 5) {
            auto off = parse_u64(fields[4]);
            if (!off) {
                raise(Errc::ParseError,
                      path + ":" + std::to_string(line_no) + ": bad byte offset");
            }
            offset = *off;
        }
        fs::path vector_path{std::string(trim(fields[3]))};
        if (vector_path.is_relative()) vector_path = base / vector_path;

        std::ifstream in(vector_path, std::ios::binary);
        if (!in) raise(Errc::IoFailure, "cannot open vector file " + vector_path.string());
        in.seekg(std::streamoff(offset));
        std::string buf(size_t(dim) * 4, '\0');
        in.read(buf.data(), std::streamsize(buf.size()));
        if (size_t(in.gcount()) != buf.size()) {
            raise(Errc::DimensionMismatch,
                  vector_path.string() + ": fewer than " + std::to_string(dim) +
                      " f32 values at offset " + std::to_string(offset));
        }
        std::vector<float> vec(dim);
        for (uint32_t j = 0; j < dim; ++j) {
            vec[j] = get_f32(reinterpret_cast<const unsigned char*>(buf.data()) + size_t(j) * 4);
        }
        records.push_back({*id, std::move(vec), GeoPoint::normalized(*lat, *lon), ""});
    }
    return records;
}

int cmd_ingest(const CLI::App& app, const std::string& manifest_path, const std::string& out,
               uint32_t dim, const std::string& tag, const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "ingest";
    manifest.inputs["manifest"] = manifest_path;
    manifest.outputs["store"] = out;
    manifest.resolved["dim"] = std::to_string(dim);
    manifest.resolved["tag"] = tag;

    StoreHeader header;
    {
        Stage stage(manifest, "ingest");
        const auto records = read_ingest_manifest(manifest_path, dim);
        header = write_store(records, dim, out, tag);
    }
    std::fprintf(stderr, "[gpr] ingested records=%llu dim=%u\n",
                 (unsigned long long)header.record_count, header.dimension);
    finish_manifest(manifest, opts, app, out + ".manifest.json");
    return EXIT_OK;
}

// ---- partition ----------------------------------------------------------------

int cmd_partition(const CLI::App& app, const std::string& store_path, const std::string& out,
                  const std::string& strategy, uint32_t k, const std::string& cities_path,
                  const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "partition";
    manifest.inputs["store"] = store_path;
    manifest.outputs["partition"] = out;
    manifest.resolved["strategy"] = strategy;

    auto store = StoreHandle::open(store_path);
    Partition part;
    if (strategy == "country") {
        if (cities_path.empty()) raise(Errc::ConfigError, "--cities is required for country");
        manifest.inputs["cities"] = cities_path;
        const auto db = CitiesDb::load_tsv(cities_path);
        Stage stage(manifest, "partition");
        part = build_country_partition(store, db, opts.threads);
    } else if (strategy == "cluster") {
        manifest.resolved["K"] = std::to_string(k);
        Stage stage(manifest, "partition");
        part = build_cluster_partition(store, k, opts.seed, opts.threads);
    } else {
        raise(Errc::ConfigError, "unknown strategy '" + strategy + "'");
    }
    save_partition(part, out);
    std::fprintf(stderr, "[gpr] partitioned submaps=%zu records=%llu\n", part.submaps.size(),
                 (unsigned long long)store.size());
    finish_manifest(manifest, opts, app, out + ".manifest.json");
    return EXIT_OK;
}

// ---- index --------------------------------------------------------------------

// Materializes the per-submap index cache: one store-format file per submap
// plus an index_manifest.tsv. The cache is a derived artifact; localize
// rebuilds indexes from store + partition directly.
int cmd_index(const CLI::App& app, const std::string& store_path, const std::string& part_path,
              const std::string& out_dir, const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "index";
    manifest.inputs["store"] = store_path;
    manifest.inputs["partition"] = part_path;
    manifest.outputs["dir"] = out_dir;

    auto store = StoreHandle::open(store_path);
    const auto part = load_partition(part_path);
    fs::create_directories(out_dir);

    std::string listing = "submap_id\tmembers\tfile\n";
    {
        Stage stage(manifest, "index");
        const auto indexes = build_indexes(store, part, opts.threads);
        for (const auto& idx : indexes) {
            std::vector<DescriptorRecord> rows;
            rows.reserve(idx.size());
            for (size_t r = 0; r < idx.size(); ++r) {
                const auto v = idx.row_vector(r);
                rows.push_back({idx.row_id(r), {v.begin(), v.end()}, idx.row_location(r), ""});
            }
            const std::string name = "submap_" + std::to_string(idx.submap_id()) + ".gprstore";
            write_store(rows, store.dimension(), out_dir + "/" + name,
                        store.header().extractor_tag);
            listing += std::to_string(idx.submap_id()) + "\t" + std::to_string(idx.size()) +
                       "\t" + name + "\n";
        }
    }
    write_file(out_dir + "/index_manifest.tsv", listing);
    std::fprintf(stderr, "[gpr] indexed submaps=%zu\n", part.submaps.size());
    finish_manifest(manifest, opts, app, out_dir + "/manifest.json");
    return EXIT_OK;
}

// ---- extract-prior ------------------------------------------------------------

int cmd_extract_prior(const CLI::App& app, const std::string& raw_path, const std::string& out,
                      const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "extract-prior";
    manifest.inputs["raw_responses"] = raw_path;
    manifest.outputs["priors"] = out;

    uint64_t failures = 0, total = 0;
    {
        Stage stage(manifest, "extract");
        std::map<uint64_t, PriorEstimate> table;
        for (const auto& [id, text] : load_raw_responses(raw_path)) {
            ++total;
            auto est = extract_coordinates(text, "extract-prior");
            if (est.status == PriorStatus::FallbackUnavailable) ++failures;
            table[id] = std::move(est);
        }
        write_prior_file(table, out);
    }
    std::fprintf(stderr, "[gpr] extracted priors=%llu parse_failures=%llu\n",
                 (unsigned long long)(total - failures), (unsigned long long)failures);
    manifest.resolved["parse_failures"] = std::to_string(failures);
    finish_manifest(manifest, opts, app, out + ".manifest.json");
    return EXIT_OK;
}

// ---- localize -----------------------------------------------------------------

struct PriorOpts {
    std::string prior_file;
    std::string remote_url;
    std::string model;
    std::string prompt_template;
    std::string auth_env;
    std::string images_dir;
    double timeout_s = 30.0;
    uint32_t retries = 2;
    uint32_t in_flight = 4;
};

void add_prior_opts(CLI::App* cmd, PriorOpts& p) {
    cmd->add_option("--priors", p.prior_file, "prior file (id, lat, lon | raw responses)");
    cmd->add_option("--remote-url", p.remote_url, "chat-completion endpoint URL");
    cmd->add_option("--model", p.model, "remote model name");
    cmd->add_option("--prompt-template", p.prompt_template, "prompt template text file");
    cmd->add_option("--auth-env", p.auth_env,
                    "environment variable holding the bearer token (value never logged)");
    cmd->add_option("--images-dir", p.images_dir, "directory of <query_id>.jpg for remote priors");
    cmd->add_option("--remote-timeout", p.timeout_s, "per-request timeout seconds")
        ->capture_default_str();
    cmd->add_option("--remote-retries", p.retries, "retries after a failed request")
        ->capture_default_str();
    cmd->add_option("--remote-in-flight", p.in_flight, "max concurrent remote requests")
        ->capture_default_str();
}

std::shared_ptr<PriorProvider> make_provider(const PriorOpts& p, RunManifest& manifest) {
    if (!p.prior_file.empty()) {
        manifest.inputs["priors"] = p.prior_file;
        PriorFileStats stats;
        auto provider = FilePriorProvider::load(p.prior_file, &stats);
        std::fprintf(stderr, "[gpr] priors loaded entries=%llu parse_failures=%llu\n",
                     (unsigned long long)stats.entries, (unsigned long long)stats.parse_failures);
        return provider;
    }
    if (!p.remote_url.empty()) {
        RemotePriorConfig cfg;
        cfg.url = p.remote_url;
        cfg.model = p.model;
        cfg.prompt_template_path = p.prompt_template;
        cfg.auth_env = p.auth_env;
        cfg.timeout_s = p.timeout_s;
        cfg.retries = p.retries;
        cfg.in_flight_cap = p.in_flight;
        if (cfg.model.empty() || cfg.prompt_template_path.empty()) {
            raise(Errc::ConfigError,
                  "--model and --prompt-template are required with --remote-url");
        }
        manifest.resolved["remote_url"] = cfg.url;
        manifest.resolved["model"] = cfg.model;
        return std::make_shared<RemotePriorProvider>(cfg);
    }
    raise(Errc::ConfigError, "either --priors or --remote-url must be given");
}

ImageLoader make_image_loader(const std::string& images_dir) {
    if (images_dir.empty()) return {};
    return [images_dir](uint64_t query_id) -> std::vector<unsigned char> {
        for (const char* ext : {".jpg", ".jpeg", ".png", ""}) {
            const fs::path candidate = fs::path(images_dir) / (std::to_string(query_id) + ext);
            if (fs::exists(candidate)) {
                const std::string bytes = read_file(candidate.string());
                return {bytes.begin(), bytes.end()};
            }
        }
        raise(Errc::ConfigError,
              "no image for query " + std::to_string(query_id) + " in " + images_dir);
    };
}

int cmd_localize(const CLI::App& app, const std::string& store_path,
                 const std::string& queries_path, const std::string& out,
                 const std::string& strategy, bool rerank_on, uint32_t top_p, uint32_t k,
                 const std::string& part_path, const std::string& cities_path,
                 const PriorOpts& prior_opts, const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "localize";
    manifest.inputs["store"] = store_path;
    manifest.inputs["queries"] = queries_path;
    manifest.outputs["results"] = out;

    PipelineConfig config;
    config.strategy = parse_submap_strategy(strategy);
    config.rerank = rerank_on;
    config.top_p = top_p;
    config.cluster_k = k;
    config.validate();
    manifest.resolved["submap"] = strategy;
    manifest.resolved["rerank"] = rerank_on ? "true" : "false";
    manifest.resolved["top_p"] = std::to_string(top_p);
    manifest.resolved["K"] = std::to_string(k);

    auto store = StoreHandle::open(store_path);
    auto queries = StoreHandle::open(queries_path);

    std::optional<Partition> partition;
    if (config.strategy != SubmapStrategy::None) {
        if (part_path.empty()) raise(Errc::ConfigError, "--partition is required with submaps");
        manifest.inputs["partition"] = part_path;
        partition = load_partition(part_path);
    }
    std::optional<CitiesDb> cities;
    if (!cities_path.empty()) {
        manifest.inputs["cities"] = cities_path;
        cities = CitiesDb::load_tsv(cities_path);
    }

    auto provider = make_provider(prior_opts, manifest);

    Engine engine;
    {
        Stage stage(manifest, "build-engine");
        engine = make_engine(std::move(store), config, std::move(partition), provider,
                             std::move(cities), opts.threads);
    }

    std::vector<LocalizationResult> results;
    {
        Stage stage(manifest, "localize");
        results =
            localize_batch(queries, config, engine, make_image_loader(prior_opts.images_dir));
    }

    {
        Stage stage(manifest, "write-results");
        std::string lines;
        for (const auto& r : results) lines += result_to_json(r).dump() + "\n";
        write_file(out, lines);
    }

    uint64_t prior_unavailable = 0, country_fallbacks = 0, small_submaps = 0;
    for (const auto& r : results) {
        if (r.flags.prior_unavailable_global_search) ++prior_unavailable;
        if (r.flags.used_country_fallback) ++country_fallbacks;
        if (r.flags.submap_smaller_than_p) ++small_submaps;
    }
    std::fprintf(stderr,
                 "[gpr] localized queries=%zu prior_unavailable=%llu country_fallbacks=%llu "
                 "submap_smaller_than_p=%llu\n",
                 results.size(), (unsigned long long)prior_unavailable,
                 (unsigned long long)country_fallbacks, (unsigned long long)small_submaps);

    finish_manifest(manifest, opts, app, out + ".manifest.json");
    if (provider->transport_exhaustions() > 0) {
        std::fprintf(stderr, "[gpr] remote provider exhausted retries on %llu queries\n",
                     (unsigned long long)provider->transport_exhaustions());
        return EXIT_REMOTE;
    }
    return EXIT_OK;
}

// ---- evaluate -----------------------------------------------------------------

int cmd_evaluate(const CLI::App& app, const std::string& results_path,
                 const std::string& truth_path, const std::string& out_prefix,
                 const std::string& submap_label, const std::string& rerank_label,
                 uint32_t top_p, uint32_t k, const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.inputs["results"] = results_path;
    manifest.inputs["truth"] = truth_path;
    manifest.outputs["report_json"] = out_prefix + ".json";
    manifest.outputs["report_csv"] = out_prefix + ".csv";

    std::vector<LocalizationResult> results;
    {
        Stage stage(manifest, "load");
        const std::string data = read_file(results_path);
        for (std::string_view line : split(data, '\n')) {
            if (trim(line).empty()) continue;
            results.push_back(result_from_json(nlohmann::json::parse(line)));
        }
    }
    const auto truth = GroundTruth::load(truth_path);

    // config echo labels what produced the results; it does not change scoring
    PipelineConfig echo;
    echo.strategy = parse_submap_strategy(submap_label);
    echo.rerank = rerank_label == "yes" || rerank_label == "true";
    echo.top_p = top_p;
    echo.cluster_k = k;

    EvalReport report;
    {
        Stage stage(manifest, "evaluate");
        report = evaluate(results, truth, echo);
    }
    write_file(out_prefix + ".json", report.to_json().dump(2) + "\n");
    write_file(out_prefix + ".csv", EvalReport::csv_header() + "\n" + report.csv_row() + "\n");
    std::printf("%s\n%s\n", EvalReport::csv_header().c_str(), report.csv_row().c_str());

    finish_manifest(manifest, opts, app, out_prefix + ".manifest.json");
    return EXIT_OK;
}

// ---- synth --------------------------------------------------------------------

std::vector<SiteSpec> load_sites(const std::string& path) {
    std::vector<SiteSpec> sites;
    const std::string data = read_file(path);
    size_t line_no = 0;
    for (std::string_view line : split(data, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const char delim = line.find('\t') != std::string_view::npos ? '\t' : ',';
        const auto fields = split(line, delim);
        if (fields.size() < 3) {
            raise(Errc::ParseError,
                  path + ":" + std::to_string(line_no) + ": expected lat, lon, spread_km");
        }
        auto lat = parse_double(fields[0]);
        auto lon = parse_double(fields[1]);
        auto spread = parse_double(fields[2]);
        if (!lat || !lon || !spread) {
            raise(Errc::ParseError, path + ":" + std::to_string(line_no) + ": bad site");
        }
        sites.push_back({GeoPoint::normalized(*lat, *lon), *spread});
    }
    return sites;
}

int cmd_synth(const CLI::App& app, const std::string& out_dir, const SyntheticSpec& spec,
              const std::string& sites_path, const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "synth";
    manifest.outputs["dir"] = out_dir;
    manifest.resolved["n_reference"] = std::to_string(spec.n_reference);
    manifest.resolved["n_query"] = std::to_string(spec.n_query);
    manifest.resolved["dim"] = std::to_string(spec.dimension);
    manifest.resolved["aliasing_pairs"] = std::to_string(spec.aliasing_pairs);
    manifest.resolved["prior_noise_km"] = format_double(spec.prior_noise_km);
    manifest.resolved["query_noise"] = format_double(spec.query_noise);
    manifest.resolved["distractor_rank_mean"] = format_double(spec.distractor_rank_mean);

    SyntheticSpec resolved = spec;
    resolved.seed = opts.seed;
    if (!sites_path.empty()) {
        manifest.inputs["sites"] = sites_path;
        resolved.sites = load_sites(sites_path);
    }

    fs::create_directories(out_dir);
    {
        Stage stage(manifest, "synth");
        const auto data = generate_synthetic(resolved);
        write_synthetic_bundle(data, out_dir);
        std::fprintf(stderr, "[gpr] synthesized reference=%zu queries=%zu\n",
                     data.reference.size(), data.queries.size());
    }
    finish_manifest(manifest, opts, app, out_dir + "/manifest.json");
    return EXIT_OK;
}

// ---- sweep --------------------------------------------------------------------

std::vector<PipelineConfig> load_grid(const std::string& path) {
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array() || j.empty()) {
        raise(Errc::ConfigError, path + ": grid must be a non-empty JSON array");
    }
    std::vector<PipelineConfig> grid;
    for (const auto& cell : j) {
        PipelineConfig c;
        c.strategy = parse_submap_strategy(cell.value("submap", "cluster"));
        c.rerank = cell.value("rerank", true);
        c.top_p = cell.value("top_p", 50u);
        c.cluster_k = cell.value("K", 100u);
        c.validate();
        grid.push_back(c);
    }
    return grid;
}

int cmd_sweep(const CLI::App& app, const std::string& dataset_dir, const std::string& grid_path,
              const std::string& out_prefix, const CommonOpts& opts) {
    RunManifest manifest;
    manifest.command = "sweep";
    manifest.inputs["dataset"] = dataset_dir;
    manifest.inputs["grid"] = grid_path;
    manifest.outputs["table_csv"] = out_prefix + ".csv";
    manifest.outputs["table_json"] = out_prefix + ".json";

    const auto grid = load_grid(grid_path);
    SweepInputs in{StoreHandle::open(dataset_dir + "/store.gprstore"),
                   StoreHandle::open(dataset_dir + "/queries.gprstore"),
                   FilePriorProvider::load(dataset_dir + "/priors.tsv"),
                   std::nullopt,
                   opts.seed,
                   opts.threads};
    if (fs::exists(dataset_dir + "/cities.tsv")) {
        in.cities = CitiesDb::load_tsv(dataset_dir + "/cities.tsv");
    }
    const auto truth = GroundTruth::load(dataset_dir + "/truth.tsv");

    std::vector<EvalReport> reports;
    {
        Stage stage(manifest, "sweep");
        reports = sweep(grid, in, truth);
    }
    const std::string csv = sweep_csv(reports);
    write_file(out_prefix + ".csv", csv);
    write_file(out_prefix + ".json", sweep_json(reports).dump(2) + "\n");
    std::fputs(csv.c_str(), stdout);

    finish_manifest(manifest, opts, app, out_prefix + ".manifest.json");
    return EXIT_OK;
}

// ---- inspect ------------------------------------------------------------------

int cmd_inspect(const std::string& path) {
    const std::string data = read_file(path);
    if (data.size() >= 8 && std::memcmp(data.data(), STORE_MAGIC, 8) == 0) {
        auto store = StoreHandle::open(path);
        std::printf("type: store\n");
        std::printf("version: %u\n", store.header().format_version);
        std::printf("dimension: %u\n", store.dimension());
        std::printf("records: %llu\n", (unsigned long long)store.size());
        std::printf("extractor_tag: %s\n", store.header().extractor_tag.c_str());
        std::printf("fingerprint: %016llx\n", (unsigned long long)store.fingerprint());
        std::printf("content_checksum: %016llx\n", (unsigned long long)store.content_checksum());
        return EXIT_OK;
    }
    if (data.rfind("gprpart", 0) == 0) {
        const auto part = load_partition(path);
        size_t members = 0;
        for (const auto& s : part.submaps) members += s.member_ids.size();
        std::printf("type: partition\n");
        std::printf("strategy: %s\n", strategy_name(part.strategy));
        std::printf("submaps: %zu\n", part.submaps.size());
        std::printf("members: %zu\n", members);
        std::printf("store_fingerprint: %016llx\n", (unsigned long long)part.store_fingerprint);
        return EXIT_OK;
    }
    // fall back to prior/truth-style delimited text
    PriorFileStats stats;
    FilePriorProvider::load(path, &stats);
    std::printf("type: prior-table\n");
    std::printf("entries: %llu\n", (unsigned long long)stats.entries);
    std::printf("parse_failures: %llu\n", (unsigned long long)stats.parse_failures);
    return EXIT_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geo-constrained vector retrieval and evaluation"};
    app.set_version_flag("--version", VERSION);
    app.set_config("--config", "", "INI config file; command-line flags win");
    app.require_subcommand(1);

    uint32_t config_version = 1;
    app.add_option("--config-version", config_version, "config schema version")
        ->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "build a descriptor store from a sidecar manifest");
    std::string in_manifest, in_out, in_tag;
    uint32_t in_dim = 0;
    CommonOpts in_opts;
    ingest->add_option("manifest", in_manifest, "sidecar manifest file")->required();
    ingest->add_option("out", in_out, "output store path")->required();
    ingest->add_option("--dim", in_dim, "descriptor dimension")->required();
    ingest->add_option("--tag", in_tag, "extractor tag stored in the header");
    add_common(ingest, in_opts);

    // partition
    auto* partition = app.add_subcommand("partition", "split a store into submaps");
    std::string pa_store, pa_out, pa_strategy = "cluster", pa_cities;
    uint32_t pa_k = 100;
    CommonOpts pa_opts;
    partition->add_option("store", pa_store)->required();
    partition->add_option("out", pa_out)->required();
    partition->add_option("--strategy", pa_strategy, "country | cluster")->capture_default_str();
    partition->add_option("--k", pa_k, "cluster count (cluster strategy)")->capture_default_str();
    partition->add_option("--cities", pa_cities, "cities TSV (country strategy)");
    add_common(partition, pa_opts);

    // index
    auto* index = app.add_subcommand("index", "materialize per-submap index caches");
    std::string ix_store, ix_part, ix_out;
    CommonOpts ix_opts;
    index->add_option("store", ix_store)->required();
    index->add_option("partition", ix_part)->required();
    index->add_option("out_dir", ix_out)->required();
    add_common(index, ix_opts);

    // extract-prior
    auto* extract = app.add_subcommand("extract-prior", "parse raw generator responses");
    std::string ex_raw, ex_out;
    CommonOpts ex_opts;
    extract->add_option("raw", ex_raw, "raw responses (id<TAB>text)")->required();
    extract->add_option("out", ex_out, "output prior file")->required();
    add_common(extract, ex_opts);

    // localize
    auto* localize = app.add_subcommand("localize", "run the retrieval pipeline on a query store");
    std::string lo_store, lo_queries, lo_out, lo_strategy = "cluster", lo_part, lo_cities;
    bool lo_rerank = true;
    uint32_t lo_top_p = 50, lo_k = 100;
    PriorOpts lo_priors;
    CommonOpts lo_opts;
    localize->add_option("store", lo_store)->required();
    localize->add_option("queries", lo_queries, "query store (gprstore)")->required();
    localize->add_option("out", lo_out, "output results JSONL")->required();
    localize->add_option("--strategy", lo_strategy, "none | country | cluster")
        ->capture_default_str();
    localize->add_flag("--rerank,!--no-rerank", lo_rerank, "geographic re-ranking")
        ->capture_default_str();
    localize->add_option("--top-p", lo_top_p)->capture_default_str();
    localize->add_option("--k", lo_k, "cluster count label for the engine")->capture_default_str();
    localize->add_option("--partition", lo_part, "partition file (submap strategies)");
    localize->add_option("--cities", lo_cities, "cities TSV (country strategy)");
    add_prior_opts(localize, lo_priors);
    add_common(localize, lo_opts);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score results against ground truth");
    std::string ev_results, ev_truth, ev_out, ev_submap = "none", ev_rerank = "no";
    uint32_t ev_top_p = 50, ev_k = 100;
    CommonOpts ev_opts;
    evaluate->add_option("results", ev_results, "results JSONL")->required();
    evaluate->add_option("truth", ev_truth, "ground truth file")->required();
    evaluate->add_option("out_prefix", ev_out, "report path prefix")->required();
    evaluate->add_option("--submap", ev_submap, "config echo")->capture_default_str();
    evaluate->add_option("--rerank", ev_rerank, "config echo: yes | no")->capture_default_str();
    evaluate->add_option("--top-p", ev_top_p, "config echo")->capture_default_str();
    evaluate->add_option("--k", ev_k, "config echo")->capture_default_str();
    add_common(evaluate, ev_opts);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark bundle");
    std::string sy_out, sy_sites;
    SyntheticSpec sy_spec;
    CommonOpts sy_opts;
    synth->add_option("out_dir", sy_out)->required();
    synth->add_option("--n-ref", sy_spec.n_reference)->capture_default_str();
    synth->add_option("--n-query", sy_spec.n_query)->capture_default_str();
    synth->add_option("--dim", sy_spec.dimension)->capture_default_str();
    synth->add_option("--aliasing", sy_spec.aliasing_pairs, "descriptor-duplicate pairs")
        ->capture_default_str();
    synth->add_option("--prior-noise-km", sy_spec.prior_noise_km)->capture_default_str();
    synth->add_option("--query-noise", sy_spec.query_noise)->capture_default_str();
    synth->add_option("--site-noise", sy_spec.site_descriptor_noise)->capture_default_str();
    synth->add_option("--distractor-mean", sy_spec.distractor_rank_mean)->capture_default_str();
    synth->add_option("--sites", sy_sites, "sites file: lat, lon, spread_km per line");
    add_common(synth, sy_opts);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "run an ablation grid over a dataset bundle");
    std::string sw_dataset, sw_grid, sw_out;
    CommonOpts sw_opts;
    sweep_cmd->add_option("dataset_dir", sw_dataset, "directory from synth")->required();
    sweep_cmd->add_option("grid", sw_grid, "JSON array of config cells")->required();
    sweep_cmd->add_option("out_prefix", sw_out)->required();
    add_common(sweep_cmd, sw_opts);

    // inspect
    auto* inspect = app.add_subcommand("inspect", "summarize a store/partition/prior file");
    std::string is_path;
    inspect->fallthrough();
    inspect->add_option("file", is_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? EXIT_OK : EXIT_USAGE;
    }

    try {
        if (config_version != 1) {
            raise(Errc::ConfigError,
                  "unsupported config_version " + std::to_string(config_version));
        }
        if (ingest->parsed()) {
            return cmd_ingest(app, in_manifest, in_out, in_dim, in_tag, in_opts);
        }
        if (partition->parsed()) {
            return cmd_partition(app, pa_store, pa_out, pa_strategy, pa_k, pa_cities, pa_opts);
        }
        if (index->parsed()) return cmd_index(app, ix_store, ix_part, ix_out, ix_opts);
        if (extract->parsed()) return cmd_extract_prior(app, ex_raw, ex_out, ex_opts);
        if (localize->parsed()) {
            return cmd_localize(app, lo_store, lo_queries, lo_out, lo_strategy, lo_rerank,
                                lo_top_p, lo_k, lo_part, lo_cities, lo_priors, lo_opts);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(app, ev_results, ev_truth, ev_out, ev_submap, ev_rerank, ev_top_p,
                                ev_k, ev_opts);
        }
        if (synth->parsed()) return cmd_synth(app, sy_out, sy_spec, sy_sites, sy_opts);
        if (sweep_cmd->parsed()) return cmd_sweep(app, sw_dataset, sw_grid, sw_out, sw_opts);
        if (inspect->parsed()) return cmd_inspect(is_path);
    } catch (const Error& e) {
        std::fprintf(stderr, "%s: %s\n", e.code_name(), e.what());
        return EXIT_DATA;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "Error: %s\n", e.what());
        return EXIT_DATA;
    }
    return EXIT_USAGE;
}
