#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/pipeline.hpp"
#include "gpr/store.hpp"

namespace gpr {

/// Street, city, region, country, continent radii in km.
inline constexpr std::array<double, 5> EVAL_THRESHOLDS_KM = {1.0, 25.0, 200.0, 750.0, 2500.0};

class GroundTruth {
public:
    GroundTruth() = default;
    explicit GroundTruth(std::unordered_map<uint64_t, GeoPoint> truth) : truth_(std::move(truth)) {}

    /// Delimited text, one "query_id, lat, lon" per line (tab or comma).
    static GroundTruth load(const std::string& path) {
        std::unordered_map<uint64_t, GeoPoint> truth;
        const std::string data = read_file(path);
        size_t line_no = 0;
        for (std::string_view line : split(data, '\n')) {
            ++line_no;
            if (trim(line).empty()) continue;
            const char delim = line.find('\t') != std::string_view::npos ? '\t' : ',';
            auto fields = split(line, delim);
            if (fields.size() < 3) {
                raise(Errc::ParseError,
                      path + ":" + std::to_string(line_no) + ": expected id, lat, lon");
            }
            auto id = parse_u64(fields[0]);
            auto lat = parse_double(fields[1]);
            auto lon = parse_double(fields[2]);
            if (!id || !lat || !lon) {
                raise(Errc::ParseError, path + ":" + std::to_string(line_no) + ": bad record");
            }
            truth[*id] = GeoPoint::normalized(*lat, *lon);
        }
        return GroundTruth(std::move(truth));
    }

    const GeoPoint& at(uint64_t query_id) const {
        auto it = truth_.find(query_id);
        if (it == truth_.end()) {
            raise(Errc::MissingGroundTruth,
                  "no ground truth for query " + std::to_string(query_id));
        }
        return it->second;
    }

    bool contains(uint64_t query_id) const { return truth_.count(query_id) != 0; }
    size_t size() const { return truth_.size(); }

private:
    std::unordered_map<uint64_t, GeoPoint> truth_;
};

struct EvalReport {
    std::array<double, 5> accuracy{};  // at 1, 25, 200, 750, 2500 km, inclusive
    uint64_t total_queries = 0;
    uint64_t prior_parse_failures = 0;
    uint64_t country_fallbacks = 0;
    uint64_t submap_smaller_than_p = 0;
    PipelineConfig config;
    std::string provider_tag;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["config"] = {{"submap", submap_strategy_name(config.strategy)},
                       {"rerank", config.rerank},
                       {"top_p", config.top_p},
                       {"K", config.cluster_k}};
        nlohmann::json acc;
        for (size_t i = 0; i < EVAL_THRESHOLDS_KM.size(); ++i) {
            acc[format_double(EVAL_THRESHOLDS_KM[i])] = accuracy[i];
        }
        j["accuracy"] = acc;
        j["counts"] = {{"queries", total_queries},
                       {"prior_parse_failures", prior_parse_failures},
                       {"country_fallbacks", country_fallbacks},
                       {"submap_smaller_than_p", submap_smaller_than_p}};
        j["provider"] = provider_tag;
        return j;
    }

    static std::string csv_header() {
        return "submap,rerank,top_p,K,acc_1km,acc_25km,acc_200km,acc_750km,acc_2500km,"
               "queries,prior_parse_failures,country_fallbacks,submap_smaller_than_p";
    }

    std::string csv_row() const {
        std::string row;
        row += submap_strategy_name(config.strategy);
        row += config.rerank ? ",yes," : ",no,";
        row += std::to_string(config.top_p) + "," + std::to_string(config.cluster_k);
        for (double a : accuracy) row += "," + format_double(a);
        row += "," + std::to_string(total_queries);
        row += "," + std::to_string(prior_parse_failures);
        row += "," + std::to_string(country_fallbacks);
        row += "," + std::to_string(submap_smaller_than_p);
        return row;
    }
};

/// Accuracy at each radius: fraction of queries whose prediction lies within
/// t km (inclusive) of ground truth.
inline EvalReport evaluate(const std::vector<LocalizationResult>& results,
                           const GroundTruth& truth,
                           const PipelineConfig& config = PipelineConfig{},
                           const std::string& provider_tag = "") {
    EvalReport report;
    report.config = config;
    report.provider_tag = provider_tag;
    report.total_queries = results.size();

    std::array<uint64_t, 5> hits{};
    for (const auto& r : results) {
        const GeoPoint& gt = truth.at(r.query_id);
        const double err = haversine_km(r.predicted_location, gt).km();
        for (size_t t = 0; t < EVAL_THRESHOLDS_KM.size(); ++t) {
            if (err <= EVAL_THRESHOLDS_KM[t]) ++hits[t];
        }
        if (r.prior.status == PriorStatus::FallbackUnavailable) ++report.prior_parse_failures;
        if (r.flags.used_country_fallback) ++report.country_fallbacks;
        if (r.flags.submap_smaller_than_p) ++report.submap_smaller_than_p;
    }
    if (!results.empty()) {
        for (size_t t = 0; t < hits.size(); ++t) {
            report.accuracy[t] = double(hits[t]) / double(results.size());
        }
    }
    return report;
}

/// Independent retrieval oracle: a naive full sort over every record in the
/// store, distances from a plain scalar loop. The search engine is tested
/// against this; keep it free of any code shared with gpr/index.hpp.
inline std::vector<Candidate> brute_force_oracle(const StoreHandle& store,
                                                 std::span<const float> query, uint32_t p) {
    if (query.size() != store.dimension()) {
        raise(Errc::DimensionMismatch,
              "query dimension " + std::to_string(query.size()) + ", store dimension " +
                  std::to_string(store.dimension()));
    }
    std::vector<Candidate> all;
    all.reserve(size_t(store.size()));
    for (size_t i = 0; i < store.size(); ++i) {
        const auto row = store.vector_at(i);
        double acc = 0.0;
        for (size_t j = 0; j < row.size(); ++j) {
            const double d = double(query[j]) - double(row[j]);
            acc += d * d;
        }
        all.push_back({store.id_at(i), float(acc), store.location_at(i)});
    }
    std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.id < b.id;
    });
    if (all.size() > p) all.resize(p);
    return all;
}

/// Everything a sweep cell needs; partitions and indexes are built per cell.
struct SweepInputs {
    StoreHandle store;
    StoreHandle queries;
    std::shared_ptr<PriorProvider> priors;
    std::optional<CitiesDb> cities;
    uint64_t seed = 1;
    unsigned threads = 0;
};

/// Builds the engine a config needs and runs the whole query store.
inline std::pair<std::vector<LocalizationResult>, EvalReport> run_config(
    const SweepInputs& in, const PipelineConfig& config, const GroundTruth& truth) {
    std::optional<Partition> partition;
    if (config.strategy == SubmapStrategy::Country) {
        if (!in.cities) raise(Errc::ConfigError, "country strategy needs a cities db");
        partition = build_country_partition(in.store, *in.cities, in.threads);
    } else if (config.strategy == SubmapStrategy::Cluster) {
        partition = build_cluster_partition(in.store, config.cluster_k, in.seed, in.threads);
    }
    Engine engine =
        make_engine(in.store, config, std::move(partition), in.priors, in.cities, in.threads);
    auto results = localize_batch(in.queries, config, engine);
    auto report = evaluate(results, truth, config, in.priors->tag());
    return {std::move(results), std::move(report)};
}

/// One report per configuration, Table-style comparison.
inline std::vector<EvalReport> sweep(const std::vector<PipelineConfig>& configs,
                                     const SweepInputs& in, const GroundTruth& truth) {
    std::vector<EvalReport> reports;
    reports.reserve(configs.size());
    for (const auto& config : configs) {
        reports.push_back(run_config(in, config, truth).second);
    }
    return reports;
}

inline std::string sweep_csv(const std::vector<EvalReport>& reports) {
    std::string out = EvalReport::csv_header() + "\n";
    for (const auto& r : reports) out += r.csv_row() + "\n";
    return out;
}

inline nlohmann::json sweep_json(const std::vector<EvalReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(r.to_json());
    return arr;
}

}  // namespace gpr
