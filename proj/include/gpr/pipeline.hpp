#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpr/cities.hpp"
#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/index.hpp"
#include "gpr/parallel.hpp"
#include "gpr/partition.hpp"
#include "gpr/prior.hpp"
#include "gpr/store.hpp"

namespace gpr {

enum class SubmapStrategy { None, Country, Cluster };

inline const char* submap_strategy_name(SubmapStrategy s) {
    switch (s) {
        case SubmapStrategy::None: return "none";
        case SubmapStrategy::Country: return "country";
        case SubmapStrategy::Cluster: return "cluster";
    }
    return "?";
}

inline SubmapStrategy parse_submap_strategy(const std::string& s) {
    if (s == "none") return SubmapStrategy::None;
    if (s == "country") return SubmapStrategy::Country;
    if (s == "cluster") return SubmapStrategy::Cluster;
    raise(Errc::ConfigError, "unknown submap strategy '" + s + "'");
}

/// One ablation cell: submap strategy x re-ranking, plus the retrieval depth
/// and cluster count.
struct PipelineConfig {
    SubmapStrategy strategy = SubmapStrategy::Cluster;
    bool rerank = true;
    uint32_t top_p = 50;
    uint32_t cluster_k = 100;

    void validate() const {
        if (top_p == 0) raise(Errc::ConfigError, "top_p must be >= 1");
        if (cluster_k == 0) raise(Errc::ConfigError, "K must be >= 1");
    }
};

struct ResultFlags {
    bool used_country_fallback = false;
    bool prior_unavailable_global_search = false;
    bool submap_smaller_than_p = false;

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        if (used_country_fallback) out.push_back("UsedCountryFallback");
        if (prior_unavailable_global_search) out.push_back("PriorUnavailable-GlobalSearch");
        if (submap_smaller_than_p) out.push_back("SubmapSmallerThanP");
        return out;
    }
};

/// Candidate plus its haversine distance to the prior (set when re-ranking ran).
struct RankedCandidate {
    Candidate candidate;
    std::optional<double> distance_km;
};

struct LocalizationResult {
    uint64_t query_id = 0;
    uint64_t best_id = 0;
    GeoPoint predicted_location;  // store geotag of best_id
    std::vector<RankedCandidate> candidates;
    PriorEstimate prior;
    ResultFlags flags;
};

/// Reorders candidates by ascending haversine distance to the prior; ties by
/// (score, id). The candidate set is never changed, only permuted.
inline std::vector<RankedCandidate> rerank(const std::vector<Candidate>& candidates,
                                           const GeoPoint& prior) {
    std::vector<RankedCandidate> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        out.push_back({c, haversine_km(prior, c.location).km()});
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (*a.distance_km != *b.distance_km) return *a.distance_km < *b.distance_km;
        if (a.candidate.score != b.candidate.score) return a.candidate.score < b.candidate.score;
        return a.candidate.id < b.candidate.id;
    });
    return out;
}

/// Immutable bundle of everything one localization run needs. Safe for
/// concurrent localize() calls once constructed.
struct Engine {
    StoreHandle store;
    std::optional<Partition> partition;      // present iff strategy != None
    std::vector<SubmapIndex> submap_indexes; // parallel to partition.submaps
    std::optional<SubmapIndex> global_index; // present iff strategy == None
    std::shared_ptr<PriorProvider> priors;
    std::optional<CitiesDb> cities;          // required by Country strategy
    unsigned threads = 0;

    const SubmapIndex& index_for(uint32_t submap_id) const {
        for (const auto& idx : submap_indexes) {
            if (idx.submap_id() == submap_id) return idx;
        }
        raise(Errc::InconsistentEngine, "no index for submap " + std::to_string(submap_id));
    }
};

/// Builds the engine for a config: per-submap indexes when partitioned, one
/// whole-store index otherwise.
inline Engine make_engine(StoreHandle store, const PipelineConfig& config,
                          std::optional<Partition> partition,
                          std::shared_ptr<PriorProvider> priors, std::optional<CitiesDb> cities,
                          unsigned threads = 0) {
    config.validate();
    if (store.size() == 0) raise(Errc::EmptyStore, "engine needs a non-empty store");
    if (!priors) raise(Errc::InconsistentEngine, "engine needs a prior provider");

    Engine e{std::move(store), std::move(partition), {}, std::nullopt,
             std::move(priors), std::move(cities), threads};

    if (config.strategy == SubmapStrategy::None) {
        e.global_index = build_global_index(e.store);
        return e;
    }
    if (!e.partition) {
        raise(Errc::InconsistentEngine, "submap strategy needs a partition");
    }
    const auto want = config.strategy == SubmapStrategy::Country ? PartitionStrategy::Country
                                                                 : PartitionStrategy::Cluster;
    if (e.partition->strategy != want) {
        raise(Errc::InconsistentEngine, "partition strategy does not match pipeline config");
    }
    if (config.strategy == SubmapStrategy::Country && !e.cities) {
        raise(Errc::InconsistentEngine, "country strategy needs a cities db");
    }
    e.submap_indexes = build_indexes(e.store, *e.partition, threads);
    return e;
}

namespace detail {

inline std::vector<Candidate> global_search(const Engine& engine, std::span<const float> query,
                                            uint32_t p) {
    if (engine.global_index) return search(*engine.global_index, query, p, engine.threads);
    return search_all(engine.submap_indexes, query, p, engine.threads);
}

}  // namespace detail

/// Runs the full per-query pipeline: prior, submap selection, top-p
/// retrieval, optional geographic re-ranking, best-match pick.
inline LocalizationResult localize(std::span<const float> query_vector, uint64_t query_id,
                                   const PipelineConfig& config, const Engine& engine,
                                   std::span<const unsigned char> image = {}) {
    config.validate();
    if (query_vector.size() != engine.store.dimension()) {
        raise(Errc::DimensionMismatch,
              "query dimension " + std::to_string(query_vector.size()) + ", store dimension " +
                  std::to_string(engine.store.dimension()));
    }

    LocalizationResult result;
    result.query_id = query_id;
    result.prior = engine.priors->get_prior(query_id, image);

    const bool have_prior = result.prior.status == PriorStatus::Parsed;
    std::vector<Candidate> candidates;
    size_t scope_size = 0;

    if (!have_prior) {
        // no usable prior: search everything, skip re-ranking
        result.flags.prior_unavailable_global_search = true;
        scope_size = size_t(engine.store.size());
        candidates = detail::global_search(engine, query_vector, config.top_p);
    } else if (config.strategy == SubmapStrategy::None) {
        scope_size = size_t(engine.store.size());
        candidates = detail::global_search(engine, query_vector, config.top_p);
    } else {
        const CitiesDb* db = engine.cities ? &*engine.cities : nullptr;
        const auto selection = select_submap(*engine.partition, *result.prior.location, db);
        result.flags.used_country_fallback = selection.used_country_fallback;
        const SubmapIndex& idx = engine.index_for(selection.submap_id);
        scope_size = idx.size();
        candidates = search(idx, query_vector, config.top_p, engine.threads);
    }

    if (scope_size < config.top_p) result.flags.submap_smaller_than_p = true;
    if (candidates.empty()) {
        raise(Errc::InconsistentEngine, "search scope produced no candidates");
    }

    if (config.rerank && have_prior) {
        result.candidates = rerank(candidates, *result.prior.location);
    } else {
        result.candidates.reserve(candidates.size());
        for (const auto& c : candidates) result.candidates.push_back({c, std::nullopt});
    }

    const auto& best = result.candidates.front().candidate;
    result.best_id = best.id;
    result.predicted_location = best.location;
    return result;
}

// ---- result serialization -----------------------------------------------------

/// One JSON object per line. nlohmann::json orders keys lexicographically and
/// prints shortest-round-trip numbers, so identical results serialize to
/// identical bytes.
inline nlohmann::json result_to_json(const LocalizationResult& r) {
    nlohmann::json j;
    j["query_id"] = r.query_id;
    j["best_id"] = r.best_id;
    j["predicted"] = {{"lat", r.predicted_location.lat()}, {"lon", r.predicted_location.lon()}};
    nlohmann::json prior;
    prior["status"] =
        r.prior.status == PriorStatus::Parsed ? "parsed" : "fallback_unavailable";
    prior["provider"] = r.prior.provider_tag;
    if (r.prior.location) {
        prior["lat"] = r.prior.location->lat();
        prior["lon"] = r.prior.location->lon();
    }
    j["prior"] = prior;
    j["flags"] = r.flags.names();
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& rc : r.candidates) {
        nlohmann::json c;
        c["id"] = rc.candidate.id;
        c["score"] = rc.candidate.score;
        if (rc.distance_km) c["distance_km"] = *rc.distance_km;
        cands.push_back(c);
    }
    j["candidates"] = cands;
    return j;
}

inline LocalizationResult result_from_json(const nlohmann::json& j) {
    LocalizationResult r;
    r.query_id = j.at("query_id").get<uint64_t>();
    r.best_id = j.at("best_id").get<uint64_t>();
    r.predicted_location = GeoPoint::normalized(j.at("predicted").at("lat").get<double>(),
                                                j.at("predicted").at("lon").get<double>());
    const auto& prior = j.at("prior");
    if (prior.at("status").get<std::string>() == "parsed") {
        r.prior = PriorEstimate::parsed(GeoPoint::normalized(prior.at("lat").get<double>(),
                                                             prior.at("lon").get<double>()),
                                        "", prior.value("provider", ""));
    } else {
        r.prior = PriorEstimate::unavailable("", prior.value("provider", ""));
    }
    for (const auto& name : j.at("flags")) {
        const std::string f = name.get<std::string>();
        if (f == "UsedCountryFallback") r.flags.used_country_fallback = true;
        if (f == "PriorUnavailable-GlobalSearch") r.flags.prior_unavailable_global_search = true;
        if (f == "SubmapSmallerThanP") r.flags.submap_smaller_than_p = true;
    }
    for (const auto& c : j.at("candidates")) {
        RankedCandidate rc;
        rc.candidate.id = c.at("id").get<uint64_t>();
        rc.candidate.score = c.at("score").get<float>();
        if (c.contains("distance_km")) rc.distance_km = c.at("distance_km").get<double>();
        r.candidates.push_back(std::move(rc));
    }
    return r;
}

/// Localizes every record of a query store; parallel across queries, output
/// ordered by query_id. `image_loader`, when set, supplies per-query image
/// bytes for remote prior providers.
using ImageLoader = std::function<std::vector<unsigned char>(uint64_t query_id)>;

inline std::vector<LocalizationResult> localize_batch(const StoreHandle& queries,
                                                      const PipelineConfig& config,
                                                      const Engine& engine,
                                                      const ImageLoader& image_loader = {}) {
    const size_t n = size_t(queries.size());
    std::vector<LocalizationResult> results(n);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    parallel_blocks(n, 16, engine.threads, [&](size_t, size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            try {
                std::vector<unsigned char> image;
                if (image_loader) image = image_loader(queries.id_at(i));
                results[i] =
                    localize(queries.vector_at(i), queries.id_at(i), config, engine, image);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    });
    if (first_error) std::rethrow_exception(first_error);
    std::sort(results.begin(), results.end(),
              [](const LocalizationResult& a, const LocalizationResult& b) {
                  return a.query_id < b.query_id;
              });
    return results;
}

}  // namespace gpr
