#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gpr/cities.hpp"
#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/prior.hpp"
#include "gpr/rng.hpp"
#include "gpr/store.hpp"

namespace gpr {

struct SiteSpec {
    GeoPoint center;
    double spread_km = 10.0;
};

/// Desk-scale synthetic benchmark: per-site Gaussian descriptor clusters with
/// site separation far above query noise, so visual similarity is a
/// controllable proxy. Aliasing pairs plant bitwise-identical descriptors at
/// sites >= 2500 km apart; distractors plant records that outrank the true
/// match visually while sitting 150-400 km away geographically.
struct SyntheticSpec {
    uint64_t n_reference = 10000;
    uint64_t n_query = 500;
    uint32_t dimension = 128;
    uint64_t seed = 1;
    std::vector<SiteSpec> sites;        // empty -> default_sites()
    uint32_t aliasing_pairs = 0;
    double prior_noise_km = 0.0;        // scale of great-circle prior displacement
    double query_noise = 0.02;          // additive descriptor noise on queries
    double site_descriptor_noise = 0.05;
    double distractor_rank_mean = 0.0;  // 0 disables distractor planting
};

struct SyntheticQuery {
    uint64_t id = 0;
    std::vector<float> vector;
    GeoPoint truth;
};

struct SyntheticDataset {
    std::vector<DescriptorRecord> reference;
    std::vector<SyntheticQuery> queries;
    std::map<uint64_t, PriorEstimate> priors;
    std::vector<CityEntry> cities;  // one synthetic city per site
    uint32_t dimension = 0;
};

/// Ten spread-out land sites; pairwise distances all exceed 2500 km.
inline std::vector<SiteSpec> default_sites() {
    return {
        {GeoPoint::normalized(48.85, 2.35), 10.0},    // western Europe
        {GeoPoint::normalized(40.71, -74.00), 10.0},  // US east coast
        {GeoPoint::normalized(34.05, -118.24), 10.0}, // US west coast
        {GeoPoint::normalized(-23.55, -46.63), 10.0}, // Brazil
        {GeoPoint::normalized(30.04, 31.24), 10.0},   // Egypt
        {GeoPoint::normalized(-1.29, 36.82), 10.0},   // Kenya
        {GeoPoint::normalized(28.70, 77.10), 10.0},   // north India
        {GeoPoint::normalized(35.68, 139.65), 10.0},  // Japan
        {GeoPoint::normalized(-33.87, 151.21), 10.0}, // Australia
        {GeoPoint::normalized(55.75, 37.62), 10.0},   // Russia
    };
}

inline void validate_spec(const SyntheticSpec& spec, size_t n_sites) {
    if (spec.n_reference == 0 || spec.n_query == 0 || spec.dimension == 0) {
        raise(Errc::SpecInvalid, "reference count, query count and dimension must be >= 1");
    }
    if (n_sites == 0) raise(Errc::SpecInvalid, "at least one site required");
    if (spec.n_reference < n_sites) {
        raise(Errc::SpecInvalid, "n_reference must be >= number of sites");
    }
    if (n_sites > 26 * 26) raise(Errc::SpecInvalid, "too many sites for synthetic country codes");
    if (spec.prior_noise_km < 0 || spec.query_noise < 0 || spec.site_descriptor_noise < 0 ||
        spec.distractor_rank_mean < 0) {
        raise(Errc::SpecInvalid, "noise scales must be >= 0");
    }
    if (spec.distractor_rank_mean > 0 && spec.query_noise <= 0) {
        raise(Errc::SpecInvalid, "distractor planting requires query_noise > 0");
    }
}

/// Deterministic under spec.seed: one RNG, fixed draw order (prototypes,
/// reference records, aliasing picks, then per query noise/distractors/prior).
inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    const std::vector<SiteSpec> sites = spec.sites.empty() ? default_sites() : spec.sites;
    const size_t n_sites = sites.size();
    validate_spec(spec, n_sites);

    const uint32_t d = spec.dimension;
    Rng rng(spec.seed);
    SyntheticDataset out;
    out.dimension = d;

    // descriptor prototypes, one per site
    std::vector<std::vector<float>> prototypes(n_sites, std::vector<float>(d));
    for (auto& proto : prototypes) {
        for (uint32_t j = 0; j < d; ++j) proto[j] = float(rng.gaussian());
    }

    // reference records, round-robin over sites
    const size_t n_ref = size_t(spec.n_reference);
    out.reference.reserve(n_ref);
    for (size_t i = 0; i < n_ref; ++i) {
        const size_t site = i % n_sites;
        DescriptorRecord r;
        r.id = uint64_t(i) + 1;
        const double bearing = rng.bearing_deg();
        const double dist = std::abs(rng.gaussian(0.0, sites[site].spread_km));
        r.location = destination_point(sites[site].center, bearing, dist);
        r.vector.resize(d);
        for (uint32_t j = 0; j < d; ++j) {
            r.vector[j] = float(prototypes[site][j] + spec.site_descriptor_noise * rng.gaussian());
        }
        r.source_tag = "synthetic";
        out.reference.push_back(std::move(r));
    }

    // aliasing pairs: identical descriptors planted at far-apart sites
    std::vector<std::pair<size_t, size_t>> far_site_pairs;
    for (size_t a = 0; a < n_sites; ++a) {
        for (size_t b = a + 1; b < n_sites; ++b) {
            if (haversine_km(sites[a].center, sites[b].center).km() >= 2500.0) {
                far_site_pairs.emplace_back(a, b);
            }
        }
    }
    std::vector<std::pair<size_t, size_t>> alias_pairs;  // (ordinal_a, ordinal_b)
    std::set<size_t> aliased;
    if (spec.aliasing_pairs > 0) {
        if (far_site_pairs.empty()) {
            raise(Errc::SpecInvalid, "no site pair is >= 2500 km apart; cannot plant aliasing");
        }
        auto pick_from_site = [&](size_t site) {
            const size_t count = (n_ref - site - 1) / n_sites + 1;
            for (int tries = 0; tries < 1000; ++tries) {
                const size_t ord = site + size_t(rng.uniform_index(count)) * n_sites;
                if (!aliased.count(ord)) return ord;
            }
            raise(Errc::SpecInvalid, "too many aliasing pairs for the reference set");
        };
        for (uint32_t p = 0; p < spec.aliasing_pairs; ++p) {
            const auto [sa, sb] = far_site_pairs[p % far_site_pairs.size()];
            const size_t oa = pick_from_site(sa);
            const size_t ob = pick_from_site(sb);
            aliased.insert(oa);
            aliased.insert(ob);
            out.reference[ob].vector = out.reference[oa].vector;  // bitwise copy
            alias_pairs.emplace_back(oa, ob);
        }
    }

    // queries: the first min(aliasing_pairs, n_query) target an aliased
    // endpoint (picked uniformly), the rest target random non-aliased records
    uint64_t next_ref_id = uint64_t(n_ref) + 1;
    std::vector<float> eps(d);
    for (uint64_t q = 0; q < spec.n_query; ++q) {
        size_t target_ord;
        if (q < alias_pairs.size()) {
            const auto& pr = alias_pairs[size_t(q)];
            target_ord = rng.uniform() < 0.5 ? pr.first : pr.second;
        } else {
            target_ord = size_t(rng.uniform_index(n_ref));
            for (int tries = 0; tries < 1000 && aliased.count(target_ord); ++tries) {
                target_ord = size_t(rng.uniform_index(n_ref));
            }
        }
        // appending distractors reallocates out.reference, so copy, don't alias
        const std::vector<float> target_vector = out.reference[target_ord].vector;
        const GeoPoint target_location = out.reference[target_ord].location;

        SyntheticQuery query;
        query.id = q + 1;
        query.truth = target_location;
        query.vector.resize(d);
        for (uint32_t j = 0; j < d; ++j) {
            eps[j] = float(spec.query_noise * rng.gaussian());
            query.vector[j] = target_vector[j] + eps[j];
        }

        // distractors: descriptors between the query and its true match, so
        // they outrank the true match; geotagged 150-400 km off the truth
        if (spec.distractor_rank_mean > 0) {
            const double u = rng.uniform();
            const uint32_t count = uint32_t(
                std::min(99.0, std::floor(-spec.distractor_rank_mean * std::log(1.0 - u))));
            for (uint32_t i = 1; i <= count; ++i) {
                const float alpha = float(i) / float(count + 1);
                DescriptorRecord distractor;
                distractor.id = next_ref_id++;
                distractor.vector.resize(d);
                for (uint32_t j = 0; j < d; ++j) {
                    distractor.vector[j] = target_vector[j] + alpha * eps[j];
                }
                distractor.location =
                    destination_point(query.truth, rng.bearing_deg(), rng.uniform(150.0, 400.0));
                distractor.source_tag = "synthetic";
                out.reference.push_back(std::move(distractor));
            }
        }

        // prior: truth displaced by |N(0, sigma)| km in a random bearing
        const double prior_bearing = rng.bearing_deg();
        const double prior_dist = std::abs(rng.gaussian(0.0, spec.prior_noise_km));
        const GeoPoint prior_loc = destination_point(query.truth, prior_bearing, prior_dist);
        out.priors[query.id] = PriorEstimate::parsed(prior_loc, "", "synthetic");

        out.queries.push_back(std::move(query));
    }

    // one synthetic city per site, country codes AA, AB, ...
    for (size_t s = 0; s < n_sites; ++s) {
        std::string cc = {char('A' + s / 26), char('A' + s % 26)};
        out.cities.push_back({"site" + std::to_string(s), sites[s].center, cc});
    }
    return out;
}

/// Writes the dataset bundle into a directory: store.gprstore,
/// queries.gprstore (geotag = ground truth, informational only), priors.tsv,
/// truth.tsv, cities.tsv.
struct SyntheticPaths {
    std::string store;
    std::string queries;
    std::string priors;
    std::string truth;
    std::string cities;
};

inline SyntheticPaths write_synthetic_bundle(const SyntheticDataset& data, const std::string& dir) {
    SyntheticPaths paths{dir + "/store.gprstore", dir + "/queries.gprstore", dir + "/priors.tsv",
                         dir + "/truth.tsv", dir + "/cities.tsv"};

    write_store(data.reference, data.dimension, paths.store, "synthetic");

    std::vector<DescriptorRecord> query_records;
    query_records.reserve(data.queries.size());
    for (const auto& q : data.queries) {
        query_records.push_back({q.id, q.vector, q.truth, "synthetic"});
    }
    write_store(query_records, data.dimension, paths.queries, "synthetic");

    write_prior_file(data.priors, paths.priors);

    std::string truth;
    for (const auto& q : data.queries) {
        truth += std::to_string(q.id) + "\t" + format_double(q.truth.lat()) + "\t" +
                 format_double(q.truth.lon()) + "\n";
    }
    write_file(paths.truth, truth);

    std::string cities;
    for (const auto& c : data.cities) {
        cities += c.name + "\t" + format_double(c.location.lat()) + "\t" +
                  format_double(c.location.lon()) + "\t" + c.country_code + "\n";
    }
    write_file(paths.cities, cities);
    return paths;
}

}  // namespace gpr
