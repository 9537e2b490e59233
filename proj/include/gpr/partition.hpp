#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "gpr/cities.hpp"
#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/io_util.hpp"
#include "gpr/parallel.hpp"
#include "gpr/rng.hpp"
#include "gpr/store.hpp"

namespace gpr {

enum class PartitionStrategy { Country, Cluster };

inline const char* strategy_name(PartitionStrategy s) {
    return s == PartitionStrategy::Country ? "country" : "cluster";
}

struct Submap {
    uint32_t submap_id = 0;
    std::vector<uint64_t> member_ids;  // sorted ascending, duplicate-free, non-empty
    std::string country_code;          // Country strategy representative
    GeoPoint centroid;                 // Cluster strategy representative
    GeoPoint member_mean;              // arithmetic mean of member coordinates
};

struct Partition {
    PartitionStrategy strategy = PartitionStrategy::Cluster;
    std::vector<Submap> submaps;
    uint64_t store_fingerprint = 0;

    const Submap* find_country(const std::string& cc) const {
        for (const auto& s : submaps) {
            if (s.country_code == cc) return &s;
        }
        return nullptr;
    }
};

/// Per-iteration diagnostics from Lloyd's algorithm, used by property tests.
struct ClusterDiagnostics {
    std::vector<double> inertia_per_iteration;
    uint32_t iterations = 0;
    uint32_t empty_cluster_repairs = 0;
    bool converged = false;
};

namespace detail {

inline GeoPoint mean_of_members(const StoreHandle& store, const std::vector<uint64_t>& ids) {
    double lat = 0.0, lon = 0.0;
    for (uint64_t id : ids) {
        const GeoPoint p = store.location_at(*store.find_ordinal(id));
        lat += p.lat();
        lon += p.lon();
    }
    const double n = double(ids.size());
    return GeoPoint::normalized(lat / n, lon / n);
}

}  // namespace detail

/// Groups every record under the country of its haversine-nearest city.
/// One submap per distinct country; submap ids follow sorted country order.
inline Partition build_country_partition(const StoreHandle& store, const CitiesDb& db,
                                         unsigned threads = 0) {
    const size_t n = size_t(store.size());
    if (n == 0) raise(Errc::EmptyStore, "cannot partition an empty store");

    std::vector<std::string> country(n);
    parallel_blocks(n, 1024, threads, [&](size_t, size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            country[i] = reverse_geocode(store.location_at(i), db);
        }
    });

    std::map<std::string, std::vector<uint64_t>> groups;
    for (size_t i = 0; i < n; ++i) groups[country[i]].push_back(store.id_at(i));

    Partition part;
    part.strategy = PartitionStrategy::Country;
    part.store_fingerprint = store.fingerprint();
    uint32_t next_id = 0;
    for (auto& [cc, ids] : groups) {
        Submap s;
        s.submap_id = next_id++;
        s.country_code = cc;
        std::sort(ids.begin(), ids.end());
        s.member_ids = std::move(ids);
        s.member_mean = detail::mean_of_members(store, s.member_ids);
        s.centroid = s.member_mean;
        part.submaps.push_back(std::move(s));
    }
    return part;
}

/// K-means over raw (lat, lon) degrees with squared Euclidean distance and no
/// longitude wraparound; k-means++ seeding; Lloyd iterations until the total
/// squared centroid shift drops below 1e-6 or 100 iterations. Empty clusters
/// are repaired by reseeding from the point farthest from its centroid, so
/// the result always has exactly K non-empty submaps.
inline Partition build_cluster_partition(const StoreHandle& store, uint32_t k, uint64_t seed,
                                         unsigned threads = 0,
                                         ClusterDiagnostics* diag = nullptr) {
    const size_t n = size_t(store.size());
    if (n == 0) raise(Errc::EmptyStore, "cannot partition an empty store");
    if (k == 0) raise(Errc::SpecInvalid, "K must be >= 1");
    if (k > n) {
        raise(Errc::KTooLarge,
              "K=" + std::to_string(k) + " exceeds record count N=" + std::to_string(n));
    }

    constexpr double kShiftTolerance = 1e-6;
    constexpr uint32_t kMaxIterations = 100;

    std::vector<double> px(n), py(n);
    for (size_t i = 0; i < n; ++i) {
        const GeoPoint p = store.location_at(i);
        px[i] = p.lat();
        py[i] = p.lon();
    }

    auto dist2 = [&](size_t i, double cx, double cy) {
        const double dx = px[i] - cx;
        const double dy = py[i] - cy;
        return dx * dx + dy * dy;
    };

    // k-means++ seeding
    Rng rng(seed);
    std::vector<double> cx(k), cy(k);
    std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
    {
        const size_t first = size_t(rng.uniform_index(n));
        cx[0] = px[first];
        cy[0] = py[first];
        for (uint32_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double d = dist2(i, cx[c - 1], cy[c - 1]);
                if (d < best_d2[i]) best_d2[i] = d;
                total += best_d2[i];
            }
            size_t chosen = 0;
            if (total > 0.0) {
                const double r = rng.uniform() * total;
                double acc = 0.0;
                chosen = n - 1;
                for (size_t i = 0; i < n; ++i) {
                    acc += best_d2[i];
                    if (acc > r) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                // all points coincide with existing centers
                chosen = size_t(rng.uniform_index(n));
            }
            cx[c] = px[chosen];
            cy[c] = py[chosen];
        }
    }

    std::vector<uint32_t> assign(n, 0);
    std::vector<double> point_d2(n, 0.0);
    std::vector<size_t> cluster_size(k, 0);

    auto assignment_pass = [&]() {
        const size_t block = 2048;
        const size_t n_blocks = (n + block - 1) / block;
        std::vector<double> partial(n_blocks, 0.0);
        parallel_blocks(n, block, threads, [&](size_t b, size_t begin, size_t end) {
            double local = 0.0;
            for (size_t i = begin; i < end; ++i) {
                uint32_t best_c = 0;
                double best = dist2(i, cx[0], cy[0]);
                for (uint32_t c = 1; c < k; ++c) {
                    const double d = dist2(i, cx[c], cy[c]);
                    if (d < best) {
                        best = d;
                        best_c = c;  // ties keep the smallest cluster id
                    }
                }
                assign[i] = best_c;
                point_d2[i] = best;
                local += best;
            }
            partial[b] = local;
        });
        std::fill(cluster_size.begin(), cluster_size.end(), 0);
        for (size_t i = 0; i < n; ++i) ++cluster_size[assign[i]];
        double inertia = 0.0;
        for (double v : partial) inertia += v;
        return inertia;
    };

    // Moves the farthest point (from a cluster of size >= 2) onto each empty
    // cluster's centroid. Each move strictly lowers inertia.
    auto repair_empty = [&](double inertia) {
        for (uint32_t c = 0; c < k; ++c) {
            if (cluster_size[c] != 0) continue;
            size_t worst = SIZE_MAX;
            for (size_t i = 0; i < n; ++i) {
                if (cluster_size[assign[i]] < 2) continue;
                if (worst == SIZE_MAX || point_d2[i] > point_d2[worst]) worst = i;
            }
            if (worst == SIZE_MAX) {
                // duplicate-heavy degenerate data: take from the largest cluster
                uint32_t donor = uint32_t(std::max_element(cluster_size.begin(), cluster_size.end()) -
                                          cluster_size.begin());
                for (size_t i = 0; i < n; ++i) {
                    if (assign[i] == donor) {
                        worst = i;
                        break;
                    }
                }
            }
            --cluster_size[assign[worst]];
            inertia -= point_d2[worst];
            assign[worst] = c;
            ++cluster_size[c];
            cx[c] = px[worst];
            cy[c] = py[worst];
            point_d2[worst] = 0.0;
            if (diag) ++diag->empty_cluster_repairs;
        }
        return inertia;
    };

    bool converged = false;
    uint32_t iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        double inertia = assignment_pass();
        inertia = repair_empty(inertia);
        if (diag) diag->inertia_per_iteration.push_back(inertia);

        // centroid update
        std::vector<double> sx(k, 0.0), sy(k, 0.0);
        for (size_t i = 0; i < n; ++i) {
            sx[assign[i]] += px[i];
            sy[assign[i]] += py[i];
        }
        double shift = 0.0;
        for (uint32_t c = 0; c < k; ++c) {
            const double nx = sx[c] / double(cluster_size[c]);
            const double ny = sy[c] / double(cluster_size[c]);
            shift += (nx - cx[c]) * (nx - cx[c]) + (ny - cy[c]) * (ny - cy[c]);
            cx[c] = nx;
            cy[c] = ny;
        }
        if (shift < kShiftTolerance) {
            converged = true;
            ++iter;
            break;
        }
    }

    // final membership consistent with the final centroids
    double final_inertia = assignment_pass();
    final_inertia = repair_empty(final_inertia);
    if (diag) {
        diag->inertia_per_iteration.push_back(final_inertia);
        diag->iterations = iter;
        diag->converged = converged;
    }

    Partition part;
    part.strategy = PartitionStrategy::Cluster;
    part.store_fingerprint = store.fingerprint();
    std::vector<std::vector<uint64_t>> members(k);
    for (size_t i = 0; i < n; ++i) members[assign[i]].push_back(store.id_at(i));
    for (uint32_t c = 0; c < k; ++c) {
        Submap s;
        s.submap_id = c;
        std::sort(members[c].begin(), members[c].end());
        s.member_ids = std::move(members[c]);
        s.centroid = GeoPoint::normalized(cx[c], wrap_longitude(cy[c]));
        s.member_mean = detail::mean_of_members(store, s.member_ids);
        part.submaps.push_back(std::move(s));
    }
    return part;
}

struct SubmapSelection {
    uint32_t submap_id = 0;
    bool used_country_fallback = false;
};

/// Maps a prior coordinate to its submap. Country strategy: reverse geocode,
/// falling back to the submap whose member mean is haversine-nearest when the
/// prior's country holds no references. Cluster strategy: argmin centroid
/// under squared Euclidean degrees, the same metric the clustering used; ties
/// go to the smallest submap id.
inline SubmapSelection select_submap(const Partition& partition, const GeoPoint& prior,
                                     const CitiesDb* db = nullptr) {
    if (partition.submaps.empty()) raise(Errc::SpecInvalid, "partition has no submaps");

    if (partition.strategy == PartitionStrategy::Country) {
        if (db == nullptr) {
            raise(Errc::ConfigError, "country submap selection requires a cities db");
        }
        const std::string cc = reverse_geocode(prior, *db);
        if (const Submap* s = partition.find_country(cc)) {
            return {s->submap_id, false};
        }
        const Submap* best = nullptr;
        double best_km = 0.0;
        for (const auto& s : partition.submaps) {
            const double d = haversine_km(prior, s.member_mean).km();
            if (best == nullptr || d < best_km) {
                best = &s;
                best_km = d;
            }
        }
        return {best->submap_id, true};
    }

    const Submap* best = nullptr;
    double best_d2 = 0.0;
    for (const auto& s : partition.submaps) {
        const double dx = prior.lat() - s.centroid.lat();
        const double dy = prior.lon() - s.centroid.lon();
        const double d2 = dx * dx + dy * dy;
        if (best == nullptr || d2 < best_d2) {
            best = &s;
            best_d2 = d2;
        }
    }
    return {best->submap_id, false};
}

// ---- partition file ----------------------------------------------------------
// Versioned text format; doubles use shortest-round-trip decimals so the file
// reloads bit-exact.

inline void save_partition(const Partition& part, const std::string& path) {
    std::string out;
    out += "gprpart 1\n";
    out += std::string("strategy ") + strategy_name(part.strategy) + "\n";
    {
        char buf[19];
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)part.store_fingerprint);
        out += std::string("store_fingerprint ") + buf + "\n";
    }
    out += "submaps " + std::to_string(part.submaps.size()) + "\n";
    for (const auto& s : part.submaps) {
        out += "submap " + std::to_string(s.submap_id);
        if (part.strategy == PartitionStrategy::Country) {
            out += " country " + s.country_code;
        } else {
            out += " centroid " + format_double(s.centroid.lat()) + " " +
                   format_double(s.centroid.lon());
        }
        out += " mean " + format_double(s.member_mean.lat()) + " " +
               format_double(s.member_mean.lon());
        out += " members " + std::to_string(s.member_ids.size()) + "\n";
        for (size_t i = 0; i < s.member_ids.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(s.member_ids[i]);
        }
        out += "\n";
    }
    write_file(path, out);
}

inline Partition load_partition(const std::string& path) {
    const std::string data = read_file(path);
    std::istringstream in(data);
    auto fail = [&](const std::string& what) {
        raise(Errc::ParseError, path + ": " + what);
    };

    std::string word;
    uint32_t version = 0;
    if (!(in >> word >> version) || word != "gprpart") fail("missing gprpart header");
    if (version != 1) raise(Errc::UnsupportedVersion, path + ": partition version " + std::to_string(version));

    Partition part;
    std::string strat;
    if (!(in >> word >> strat) || word != "strategy") fail("missing strategy");
    if (strat == "country") {
        part.strategy = PartitionStrategy::Country;
    } else if (strat == "cluster") {
        part.strategy = PartitionStrategy::Cluster;
    } else {
        fail("unknown strategy '" + strat + "'");
    }

    std::string fp_hex;
    if (!(in >> word >> fp_hex) || word != "store_fingerprint") fail("missing store_fingerprint");
    try {
        part.store_fingerprint = std::stoull(fp_hex, nullptr, 16);
    } catch (const std::exception&) {
        fail("bad store_fingerprint '" + fp_hex + "'");
    }

    size_t count = 0;
    if (!(in >> word >> count) || word != "submaps") fail("missing submap count");

    std::unordered_set<uint64_t> seen_ids;
    for (size_t m = 0; m < count; ++m) {
        Submap s;
        if (!(in >> word >> s.submap_id) || word != "submap") fail("missing submap record");
        std::string rep_kind;
        in >> rep_kind;
        if (part.strategy == PartitionStrategy::Country) {
            if (rep_kind != "country") fail("expected country representative");
            in >> s.country_code;
            if (!valid_country_code(s.country_code)) fail("bad country code " + s.country_code);
        } else {
            if (rep_kind != "centroid") fail("expected centroid representative");
            double lat, lon;
            if (!(in >> lat >> lon)) fail("bad centroid");
            s.centroid = GeoPoint::normalized(lat, lon);
        }
        double mlat, mlon;
        if (!(in >> word >> mlat >> mlon) || word != "mean") fail("missing member mean");
        s.member_mean = GeoPoint::normalized(mlat, mlon);
        if (part.strategy == PartitionStrategy::Country) s.centroid = s.member_mean;

        size_t n_members = 0;
        if (!(in >> word >> n_members) || word != "members") fail("missing member count");
        if (n_members == 0) fail("empty submap " + std::to_string(s.submap_id));
        s.member_ids.resize(n_members);
        for (size_t i = 0; i < n_members; ++i) {
            if (!(in >> s.member_ids[i])) fail("truncated member list");
            if (!seen_ids.insert(s.member_ids[i]).second) {
                fail("id " + std::to_string(s.member_ids[i]) + " appears in two submaps");
            }
            if (i > 0 && s.member_ids[i] <= s.member_ids[i - 1]) {
                fail("member ids not strictly ascending in submap " + std::to_string(s.submap_id));
            }
        }
        part.submaps.push_back(std::move(s));
    }
    return part;
}

}  // namespace gpr
