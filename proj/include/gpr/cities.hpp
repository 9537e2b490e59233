#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/io_util.hpp"

namespace gpr {

struct CityEntry {
    std::string name;
    GeoPoint location;
    std::string country_code;  // ISO-3166 alpha-2, two uppercase ASCII letters
};

inline bool valid_country_code(const std::string& cc) {
    return cc.size() == 2 && cc[0] >= 'A' && cc[0] <= 'Z' && cc[1] >= 'A' && cc[1] <= 'Z';
}

/// Offline nearest-city database. Lookup is exact under haversine distance:
/// entries are kept sorted by latitude and scanned outward from the query
/// latitude, pruning with the bound  distance >= R * |dlat|  which holds for
/// any great circle. Ties resolve to the lexicographically smallest
/// (country_code, name).
class CitiesDb {
public:
    explicit CitiesDb(std::vector<CityEntry> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) raise(Errc::SpecInvalid, "cities db must have at least one entry");
        for (const auto& e : entries_) {
            if (!valid_country_code(e.country_code)) {
                raise(Errc::ParseError, "bad country code '" + e.country_code + "' for " + e.name);
            }
        }
        std::sort(entries_.begin(), entries_.end(), [](const CityEntry& a, const CityEntry& b) {
            if (a.location.lat() != b.location.lat()) return a.location.lat() < b.location.lat();
            if (a.country_code != b.country_code) return a.country_code < b.country_code;
            return a.name < b.name;
        });
    }

    /// GeoNames-style TSV: name <TAB> lat <TAB> lon <TAB> country_code.
    /// One header line permitted.
    static CitiesDb load_tsv(const std::string& path) {
        std::string data = read_file(path);
        std::vector<CityEntry> entries;
        size_t line_no = 0;
        for (std::string_view line : split(data, '\n')) {
            ++line_no;
            line = trim(line);
            if (line.empty()) continue;
            auto cols = split(line, '\t');
            if (cols.size() != 4) {
                raise(Errc::ParseError,
                      path + ":" + std::to_string(line_no) + ": expected 4 tab-separated columns");
            }
            auto lat = parse_double(cols[1]);
            auto lon = parse_double(cols[2]);
            if (!lat || !lon) {
                if (line_no == 1 && entries.empty()) continue;  // header line
                raise(Errc::ParseError,
                      path + ":" + std::to_string(line_no) + ": non-numeric coordinates");
            }
            auto loc = GeoPoint::try_normalized(*lat, *lon);
            if (!loc) {
                raise(Errc::ParseError,
                      path + ":" + std::to_string(line_no) + ": latitude out of range");
            }
            entries.push_back(
                {std::string(trim(cols[0])), *loc, std::string(trim(cols[3]))});
        }
        return CitiesDb(std::move(entries));
    }

    size_t size() const { return entries_.size(); }
    const std::vector<CityEntry>& entries() const { return entries_; }

    const CityEntry& nearest(const GeoPoint& p) const {
        // prune slack absorbs haversine rounding against the analytic bound
        constexpr double kSlackKm = 1e-6;

        auto lat_less = [](const CityEntry& e, double lat) { return e.location.lat() < lat; };
        const auto start =
            std::lower_bound(entries_.begin(), entries_.end(), p.lat(), lat_less) -
            entries_.begin();

        ptrdiff_t up = ptrdiff_t(start);            // walks toward higher latitudes
        ptrdiff_t down = ptrdiff_t(start) - 1;      // walks toward lower latitudes
        const CityEntry* best = nullptr;
        double best_km = 0.0;

        auto lat_bound_km = [&](ptrdiff_t i) {
            return EARTH_RADIUS_KM * deg2rad(std::abs(entries_[size_t(i)].location.lat() - p.lat()));
        };
        auto consider = [&](ptrdiff_t i) {
            const CityEntry& e = entries_[size_t(i)];
            const double d = haversine_km(p, e.location).km();
            if (best == nullptr || d < best_km ||
                (d == best_km && std::tie(e.country_code, e.name) <
                                     std::tie(best->country_code, best->name))) {
                best = &e;
                best_km = d;
            }
        };

        while (true) {
            const bool up_ok = up < ptrdiff_t(entries_.size()) &&
                               (best == nullptr || lat_bound_km(up) <= best_km + kSlackKm);
            const bool down_ok =
                down >= 0 && (best == nullptr || lat_bound_km(down) <= best_km + kSlackKm);
            if (!up_ok && !down_ok) break;
            if (up_ok && (!down_ok || lat_bound_km(up) <= lat_bound_km(down))) {
                consider(up++);
            } else {
                consider(down--);
            }
        }
        return *best;
    }

private:
    std::vector<CityEntry> entries_;
};

/// Country of the db entry nearest to `point` under haversine distance.
inline std::string reverse_geocode(const GeoPoint& point, const CitiesDb& db) {
    return db.nearest(point).country_code;
}

}  // namespace gpr
