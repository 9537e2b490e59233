#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "gpr/errors.hpp"

namespace gpr {

// IUGG mean Earth radius. Every great-circle distance in this library is
// computed on a sphere of this radius.
inline constexpr double EARTH_RADIUS_KM = 6371.0088;

inline constexpr double PI = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * (PI / 180.0); }

/// Wraps a longitude in degrees into [-180, +180). Values already in range
/// pass through bit-exact.
inline double wrap_longitude(double lon) {
    if (lon >= -180.0 && lon < 180.0) return lon;
    double w = std::fmod(lon + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    w -= 180.0;
    if (w >= 180.0) w = -180.0;  // fmod rounding can graze the upper edge
    return w;
}

/// Validated latitude/longitude pair in degrees.
/// lat in [-90, +90]; lon normalized into [-180, +180) at construction.
class GeoPoint {
public:
    GeoPoint() = default;

    /// Validating constructor: throws OutOfRangeLatitude if |lat| > 90 or a
    /// coordinate is non-finite; wraps lon.
    static GeoPoint normalized(double lat, double lon) {
        auto p = try_normalized(lat, lon);
        if (!p) {
            raise(Errc::OutOfRangeLatitude,
                  "latitude " + std::to_string(lat) + " outside [-90, +90]");
        }
        return *p;
    }

    /// Non-throwing variant; empty when the latitude is unusable.
    static std::optional<GeoPoint> try_normalized(double lat, double lon) {
        if (!std::isfinite(lat) || !std::isfinite(lon)) return std::nullopt;
        if (lat < -90.0 || lat > 90.0) return std::nullopt;
        GeoPoint p;
        p.lat_ = lat;
        p.lon_ = wrap_longitude(lon);
        return p;
    }

    double lat() const { return lat_; }
    double lon() const { return lon_; }

    bool operator==(const GeoPoint& o) const { return lat_ == o.lat_ && lon_ == o.lon_; }

private:
    double lat_ = 0.0;
    double lon_ = 0.0;
};

/// Non-negative great-circle distance; bounded by pi * EARTH_RADIUS_KM.
struct DistanceKm {
    double value = 0.0;
    double km() const { return value; }
    auto operator<=>(const DistanceKm&) const = default;
};

/// Great-circle distance between two points, arcsin-of-sqrt haversine form.
/// The sqrt argument is clamped to [0, 1] so antipodal inputs stay finite.
inline DistanceKm haversine_km(const GeoPoint& a, const GeoPoint& b) {
    const double phi1 = deg2rad(a.lat());
    const double phi2 = deg2rad(b.lat());
    const double dphi = deg2rad(b.lat() - a.lat());
    const double dlam = deg2rad(b.lon() - a.lon());

    const double sp = std::sin(dphi / 2.0);
    const double sl = std::sin(dlam / 2.0);
    double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    if (h > 1.0) h = 1.0;
    if (h < 0.0) h = 0.0;
    return DistanceKm{2.0 * EARTH_RADIUS_KM * std::asin(std::sqrt(h))};
}

/// Point reached from `start` after travelling `distance_km` along the given
/// initial bearing (degrees clockwise from north) on the sphere.
inline GeoPoint destination_point(const GeoPoint& start, double bearing_deg, double distance_km) {
    const double delta = distance_km / EARTH_RADIUS_KM;
    const double theta = deg2rad(bearing_deg);
    const double phi1 = deg2rad(start.lat());
    const double lam1 = deg2rad(start.lon());

    double sinphi2 = std::sin(phi1) * std::cos(delta) +
                     std::cos(phi1) * std::sin(delta) * std::cos(theta);
    if (sinphi2 > 1.0) sinphi2 = 1.0;
    if (sinphi2 < -1.0) sinphi2 = -1.0;
    const double phi2 = std::asin(sinphi2);
    const double lam2 = lam1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                          std::cos(delta) - std::sin(phi1) * sinphi2);

    return GeoPoint::normalized(phi2 * (180.0 / PI), lam2 * (180.0 / PI));
}

}  // namespace gpr
