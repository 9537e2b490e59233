#include <catch_amalgamated.hpp>

#include <cmath>

#include "gpr/geo.hpp"
#include "gpr/rng.hpp"

using namespace gpr;

namespace {

// Expected distances computed with an independent high-precision spherical
// geodesic oracle (vector formulation, R = 6371.0088 km), frozen here.
struct CityPair {
    const char* name;
    double lat1, lon1, lat2, lon2;
    double km;
};

constexpr CityPair kCityPairs[] = {
    {"Paris-London", 48.8566, 2.3522, 51.5074, -0.1278, 343.5565},
    {"NewYork-LosAngeles", 40.7128, -74.006, 34.0522, -118.2437, 3935.7517},
    {"Tokyo-Sydney", 35.6762, 139.6503, -33.8688, 151.2093, 7825.8294},
    {"Nairobi-Cairo", -1.2921, 36.8219, 30.0444, 31.2357, 3534.4916},
    {"Moscow-Beijing", 55.7558, 37.6173, 39.9042, 116.4074, 5793.8083},
    {"SaoPaulo-BuenosAires", -23.5505, -46.6333, -34.6037, -58.3816, 1674.8722},
    {"Reykjavik-Oslo", 64.1466, -21.9426, 59.9139, 10.7522, 1747.0481},
    {"Singapore-Jakarta", 1.3521, 103.8198, -6.2088, 106.8456, 905.3553},
    {"Anchorage-Honolulu", 61.2181, -149.9003, 21.3069, -157.8583, 4480.6530},
    {"CapeTown-Perth", -33.9249, 18.4241, -31.9505, 115.8605, 8697.2646},
    {"Delhi-Mumbai", 28.7041, 77.1025, 19.076, 72.8777, 1153.2429},
    {"Berlin-Madrid", 52.52, 13.405, 40.4168, -3.7038, 1869.1484},
    {"Toronto-MexicoCity", 43.6532, -79.3832, 19.4326, -99.1332, 3261.0484},
    {"Auckland-Santiago", -36.8485, 174.7633, -33.4489, -70.6693, 9670.0516},
    {"Helsinki-Athens", 60.1699, 24.9384, 37.9838, 23.7275, 2468.4620},
    {"Vancouver-Halifax", 49.2827, -123.1207, 44.6488, -63.5752, 4429.6764},
    {"Lagos-Accra", 6.5244, 3.3792, 5.6037, -0.187, 407.3933},
    {"Seoul-Taipei", 37.5665, 126.978, 25.033, 121.5654, 1484.7490},
    {"Lisbon-Casablanca", 38.7223, -9.1393, 33.5731, -7.5898, 589.1979},
    {"Suva-Apia", -18.1248, 178.4501, -13.8506, -171.7513, 1149.8337},
};

GeoPoint random_point(Rng& rng) {
    return GeoPoint::normalized(rng.uniform(-90.0, 90.0), rng.uniform(-180.0, 180.0));
}

}  // namespace

TEST_CASE("haversine matches the independent geodesic oracle on city pairs") {
    for (const auto& p : kCityPairs) {
        const auto a = GeoPoint::normalized(p.lat1, p.lon1);
        const auto b = GeoPoint::normalized(p.lat2, p.lon2);
        INFO(p.name);
        CHECK(std::abs(haversine_km(a, b).km() - p.km) < 0.5);
    }
}

TEST_CASE("haversine on identical points is zero") {
    const auto paris = GeoPoint::normalized(48.8566, 2.3522);
    CHECK(haversine_km(paris, paris).km() == 0.0);
}

TEST_CASE("antipodal equatorial pair spans half the great circle") {
    const auto a = GeoPoint::normalized(0.0, 0.0);
    const auto b = GeoPoint::normalized(0.0, 180.0);
    // pi * 6371.0088 = 20015.1144...; no NaN at the antipode
    CHECK(std::abs(haversine_km(a, b).km() - PI * EARTH_RADIUS_KM) < 0.01);
    CHECK(std::abs(haversine_km(a, b).km() - 20015.114) < 0.01);
}

TEST_CASE("longitude normalization") {
    const auto p = GeoPoint::normalized(45.0, 200.0);
    CHECK(p.lat() == 45.0);
    CHECK(p.lon() == -160.0);

    const auto q = GeoPoint::normalized(45.0, 45.0);
    CHECK(q.lat() == 45.0);
    CHECK(q.lon() == 45.0);

    CHECK(GeoPoint::normalized(12.0, 180.0).lon() == -180.0);
    CHECK(GeoPoint::normalized(12.0, -180.0).lon() == -180.0);
}

TEST_CASE("latitude out of range is rejected") {
    CHECK_THROWS_MATCHES(GeoPoint::normalized(91.0, 0.0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == Errc::OutOfRangeLatitude;
                         }));
    CHECK_FALSE(GeoPoint::try_normalized(-90.5, 0.0).has_value());
    CHECK_FALSE(GeoPoint::try_normalized(std::nan(""), 0.0).has_value());
    CHECK_FALSE(GeoPoint::try_normalized(10.0, std::nan("")).has_value());
    CHECK(GeoPoint::try_normalized(90.0, 0.0).has_value());
    CHECK(GeoPoint::try_normalized(-90.0, 0.0).has_value());
}

TEST_CASE("haversine symmetry, bounds and triangle inequality") {
    Rng rng(20240817);
    const double max_km = PI * EARTH_RADIUS_KM + 1e-6;
    for (int i = 0; i < 5000; ++i) {
        const auto a = random_point(rng);
        const auto b = random_point(rng);
        const auto c = random_point(rng);
        const double ab = haversine_km(a, b).km();
        const double ba = haversine_km(b, a).km();
        const double ac = haversine_km(a, c).km();
        const double bc = haversine_km(b, c).km();
        REQUIRE(std::abs(ab - ba) < 1e-9);
        REQUIRE(ab >= 0.0);
        REQUIRE(ab <= max_km);
        REQUIRE(ac <= ab + bc + 1e-6);
    }
}

TEST_CASE("longitude normalization is idempotent") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double lat = rng.uniform(-90.0, 90.0);
        const double lon = rng.uniform(-1000.0, 1000.0);
        const auto once = GeoPoint::normalized(lat, lon);
        const auto twice = GeoPoint::normalized(once.lat(), once.lon());
        REQUIRE(once == twice);
        REQUIRE(once.lon() >= -180.0);
        REQUIRE(once.lon() < 180.0);
    }
}

TEST_CASE("destination_point lands at the requested distance") {
    Rng rng(99);
    for (int i = 0; i < 500; ++i) {
        const auto start = random_point(rng);
        const double bearing = rng.bearing_deg();
        const double dist = rng.uniform(0.1, 15000.0);
        const auto end = destination_point(start, bearing, dist);
        REQUIRE(haversine_km(start, end).km() == Catch::Approx(dist).epsilon(1e-6));
    }
}
