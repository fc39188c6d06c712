#include "marine/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace marine {

namespace {

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

} // namespace

double haversine_m(GeoPoint from, GeoPoint to)
{
    const double phi1 = deg2rad(from.lat);
    const double phi2 = deg2rad(to.lat);
    const double dphi = phi2 - phi1;
    const double dlambda = deg2rad(to.lon - from.lon);
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

GeoPoint destination(GeoPoint origin, double distance_m, double bearing_deg)
{
    const double delta = distance_m / kEarthRadiusM;
    const double theta = deg2rad(bearing_deg);
    const double phi1 = deg2rad(origin.lat);
    const double lambda1 = deg2rad(origin.lon);
    const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) +
                                  std::cos(phi1) * std::sin(delta) * std::cos(theta));
    const double lambda2 = lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                                std::cos(delta) - std::sin(phi1) * std::sin(phi2));
    double lon = rad2deg(lambda2);
    // normalize to [-180, 180)
    lon = std::fmod(lon + 540.0, 360.0) - 180.0;
    return {rad2deg(phi2), lon};
}

GeoPoint quantize_e7(GeoPoint p)
{
    return {static_cast<double>(std::llround(p.lat * 1e7)) / 1e7,
            static_cast<double>(std::llround(p.lon * 1e7)) / 1e7};
}

} // namespace marine
