#pragma once

namespace marine {

struct GeoPoint {
    double lat = 0.0; ///< degrees
    double lon = 0.0; ///< degrees

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline constexpr double kEarthRadiusM = 6371000.0;

/// Great-circle distance in meters (haversine).
double haversine_m(GeoPoint from, GeoPoint to);

/// Point reached travelling `distance_m` along the great circle with the
/// initial bearing `bearing_deg` (clockwise from north).
GeoPoint destination(GeoPoint origin, double distance_m, double bearing_deg);

/// Snaps a position onto the 1e-7 degree grid carried by the radio frame.
GeoPoint quantize_e7(GeoPoint p);

} // namespace marine
