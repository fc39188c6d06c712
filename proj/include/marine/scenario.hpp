#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "marine/gateway.hpp"
#include "marine/node_sim.hpp"
#include "marine/pathloss.hpp"

namespace marine {

enum class EnvironmentPreset { open, urban };

struct Scenario {
    int scenario_version = 1;
    std::uint64_t seed = 0;
    double duration_s = 0.0;
    double tick_s = 1.0;
    std::vector<NodeConfig> nodes;
    GatewayConfig gateway;          ///< radio parameters live in gateway.radio
    PathLossModel channel;
    EnvironmentPreset environment = EnvironmentPreset::open;
    double urban_extra_loss_db = 12.0;

    double extra_loss_db() const { return environment == EnvironmentPreset::urban ? urban_extra_loss_db : 0.0; }

    /// Throws ScenarioError naming the first violated field.
    void validate() const;
};

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::string field, int line, const std::string& message);

    const std::string& field() const { return field_; }
    int line() const { return line_; } ///< 0 when unknown

private:
    std::string field_;
    int line_;
};

/// Parses a JSON scenario, applies defaults for omitted fields and validates.
/// Node positions are snapped to the 1e-7 degree grid the radio frame carries.
/// Nodes may be placed by "lat"/"lon" or by "distance_m"/"bearing_deg" from
/// the gateway.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

std::string_view to_string(EnvironmentPreset p);

} // namespace marine
