#pragma once

#include <string_view>

namespace marine::mqtt {

/// Non-empty, valid UTF-8, no '+' or '#'.
bool is_valid_topic_name(std::string_view name);

/// Non-empty, valid UTF-8; '+' occupies a whole level, '#' only as the whole last level.
bool is_valid_topic_filter(std::string_view filter);

/// MQTT wildcard matching. Topics starting with '$' are not matched by a
/// leading wildcard.
bool topic_matches(std::string_view filter, std::string_view name);

} // namespace marine::mqtt
