#include "marine/mqtt/topic.hpp"

#include "marine/mqtt/codec.hpp"

namespace marine::mqtt {

namespace {

std::string_view next_level(std::string_view& rest, bool& more)
{
    const auto slash = rest.find('/');
    std::string_view level = rest.substr(0, slash);
    more = slash != std::string_view::npos;
    rest = more ? rest.substr(slash + 1) : std::string_view{};
    return level;
}

} // namespace

bool is_valid_topic_name(std::string_view name)
{
    return !name.empty() && name.size() <= 65535 && name.find_first_of("+#") == std::string_view::npos &&
           is_valid_mqtt_utf8(name);
}

bool is_valid_topic_filter(std::string_view filter)
{
    if (filter.empty() || filter.size() > 65535 || !is_valid_mqtt_utf8(filter)) {
        return false;
    }
    std::string_view rest = filter;
    bool more = true;
    while (more) {
        const auto level = next_level(rest, more);
        if (level.find_first_of("+#") != std::string_view::npos && level.size() != 1) {
            return false;
        }
        if (level == "#" && more) {
            return false;
        }
    }
    return true;
}

bool topic_matches(std::string_view filter, std::string_view name)
{
    if (!name.empty() && name.front() == '$' && !filter.empty() && (filter.front() == '+' || filter.front() == '#')) {
        return false;
    }
    std::string_view f = filter;
    std::string_view n = name;
    bool f_more = true;
    bool n_more = true;
    while (f_more) {
        const auto f_level = next_level(f, f_more);
        if (f_level == "#") {
            return true; // also matches the parent level itself
        }
        if (!n_more) {
            return false;
        }
        const auto n_level = next_level(n, n_more);
        if (f_level != "+" && f_level != n_level) {
            return false;
        }
    }
    return !n_more;
}

} // namespace marine::mqtt
