#include "teach/bus/topic.hpp"

#include "teach/common/error.hpp"

#include <vector>

namespace teach::bus {
namespace {

std::vector<std::string_view> split_levels(std::string_view s) {
    std::vector<std::string_view> levels;
    std::size_t start = 0;
    while (true) {
        const auto slash = s.find('/', start);
        if (slash == std::string_view::npos) {
            levels.push_back(s.substr(start));
            return levels;
        }
        levels.push_back(s.substr(start, slash - start));
        start = slash + 1;
    }
}

}  // namespace

void validate_topic(std::string_view topic) {
    if (topic.empty()) {
        throw ValidationError("topic must not be empty");
    }
    if (topic.size() > 65535) {
        throw ValidationError("topic longer than 65535 bytes");
    }
    for (char c : topic) {
        if (c == '+' || c == '#') {
            throw ValidationError("topic \"" + std::string(topic) + "\" contains a wildcard");
        }
        if (c == '\0') {
            throw ValidationError("topic contains NUL");
        }
    }
}

void validate_filter(std::string_view filter) {
    if (filter.empty()) {
        throw ValidationError("topic filter must not be empty");
    }
    if (filter.size() > 65535) {
        throw ValidationError("topic filter longer than 65535 bytes");
    }
    if (filter.find('\0') != std::string_view::npos) {
        throw ValidationError("topic filter contains NUL");
    }
    const auto levels = split_levels(filter);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto level = levels[i];
        if (level.find('#') != std::string_view::npos) {
            if (level.size() != 1 || i + 1 != levels.size()) {
                throw ValidationError("'#' must be the final level in \"" + std::string(filter) + "\"");
            }
        }
        if (level.find('+') != std::string_view::npos && level.size() != 1) {
            throw ValidationError("'+' must occupy a whole level in \"" + std::string(filter) + "\"");
        }
    }
}

bool is_valid_filter(std::string_view filter) noexcept {
    try {
        validate_filter(filter);
        return true;
    } catch (const ValidationError&) {
        return false;
    }
}

bool topic_matches(std::string_view filter, std::string_view topic) {
    validate_filter(filter);
    validate_topic(topic);

    const auto f = split_levels(filter);
    const auto t = split_levels(topic);

    // $SYS-style topics are never matched by a filter starting with a wildcard.
    if (topic.front() == '$' && (f.front() == "+" || f.front() == "#")) {
        return false;
    }

    std::size_t i = 0;
    for (; i < f.size(); ++i) {
        if (f[i] == "#") {
            return true;
        }
        if (i >= t.size()) {
            return false;
        }
        if (f[i] != "+" && f[i] != t[i]) {
            return false;
        }
    }
    return i == t.size();
}

TopicFilter::TopicFilter(std::string pattern) : pattern_(std::move(pattern)) {
    validate_filter(pattern_);
}

bool TopicFilter::matches(std::string_view topic) const {
    return topic_matches(pattern_, topic);
}

}  // namespace teach::bus
