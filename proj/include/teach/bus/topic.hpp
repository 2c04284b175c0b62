#pragma once

#include <string>
#include <string_view>

namespace teach::bus {

/// Throws ValidationError unless `topic` is a legal PUBLISH topic name:
/// non-empty, no `+`/`#` wildcards, no NUL, at most 65535 bytes.
void validate_topic(std::string_view topic);

/// Throws ValidationError unless `filter` is a legal subscription filter:
/// `+` occupies a whole level, `#` appears once and only as the last level.
void validate_filter(std::string_view filter);

bool is_valid_filter(std::string_view filter) noexcept;

/// MQTT 3.1.1 wildcard matching. `#` also matches its parent level
/// ("a/#" matches "a"). Topics starting with `$` are not matched by a
/// leading wildcard. Validates the filter first.
bool topic_matches(std::string_view filter, std::string_view topic);

/// A validated subscription pattern.
class TopicFilter {
public:
    explicit TopicFilter(std::string pattern);

    const std::string& pattern() const noexcept { return pattern_; }
    bool matches(std::string_view topic) const;

    friend bool operator==(const TopicFilter&, const TopicFilter&) = default;
    friend auto operator<=>(const TopicFilter&, const TopicFilter&) = default;

private:
    std::string pattern_;
};

}  // namespace teach::bus
