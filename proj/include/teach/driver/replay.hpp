#pragma once

#include "teach/common/error.hpp"
#include "teach/driver/driver.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace teach::driver {

/// CSV header names for each logical column. Only `eda` is required.
struct ColumnMap {
    std::string t = "t";
    std::string eda = "eda";
    std::string hr = "hr";
    std::string label = "label";
};

struct ReplaySource {
    std::filesystem::path path;
    ColumnMap columns;
    double rate_hz = 4.0;
    // Integer labels other than 0/1 are class ids; rows of this class map
    // to stress 1, every other class to 0.
    std::optional<int> stress_class;
};

struct ReplayRow {
    double t = 0;
    double eda = 0;
    std::optional<double> hr;
    std::optional<double> label;  // in [0, 1]
};

struct ReplayData {
    std::vector<ReplayRow> rows;
    bool has_labels = false;
};

/// Parse failure tied to a line of the input (1-based, header is line 1;
/// 0 for file-level problems).
class ReplayError : public ValidationError {
public:
    ReplayError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Without a time column, row i gets t = i / rate_hz.
ReplayData parse_replay(std::istream& in, const ReplaySource& source);
ReplayData load_replay(const ReplaySource& source);

/// Emits one eda sample per row. With `realtime` the calls are paced to the
/// row timestamps; otherwise they run back to back.
void play(const ReplayData& data, bool realtime,
          const std::function<void(const SensorSample&, std::optional<double> label)>& sink);

}  // namespace teach::driver
