#include "teach/driver/replay.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <thread>

namespace teach::driver {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_number(std::string_view text) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::size_t> find_column(const std::vector<std::string_view>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

double map_label(double raw, const ReplaySource& source, std::size_t line) {
    const bool integral = raw == std::floor(raw);
    if (integral && source.stress_class) {
        return static_cast<int>(raw) == *source.stress_class ? 1.0 : 0.0;
    }
    if (raw >= 0.0 && raw <= 1.0) {
        return raw;
    }
    if (integral) {
        throw ReplayError(line, "label class " + std::to_string(static_cast<long long>(raw)) +
                                    " needs a stress class to map it to [0, 1]");
    }
    throw ReplayError(line, "label must be an integer class or a stress value in [0, 1]");
}

}  // namespace

ReplayError::ReplayError(std::size_t line, const std::string& what)
    : ValidationError(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

ReplayData parse_replay(std::istream& in, const ReplaySource& source) {
    if (!(source.rate_hz > 0)) {
        throw ReplayError(0, "replay rate must be positive");
    }
    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw ReplayError(1, "missing header row");
    }
    const auto header = split(header_line);
    const auto eda_col = find_column(header, source.columns.eda);
    if (!eda_col) {
        throw ReplayError(1, "missing required column '" + source.columns.eda + "'");
    }
    const auto t_col = find_column(header, source.columns.t);
    const auto hr_col = find_column(header, source.columns.hr);
    const auto label_col = find_column(header, source.columns.label);

    ReplayData data;
    data.has_labels = label_col.has_value();
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw ReplayError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                           std::to_string(cells.size()));
        }
        auto number = [&](std::size_t col, const std::string& name) {
            const auto v = parse_number(cells[col]);
            if (!v) {
                throw ReplayError(line_no, "column '" + name + "': cannot parse '" + std::string(cells[col]) + "'");
            }
            return *v;
        };
        ReplayRow row;
        row.eda = number(*eda_col, source.columns.eda);
        if (!(row.eda > 0)) {
            throw ReplayError(line_no, "eda must be positive");
        }
        row.t = t_col ? number(*t_col, source.columns.t) : static_cast<double>(data.rows.size()) / source.rate_hz;
        if (!data.rows.empty() && !(row.t > data.rows.back().t)) {
            throw ReplayError(line_no, "timestamps must be strictly increasing");
        }
        if (hr_col && !cells[*hr_col].empty()) {
            row.hr = number(*hr_col, source.columns.hr);
        }
        if (label_col) {
            row.label = map_label(number(*label_col, source.columns.label), source, line_no);
        }
        data.rows.push_back(row);
    }
    return data;
}

ReplayData load_replay(const ReplaySource& source) {
    std::ifstream in(source.path);
    if (!in) {
        throw ReplayError(0, "cannot open replay file " + source.path.string());
    }
    return parse_replay(in, source);
}

void play(const ReplayData& data, bool realtime,
          const std::function<void(const SensorSample&, std::optional<double>)>& sink) {
    const auto start = std::chrono::steady_clock::now();
    const double t0 = data.rows.empty() ? 0.0 : data.rows.front().t;
    for (const auto& row : data.rows) {
        if (realtime) {
            std::this_thread::sleep_until(start + std::chrono::duration<double>(row.t - t0));
        }
        sink(SensorSample{row.t, SensorKind::Eda, {{"eda_uS", row.eda}}}, row.label);
    }
}

}  // namespace teach::driver
