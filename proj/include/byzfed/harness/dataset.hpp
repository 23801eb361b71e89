#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "byzfed/aggregation.hpp"
#include "byzfed/errors.hpp"
#include "byzfed/harness/toy.hpp"
#include "byzfed/local_gpr.hpp"

namespace byzfed {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::string_view trim_ws(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim_ws(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return cells;
}

} // namespace detail

/// Strict numeric CSV reader: header row, comma separated, LF or CRLF line endings.
inline CsvTable parse_csv(std::istream& in, const std::string& source_name) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        if (detail::trim_ws(line).empty()) {
            continue;
        }
        const auto cells = detail::split_commas(line);
        if (table.header.empty()) {
            for (auto c : cells) {
                if (c.empty()) {
                    throw format_error(source_name + ":" + std::to_string(line_no) + ": empty column name");
                }
                table.header.emplace_back(c);
            }
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw format_error(source_name + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(table.header.size()) + " columns, found " +
                               std::to_string(cells.size()));
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto cell = cells[c];
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), row[c]);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(row[c])) {
                throw format_error(source_name + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) +
                                   " ('" + table.header[c] + "'): cannot parse '" + std::string(cell) +
                                   "' as a finite number");
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) {
        throw format_error(source_name + ": missing header row");
    }
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw config_error("cannot open dataset '" + path + "'");
    }
    return parse_csv(in, path);
}

/// Target standardisation applied before training; invert with y = mean + scale * y_std.
struct TargetTransform {
    double mean = 0.0;
    double scale = 1.0;
};

struct LoadedDataset {
    Streams streams;
    std::vector<Input> test_inputs;
    std::vector<double> test_targets;  // standardised
    std::vector<std::string> feature_names;
    std::size_t input_dim = 0;
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;  // remainder that does not divide evenly among agents
    TargetTransform transform;
};

/// Shuffle rows by seed, hold out the first `test_count` as test points, deal the rest
/// round-robin over `n` agents and standardise the target with training statistics.
inline LoadedDataset load_csv(const CsvTable& table, std::size_t n, const std::string& target_column,
                              std::uint64_t seed, std::size_t test_count) {
    const auto target_it = std::find(table.header.begin(), table.header.end(), target_column);
    if (target_it == table.header.end()) {
        throw config_error("target column '" + target_column + "' not found in dataset header");
    }
    if (table.header.size() < 2) {
        throw config_error("dataset needs at least one feature column besides the target");
    }
    if (n == 0) {
        throw std::invalid_argument("agent count must be positive");
    }
    const auto target_idx = static_cast<std::size_t>(target_it - table.header.begin());

    LoadedDataset out;
    out.rows_read = table.rows.size();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c != target_idx) {
            out.feature_names.push_back(table.header[c]);
        }
    }
    out.input_dim = out.feature_names.size();

    if (table.rows.size() < test_count + n) {
        throw config_error("dataset has " + std::to_string(table.rows.size()) + " rows; need at least " +
                           std::to_string(test_count + n) + " for " + std::to_string(test_count) +
                           " test points and one point per agent");
    }

    std::vector<std::size_t> order(table.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
    }

    const std::size_t train_rows = (table.rows.size() - test_count) / n * n;
    out.rows_dropped = table.rows.size() - test_count - train_rows;

    CompensatedSum sum;
    for (std::size_t k = 0; k < train_rows; ++k) {
        sum.add(table.rows[order[test_count + k]][target_idx]);
    }
    out.transform.mean = sum.value() / static_cast<double>(train_rows);
    CompensatedSum sq;
    for (std::size_t k = 0; k < train_rows; ++k) {
        const double d = table.rows[order[test_count + k]][target_idx] - out.transform.mean;
        sq.add(d * d);
    }
    const double var = sq.value() / static_cast<double>(train_rows);
    out.transform.scale = var > 0.0 ? std::sqrt(var) : 1.0;

    const auto split = [&](const std::vector<double>& row) {
        Input z;
        z.reserve(out.input_dim);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c != target_idx) {
                z.push_back(row[c]);
            }
        }
        return std::pair{std::move(z), (row[target_idx] - out.transform.mean) / out.transform.scale};
    };

    for (std::size_t k = 0; k < test_count; ++k) {
        auto [z, y] = split(table.rows[order[k]]);
        out.test_inputs.push_back(std::move(z));
        out.test_targets.push_back(y);
    }
    out.streams.assign(n, {});
    for (std::size_t k = 0; k < train_rows; ++k) {
        auto [z, y] = split(table.rows[order[test_count + k]]);
        out.streams[k % n].push_back(TrainingPoint{std::move(z), y, k / n + 1});
    }
    return out;
}

inline LoadedDataset load_csv(const std::string& path, std::size_t n, const std::string& target_column,
                              std::uint64_t seed, std::size_t test_count) {
    return load_csv(read_csv(path), n, target_column, seed, test_count);
}

} // namespace byzfed
