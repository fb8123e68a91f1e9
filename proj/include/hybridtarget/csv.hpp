#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ht::csv {

/// Comma-separated table with a header row. Lines starting with '#' before
/// the header are kept as comments; blank lines are skipped.
struct Table {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based line number in the source file for each row (for diagnostics).
    std::vector<std::size_t> line_numbers;

    std::optional<std::size_t> column(std::string_view name) const;
    std::size_t require_column(std::string_view name, const std::string& source) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text, const std::string& source = "<memory>");

std::vector<std::string> split_line(std::string_view line);
std::string escape(std::string_view field);

/// Shortest round-trip decimal representation.
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);

/// Write via a temporary file and rename so readers never see a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace ht::csv
