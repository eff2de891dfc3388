#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace surveyforge::csv {

/// A parsed CSV file with a mandatory header row. Fields may be quoted with
/// double quotes; quoted quotes are doubled. Line numbers are 1-based and
/// refer to the physical line where the record starts.
class Table {
public:
    static Table read(const std::string &path);
    static Table parse(std::istream &in, const std::string &source_name);

    const std::vector<std::string> &header() const noexcept { return header_; }
    std::size_t rows() const noexcept { return rows_.size(); }
    const std::vector<std::string> &row(std::size_t r) const { return rows_.at(r); }
    std::size_t line(std::size_t r) const { return lines_.at(r); }
    const std::string &source() const noexcept { return source_; }

    std::optional<std::size_t> column(std::string_view name) const;
    /// Column index or ParseError naming the missing column.
    std::size_t require_column(std::string_view name) const;

    const std::string &at(std::size_t r, std::size_t c) const { return rows_.at(r).at(c); }

    long as_long(std::size_t r, std::size_t c) const;
    double as_double(std::size_t r, std::size_t c) const;

private:
    std::string source_;
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> lines_;
};

/// Splits one CSV record. Returns false if a quoted field is left open.
bool split_record(std::string_view line, std::vector<std::string> &fields);

/// Quotes a field when it contains a separator, quote or newline.
std::string escape(std::string_view field);

/// Shortest round-trip-safe rendering (17 significant digits).
std::string format_exact(double value);
/// Fixed two-decimal rendering for human tables.
std::string format_2dp(double value);

/// Writes header and rows with '\n' line endings.
class Writer {
public:
    explicit Writer(std::ostream &out) : out_{out} {}
    void row(const std::vector<std::string> &fields);

private:
    std::ostream &out_;
};

} // namespace surveyforge::csv
