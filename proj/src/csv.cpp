#include "surveyforge/csv.hpp"

#include "surveyforge/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace surveyforge::csv {

bool split_record(std::string_view line, std::vector<std::string> &fields) {
    fields.clear();
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return !quoted;
}

Table Table::read(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return parse(in, path);
}

Table Table::parse(std::istream &in, const std::string &source_name) {
    Table table;
    table.source_ = source_name;
    std::string line;
    std::string pending;
    std::size_t line_no = 0;
    std::size_t record_start = 0;
    std::vector<std::string> fields;
    bool have_header = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (pending.empty()) {
            record_start = line_no;
            if (line.empty()) {
                continue;
            }
            pending = line;
        } else {
            pending += '\n';
            pending += line;
        }
        if (!split_record(pending, fields)) {
            continue; // quoted newline, keep reading
        }
        pending.clear();
        if (!have_header) {
            if (!fields.empty() && fields.front().rfind("\xEF\xBB\xBF", 0) == 0) {
                fields.front().erase(0, 3);
            }
            table.header_ = fields;
            for (std::size_t c = 0; c < fields.size(); ++c) {
                if (!table.index_.emplace(fields[c], c).second) {
                    throw ParseError(source_name, record_start, "duplicate column '" + fields[c] + "'");
                }
            }
            have_header = true;
            continue;
        }
        if (fields.size() != table.header_.size()) {
            throw ParseError(source_name, record_start,
                             "expected " + std::to_string(table.header_.size()) + " fields, found " +
                                 std::to_string(fields.size()));
        }
        table.rows_.push_back(fields);
        table.lines_.push_back(record_start);
    }
    if (!pending.empty()) {
        throw ParseError(source_name, record_start, "unterminated quoted field");
    }
    if (!have_header) {
        throw ParseError(source_name, 1, "missing header row");
    }
    return table;
}

std::optional<std::size_t> Table::column(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Table::require_column(std::string_view name) const {
    if (auto c = column(name)) {
        return *c;
    }
    throw ParseError(source_, 1, "missing required column '" + std::string(name) + "'");
}

long Table::as_long(std::size_t r, std::size_t c) const {
    const std::string &text = at(r, c);
    long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ParseError(source_, line(r),
                         "column '" + header_.at(c) + "': expected an integer, found '" + text + "'");
    }
    return value;
}

double Table::as_double(std::size_t r, std::size_t c) const {
    const std::string &text = at(r, c);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ParseError(source_, line(r),
                         "column '" + header_.at(c) + "': expected a number, found '" + text + "'");
    }
    return value;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

std::string format_exact(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string format_2dp(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

void Writer::row(const std::vector<std::string> &fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            out_ << ',';
        }
        out_ << escape(fields[i]);
    }
    out_ << '\n';
}

} // namespace surveyforge::csv
