#pragma once

#include "attrib/core.hpp"

#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace attrib::csv {

/// Splits one CSV record. Supports double-quoted fields with "" escapes;
/// returns nullopt on an unterminated quote.
inline std::optional<std::vector<std::string>> split_record(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    bool at_start = true;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && at_start) {
            quoted = true;
            at_start = false;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
            at_start = true;
        } else {
            field.push_back(c);
            at_start = false;
        }
    }
    if (quoted) return std::nullopt;
    out.push_back(std::move(field));
    return out;
}

struct Row {
    int line = 0;
    std::vector<std::string> fields;
};

/// A parsed table: header names mapped to column indices plus data rows.
/// Rows whose field count differs from the header are reported in
/// `report` and skipped; blank lines are ignored.
struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;
    ValidationReport report;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

inline std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

inline Table read(std::istream& in, std::string_view subject) {
    Table t;
    t.report.subject_id = std::string(subject);
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto rec = split_record(line);
        if (!rec) {
            t.report.error("CSV_SYNTAX", "unterminated quoted field", lineno);
            continue;
        }
        for (auto& f : *rec) f = trim(f);
        if (!have_header) {
            t.header = std::move(*rec);
            have_header = true;
            continue;
        }
        if (rec->size() != t.header.size()) {
            t.report.error("CSV_SYNTAX",
                           "expected " + std::to_string(t.header.size()) + " fields, found " +
                               std::to_string(rec->size()),
                           lineno);
            continue;
        }
        t.rows.push_back({lineno, std::move(*rec)});
    }
    if (in.bad()) t.report.error("IO_READ", "stream read failure");
    if (!have_header) t.report.error("CSV_SYNTAX", "missing header row", 1);
    return t;
}

inline Table read_string(std::string_view text, std::string_view subject) {
    std::istringstream in{std::string(text)};
    return read(in, subject);
}

/// Returns false (and records CSV_SYNTAX) if any required column is absent.
inline bool require_columns(Table& t, std::initializer_list<std::string_view> names) {
    bool ok = true;
    if (t.header.empty()) return false;
    for (auto n : names) {
        if (!t.column(n)) {
            t.report.error("CSV_SYNTAX", "missing column '" + std::string(n) + "'", 1);
            ok = false;
        }
    }
    return ok;
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Accumulates CSV text row by row.
class Writer {
public:
    explicit Writer(std::initializer_list<std::string_view> header) {
        bool first = true;
        for (auto h : header) {
            if (!first) out_.push_back(',');
            out_ += escape(h);
            first = false;
        }
        out_.push_back('\n');
    }
    explicit Writer(const std::vector<std::string>& header) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_.push_back(',');
            out_ += escape(header[i]);
        }
        out_.push_back('\n');
    }

    Writer& field(std::string_view s) {
        sep();
        out_ += escape(s);
        return *this;
    }
    Writer& field(double v) {
        sep();
        out_ += format_double(v);
        return *this;
    }
    Writer& field(const Cell& v) {
        sep();
        if (v) out_ += format_double(*v);
        return *this;
    }
    Writer& field(long long v) {
        sep();
        out_ += std::to_string(v);
        return *this;
    }
    Writer& field(std::size_t v) { return field(static_cast<long long>(v)); }
    Writer& field(int v) { return field(static_cast<long long>(v)); }
    Writer& field(bool v) { return field(std::string_view(v ? "true" : "false")); }
    Writer& field(const char* s) { return field(std::string_view(s)); }
    Writer& field(const std::string& s) { return field(std::string_view(s)); }

    Writer& end_row() {
        out_.push_back('\n');
        row_open_ = false;
        return *this;
    }

    const std::string& str() const { return out_; }

private:
    void sep() {
        if (row_open_) out_.push_back(',');
        row_open_ = true;
    }
    std::string out_;
    bool row_open_ = false;
};

} // namespace attrib::csv
