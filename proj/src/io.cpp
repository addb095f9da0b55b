#include "potpred/io.hpp"

#include <unistd.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string_view>

#include "potpred/errors.hpp"

namespace potpred {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::optional<double> parse_number(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct Table {
    std::vector<std::vector<std::string_view>> rows;
    std::vector<std::size_t> line_numbers;
    std::vector<std::string> storage;
};

// Non-blank lines with the header (if any) removed.
Table read_table(std::istream& is) {
    Table t;
    std::string line;
    std::vector<std::size_t> numbers;
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        if (trim(line).empty()) continue;
        t.storage.push_back(line);
        numbers.push_back(n);
    }
    if (is.bad()) throw IoError("read failure");
    for (std::size_t i = 0; i < t.storage.size(); ++i) {
        auto cells = split(t.storage[i]);
        if (i == 0) {
            bool numeric = false;
            for (auto c : cells) numeric = numeric || parse_number(c).has_value();
            if (!numeric) continue;
        }
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(numbers[i]);
    }
    return t;
}

[[noreturn]] void bad_cell(const std::string& source, std::size_t line, std::string_view cell) {
    std::ostringstream os;
    os << source << ": row " << line << ": non-numeric value '" << cell << "'";
    throw DomainError(os.str());
}

double cell_value(const std::string& source, std::size_t line, std::string_view cell) {
    const auto v = parse_number(cell);
    if (!v) bad_cell(source, line, cell);
    return *v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

}  // namespace

std::vector<double> read_column(std::istream& is, const std::string& source) {
    const Table t = read_table(is);
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t line = t.line_numbers[i];
        if (t.rows[i].size() != 1) {
            std::ostringstream os;
            os << source << ": row " << line << ": expected one column, found " << t.rows[i].size();
            throw DomainError(os.str());
        }
        out.push_back(cell_value(source, line, t.rows[i][0]));
    }
    if (out.empty()) throw DegenerateSampleError(source + ": no observations");
    return out;
}

std::vector<double> read_column_file(const std::string& path) {
    auto in = open_input(path);
    return read_column(in, path);
}

SeriesInput read_series(std::istream& is, const std::string& source) {
    const Table t = read_table(is);
    if (t.rows.empty()) throw DegenerateSampleError(source + ": no observations");
    const std::size_t width = t.rows.front().size();
    if (width != 1 && width != 3) {
        std::ostringstream os;
        os << source << ": expected one or three columns, found " << width;
        throw DomainError(os.str());
    }
    SeriesInput s;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::size_t line = t.line_numbers[i];
        if (r.size() != width) {
            std::ostringstream os;
            os << source << ": row " << line << ": expected " << width << " columns, found " << r.size();
            throw DomainError(os.str());
        }
        const bool last = i + 1 == t.rows.size();
        if (width == 3 && last) {
            if (!r[0].empty()) throw DomainError(source + ": the final row must leave y empty and give the next-step mu_hat, xi_hat");
        } else {
            s.y.push_back(cell_value(source, line, r[0]));
        }
        if (width == 3) {
            s.mu_hat.push_back(cell_value(source, line, r[1]));
            s.xi_hat.push_back(cell_value(source, line, r[2]));
        }
    }
    if (s.y.empty()) throw DegenerateSampleError(source + ": no observations");
    return s;
}

SeriesInput read_series_file(const std::string& path) {
    auto in = open_input(path);
    return read_series(in, path);
}

void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& body) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write " + tmp.string());
            body(out);
            out.flush();
            if (!out) throw IoError("write failure on " + tmp.string());
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) throw IoError("cannot rename into " + path + ": " + ec.message());
    } catch (...) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw;
    }
}

}  // namespace potpred
