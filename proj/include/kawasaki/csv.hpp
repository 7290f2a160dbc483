#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kawasaki {

// Full-precision, locale-independent double formatting; identical bytes for
// identical values on every run.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

using CsvCell = std::variant<long long, double, std::string>;

// Minimal CSV writer with LF line endings and deterministic formatting.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
        columns_ = header.size();
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<CsvCell>& cells) {
        if (cells.size() != columns_) throw std::runtime_error("CsvWriter: column count mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            if (const auto* v = std::get_if<long long>(&cells[i])) out_ << *v;
            else if (const auto* d = std::get_if<double>(&cells[i])) out_ << format_double(*d);
            else out_ << std::get<std::string>(cells[i]);
        }
        out_ << '\n';
    }

    void close() { out_.close(); }

private:
    std::ofstream out_;
    std::size_t columns_ = 0;
};

}  // namespace kawasaki
