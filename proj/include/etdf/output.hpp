#pragma once

// Structured output: RFC-4180 CSV (CRLF records, header row, '.' decimal,
// scientific notation with 14 significant digits) and small helpers.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace etdf {

// locale-independent scientific formatting, >= 12 significant digits
inline std::string format_sci(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 13);
    if (res.ec != std::errc{}) throw std::runtime_error("format_sci failed");
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> fields) {
        if (fields.size() != header_.size())
            throw std::runtime_error("CsvWriter: column count mismatch");
        rows_.push_back(std::move(fields));
    }

    std::string str() const {
        std::string out;
        auto emit = [&out](const std::vector<std::string>& f) {
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (i) out += ',';
                out += f[i];
            }
            out += "\r\n";
        };
        emit(header_);
        for (const auto& r : rows_) emit(r);
        return out;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << str();
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

}  // namespace etdf
