#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cfdsim/common.hpp"

namespace cfdsim::csv {

struct Row {
    std::size_t line_no = 0;  // 1-based, header is line 1
    std::string raw;
    std::vector<std::string> fields;
};

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Reads a whole CSV file, validating the exact header. No quoting: the
// schemas used here carry no embedded separators.
inline std::vector<Row> read_file(const std::filesystem::path& path, const std::string& expected_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::string line;
    std::vector<Row> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != expected_header) {
                throw DataError(path.string() + ": expected header '" + expected_header + "', got '" +
                                line + "'");
            }
            continue;
        }
        if (line.empty()) continue;
        Row r;
        r.line_no = line_no;
        r.raw = line;
        r.fields = split_fields(line);
        rows.push_back(std::move(r));
    }
    if (line_no == 0) throw DataError(path.string() + ": empty file");
    return rows;
}

class Writer {
public:
    explicit Writer(std::vector<std::string> header) {
        append_line(header);
    }

    void row(const std::vector<std::string>& fields) { append_line(fields); }

    const std::string& str() const { return buf_; }

private:
    void append_line(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) buf_ += ',';
            buf_ += fields[i];
        }
        buf_ += '\n';
    }
    std::string buf_;
};

// write-then-rename so partially written files never land under the final name
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write file: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace cfdsim::csv
