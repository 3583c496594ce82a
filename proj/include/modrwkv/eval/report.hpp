#pragma once

#include <string>
#include <vector>

namespace modrwkv {

// Small table helper: aligned text for humans, CSV (comma-separated, header
// row, LF endings) for machines.
struct Table {
    std::string title;
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    std::string to_text() const;
    std::string to_csv() const;
};

std::string format_double(double v, int precision = 6);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace modrwkv
