#include "modrwkv/eval/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "modrwkv/core/errors.hpp"

namespace modrwkv {

std::string Table::to_text() const {
    std::vector<std::size_t> width(headers.size(), 0);
    for (std::size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c)
            width[c] = std::max(width[c], row[c].size());

    std::ostringstream os;
    if (!title.empty()) os << title << "\n";
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string& cell = c < row.size() ? row[c] : "";
            os << std::left << std::setw(static_cast<int>(width[c])) << cell;
            if (c + 1 < width.size()) os << "  ";
        }
        os << "\n";
    };
    emit(headers);
    std::vector<std::string> rule;
    rule.reserve(width.size());
    for (std::size_t w : width) rule.push_back(std::string(w, '-'));
    emit(rule);
    for (const auto& row : rows) emit(row);
    return os.str();
}

std::string Table::to_csv() const {
    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) os << ',';
            os << row[c];
        }
        os << '\n';
    };
    emit(headers);
    for (const auto& row : rows) emit(row);
    return os.str();
}

std::string format_double(double v, int precision) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw FormatError("failed writing " + path);
}

}  // namespace modrwkv
