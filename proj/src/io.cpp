#include "loocmi/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "loocmi/error.hpp"

namespace loocmi::io {

std::string format_double(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view field, const std::string& file, std::size_t line) {
    const std::string_view f = trim(field);
    if (f == "nan" || f == "inf" || f == "-inf") {
        throw ParseError(file, line, "non-finite value '" + std::string(f) + "'");
    }
    double value = 0.0;
    const char* begin = f.data();
    const char* end = f.data() + f.size();
    if (!f.empty() && *begin == '+') {
        ++begin;
    }
    const auto res = std::from_chars(begin, end, value);
    if (f.empty() || res.ec != std::errc() || res.ptr != end) {
        throw ParseError(file, line, "expected a number, got '" + std::string(f) + "'");
    }
    return value;
}

long long parse_int(std::string_view field, const std::string& file, std::size_t line) {
    const std::string_view f = trim(field);
    long long value = 0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
    if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(file, line, "expected an integer, got '" + std::string(f) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path.string(), 0, "cannot open file");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace loocmi::io
