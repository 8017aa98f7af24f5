#ifndef QCL_IO_HPP
#define QCL_IO_HPP

#include <charconv>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <unistd.h>

#include "core.hpp"
#include "kernel_matrix.hpp"

namespace qcl::io {

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s)
{
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw InvalidArgument("parse-error", "not a number: '" + std::string(s) + "'");
    }
    return x;
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view content)
{
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("io", "cannot write " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw ConfigError("io", "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw ConfigError("io", "cannot rename into " + path.string());
    }
}

/// Comma-delimited table: one header line, then one record per row.
class Table {
public:
    explicit Table(std::vector<std::string> header) : columns_(header.size())
    {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(std::span<const double> values)
    {
        if (values.size() != columns_) throw InvalidArgument("table-width", "row width does not match header");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_double(values[i]);
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }

    std::string str() const { return out_.str(); }

private:
    std::size_t columns_;
    std::ostringstream out_;
};

/// Dense matrix text: first line "n,dt", then n comma-separated rows.
inline std::string format_matrix(const KernelMatrix& k)
{
    std::ostringstream out;
    out << k.size() << ',' << format_double(k.grid().dt()) << '\n';
    const auto& v = k.values();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            if (j) out << ',';
            out << format_double(v(i, j));
        }
        out << '\n';
    }
    return out.str();
}

struct MatrixText {
    std::size_t n;
    double dt;
    Eigen::MatrixXd values;
};

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

inline MatrixText parse_matrix(std::string_view text)
{
    std::vector<std::string_view> lines;
    for (auto l : split(text, '\n'))
        if (!l.empty()) lines.push_back(l);
    if (lines.empty()) throw InvalidArgument("parse-error", "empty matrix text");
    const auto head = split(lines[0], ',');
    if (head.size() != 2) throw InvalidArgument("parse-error", "matrix header must be 'n,dt'");
    std::size_t n = 0;
    const auto res = std::from_chars(head[0].data(), head[0].data() + head[0].size(), n);
    if (res.ec != std::errc()) throw InvalidArgument("parse-error", "bad matrix size");
    MatrixText m{n, parse_double(head[1]), Eigen::MatrixXd(n, n)};
    if (lines.size() != n + 1) throw InvalidArgument("parse-error", "matrix row count does not match header");
    for (std::size_t i = 0; i < n; ++i) {
        const auto cells = split(lines[i + 1], ',');
        if (cells.size() != n) throw InvalidArgument("parse-error", "matrix row width does not match header");
        for (std::size_t j = 0; j < n; ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(cells[j]);
    }
    return m;
}

} // namespace qcl::io

#endif
