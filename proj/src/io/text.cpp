#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "confclust/io.hpp"

namespace confclust::io {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InvalidArgument("not a number: '" + std::string(s) + "'");
    return v;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Non-comment, non-blank lines.
std::vector<std::string_view> data_lines(const std::string& text) {
    std::vector<std::string_view> lines;
    std::string_view all(text);
    std::size_t start = 0;
    while (start <= all.size()) {
        std::size_t end = all.find('\n', start);
        if (end == std::string_view::npos) end = all.size();
        std::string_view line = all.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty() && line.front() != '#' && line.find_first_not_of(" \t") != std::string_view::npos)
            lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

bool looks_numeric(std::string_view s) {
    try {
        parse_double(s);
        return true;
    } catch (const InvalidArgument&) {
        return false;
    }
}

void append_comment(std::string& out, const std::string& comment) {
    if (comment.empty()) return;
    out += "# ";
    out += comment;
    out += '\n';
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text) {
    const auto lines = data_lines(text);
    if (lines.size() < 2) throw InvalidArgument("dataset CSV needs a header and at least one row");
    const std::size_t p = split(lines[0], ',').size();
    Matrix X(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(p));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r], ',');
        if (fields.size() != p)
            throw InvalidArgument("dataset CSV row " + std::to_string(r) + " has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(p));
        for (std::size_t c = 0; c < p; ++c)
            X(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = parse_double(fields[c]);
    }
    return Dataset(std::move(X));
}

std::string dataset_csv(const Dataset& X, const std::string& comment) {
    std::string out;
    append_comment(out, comment);
    for (int j = 0; j < X.p(); ++j) {
        if (j) out += ',';
        out += "x" + std::to_string(j + 1);
    }
    out += '\n';
    for (int i = 0; i < X.n(); ++i) {
        for (int j = 0; j < X.p(); ++j) {
            if (j) out += ',';
            out += format_double(X.matrix()(i, j));
        }
        out += '\n';
    }
    return out;
}

Labeling parse_labels_csv(const std::string& text, int K) {
    auto lines = data_lines(text);
    if (!lines.empty() && !looks_numeric(lines[0])) lines.erase(lines.begin());
    std::vector<int> labels;
    labels.reserve(lines.size());
    int max_label = 0;
    for (std::string_view line : lines) {
        const double v = parse_double(line);
        if (v != std::floor(v) || v < 1) throw InvalidArgument("labels must be positive integers, got '" + std::string(line) + "'");
        labels.push_back(static_cast<int>(v) - 1);
        max_label = std::max(max_label, static_cast<int>(v));
    }
    return Labeling(std::move(labels), K > 0 ? K : std::max(1, max_label));
}

std::string labels_csv(const Labeling& Y, const std::string& comment) {
    std::string out;
    append_comment(out, comment);
    out += "label\n";
    for (int i = 0; i < Y.size(); ++i) out += std::to_string(Y[i] + 1) + '\n';
    return out;
}

std::string members_field(const ConfidenceSet& s) {
    std::string out;
    for (std::size_t i = 0; i < s.members().size(); ++i) {
        if (i) out += ';';
        out += std::to_string(s.members()[i] + 1);
    }
    return out;
}

std::string sets_csv(const std::vector<ConfidenceSet>& sets, const std::string& comment) {
    std::string out;
    append_comment(out, comment);
    out += "row,set_size,members\n";
    for (std::size_t i = 0; i < sets.size(); ++i)
        out += std::to_string(i + 1) + ',' + std::to_string(sets[i].size()) + ',' + members_field(sets[i]) + '\n';
    return out;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("error writing '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path + "'");
    }
}

Dataset read_dataset_csv(const std::string& path) { return parse_dataset_csv(read_text(path)); }

Labeling read_labels_csv(const std::string& path, int K) { return parse_labels_csv(read_text(path), K); }

}  // namespace confclust::io
