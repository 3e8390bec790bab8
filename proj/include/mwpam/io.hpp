#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "mwpam/clustering.hpp"
#include "mwpam/report.hpp"
#include "mwpam/tensor.hpp"

namespace mwpam {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Parse failure carrying the source name and 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& message)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + message),
          source_(source),
          line_(line)
    {
    }

    const std::string& source() const { return source_; }
    std::size_t line() const { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

namespace detail {

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool is_comment_or_blank(std::string_view line)
{
    const std::size_t pos = line.find_first_not_of(" \t\r");
    return pos == std::string_view::npos || line[pos] == '#';
}

} // namespace detail

/// Reads a tensor file: a "dims: d1 d2 ... dK" header followed by the
/// row-major entries, whitespace separated. '#' lines are comments.
inline Tensor load_tensor(std::istream& in, const std::string& source)
{
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::size_t> dims;
    while (true) {
        if (!std::getline(in, line)) {
            throw ParseError(source, line_no, "missing 'dims:' header");
        }
        ++line_no;
        if (detail::is_comment_or_blank(line)) continue;
        std::istringstream header(line);
        std::string tag;
        header >> tag;
        if (tag != "dims:") {
            throw ParseError(source, line_no, "expected 'dims:' header, got '" + tag + "'");
        }
        long long d = 0;
        while (header >> d) {
            if (d < 1) {
                throw ParseError(source, line_no, "dimensions must be positive");
            }
            dims.push_back(static_cast<std::size_t>(d));
        }
        if (!header.eof()) {
            throw ParseError(source, line_no, "malformed dimension list");
        }
        if (dims.empty()) {
            throw ParseError(source, line_no, "header declares no dimensions");
        }
        break;
    }

    std::size_t expected = 1;
    for (std::size_t d : dims) expected *= d;

    std::vector<double> values;
    values.reserve(expected);
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_comment_or_blank(line)) continue;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p != end) {
            while (p != end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
            if (p == end) break;
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc{}) {
                throw ParseError(source, line_no,
                                 "cannot parse value '" + std::string(p, end) + "'");
            }
            if (!std::isfinite(v)) {
                throw ParseError(source, line_no, "non-finite value in tensor body");
            }
            if (values.size() == expected) {
                throw ParseError(source, line_no,
                                 "expected " + std::to_string(expected) +
                                     " values per the header, found more");
            }
            values.push_back(v);
            p = res.ptr;
        }
    }
    if (values.size() != expected) {
        throw ParseError(source, line_no,
                         "expected " + std::to_string(expected) + " values per the header, found " +
                             std::to_string(values.size()));
    }
    return Tensor(std::move(dims), std::move(values));
}

inline Tensor load_tensor_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_tensor(in, path);
}

/// Writes the canonical tensor file: header plus one line per run of the
/// last mode, entries in shortest round-trip decimal form.
inline void save_tensor(std::ostream& out, const Tensor& t)
{
    out << "dims:";
    for (std::size_t d : t.dims()) out << ' ' << d;
    out << '\n';
    const std::size_t row = t.dims().back();
    const auto& v = t.values();
    for (std::size_t e = 0; e < v.size(); e += row) {
        for (std::size_t i = 0; i < row; ++i) {
            if (i > 0) out << ' ';
            out << detail::format_double(v[e + i]);
        }
        out << '\n';
    }
}

inline void save_tensor_file(const std::string& path, const Tensor& t)
{
    std::ofstream out(path);
    if (!out) {
        throw ParseError(path, 0, "cannot open file for writing");
    }
    save_tensor(out, t);
}

/// Label files are verbatim: line n labels index n of one mode.
inline std::vector<std::string> load_labels(std::istream& in)
{
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        labels.push_back(line);
    }
    return labels;
}

inline std::vector<std::string> load_label_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    return load_labels(in);
}

inline const char* trace_kind_name(TraceRecord::Kind kind)
{
    return kind == TraceRecord::Kind::swap ? "swap" : "reseed";
}

/// Assembles the RunReport JSON document. `labels` may hold an empty vector
/// for modes without label files; labeled modes annotate each block with its
/// medoids' label strings.
inline nlohmann::json make_run_report(const std::string& method, const Tensor& y,
                                      const ClusterSpec& c, const Clustering& cl,
                                      const EvalReport& eval,
                                      const std::vector<std::vector<std::string>>& labels,
                                      std::uint64_t seed, double wall_time_ms, bool include_trace)
{
    nlohmann::json report;
    report["method"] = method;
    report["dims"] = y.dims();
    report["c"] = c.counts;
    report["medoids"] = cl.medoids;
    report["memberships"] = cl.memberships;
    report["objective"] = cl.objective;
    report["rmse_m"] = eval.rmse_m;
    report["rmse_c"] = eval.rmse_c;
    report["cluster_order"] = eval.cluster_order;
    report["seed"] = seed;
    report["wall_time_ms"] = wall_time_ms;
    report["tool_version"] = std::string(kToolVersion);

    nlohmann::json blocks = nlohmann::json::array();
    for (const BlockSummary& b : eval.blocks) {
        nlohmann::json jb;
        jb["block_labels"] = b.block_labels;
        jb["centroid_score"] = b.centroid_score;
        jb["medoid_score"] = b.medoid_score;
        jb["member_counts"] = b.member_counts;
        bool any_labels = false;
        nlohmann::json medoid_labels = nlohmann::json::array();
        for (std::size_t k = 0; k < b.block_labels.size(); ++k) {
            const std::size_t medoid = cl.medoids[k][b.block_labels[k]];
            if (k < labels.size() && !labels[k].empty()) {
                medoid_labels.push_back(labels[k][medoid]);
                any_labels = true;
            } else {
                medoid_labels.push_back(nullptr);
            }
        }
        if (any_labels) jb["medoid_labels"] = std::move(medoid_labels);
        blocks.push_back(std::move(jb));
    }
    report["blocks"] = std::move(blocks);

    if (include_trace) {
        nlohmann::json trace = nlohmann::json::array();
        for (const TraceRecord& r : cl.trace) {
            trace.push_back({{"kind", trace_kind_name(r.kind)},
                             {"pass", r.pass},
                             {"mode", r.mode},
                             {"swapped_out", r.swapped_out},
                             {"swapped_in", r.swapped_in},
                             {"objective_after", r.objective_after}});
        }
        report["trace"] = std::move(trace);
    }
    return report;
}

/// The subset of a RunReport that cmd_verify needs back.
struct LoadedReport {
    std::string method;
    std::vector<std::size_t> dims;
    ClusterSpec clusters;
    Clustering clustering;
};

inline LoadedReport parse_run_report(const nlohmann::json& report, const std::string& source)
{
    try {
        LoadedReport loaded;
        loaded.method = report.at("method").get<std::string>();
        loaded.dims = report.at("dims").get<std::vector<std::size_t>>();
        loaded.clusters.counts = report.at("c").get<std::vector<std::size_t>>();
        loaded.clustering.medoids =
            report.at("medoids").get<std::vector<std::vector<std::size_t>>>();
        loaded.clustering.memberships =
            report.at("memberships").get<std::vector<std::vector<std::size_t>>>();
        loaded.clustering.objective = report.at("objective").get<double>();
        return loaded;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, 0, std::string("malformed run report: ") + e.what());
    }
}

inline LoadedReport load_run_report_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    nlohmann::json report;
    try {
        in >> report;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
    }
    return parse_run_report(report, path);
}

} // namespace mwpam
