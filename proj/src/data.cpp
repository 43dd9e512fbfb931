#include "saifdl/data.hpp"

#include "saifdl/io.hpp"
#include "saifdl/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace saifdl::data {

Dataset generate_classification(std::int64_t n, std::uint64_t seed) {
    if (n <= 0) throw DomainError("generate_classification: n must be positive");
    Dataset ds;
    ds.task = Task::Classification;
    ds.features.resize(n, 2);
    ds.labels.resize(n);
    Rng rng(seed);
    for (Index i = 0; i < n; ++i) {
        const double x1 = rng.next_double();
        const double x2 = rng.next_double();
        ds.features(i, 0) = x1;
        ds.features(i, 1) = x2;
        ds.labels[i] = x1 + x2 > 1.0 ? 1.0 : 0.0;
    }
    return ds;
}

double regression_demo_mean(double x1) { return 3.0 + 1.5 * x1; }

Dataset generate_regression_demo(std::int64_t n, std::uint64_t seed) {
    if (n <= 0) throw DomainError("generate_regression_demo: n must be positive");
    Dataset ds;
    ds.task = Task::Regression;
    ds.features.resize(n, 2);
    ds.labels.resize(n);
    Rng rng(seed);
    for (Index i = 0; i < n; ++i) {
        const double x1 = rng.next_double();
        const double x2 = rng.next_double();
        ds.features(i, 0) = x1;
        ds.features(i, 1) = x2;
        ds.labels[i] = regression_demo_mean(x1) + 0.05 * rng.normal();
    }
    return ds;
}

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
    const std::string content = read_file(path);

    // Physical lines, 1-based; a trailing newline does not add a line.
    std::vector<std::string_view> lines;
    std::string_view rest = content;
    while (!rest.empty()) {
        const std::size_t nl = rest.find('\n');
        if (nl == std::string_view::npos) {
            lines.push_back(rest);
            break;
        }
        std::string_view line = rest.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        rest.remove_prefix(nl + 1);
    }
    if (lines.empty())
        throw ParseError("missing CSV header in " + path.string(), 1, 1);

    const auto header = split_line(lines[0]);
    if (header.size() < 2)
        throw ParseError("CSV header needs at least one feature column and a "
                         "label or target column",
                         1, 1);
    const std::size_t feature_dim = header.size() - 1;
    for (std::size_t j = 0; j < feature_dim; ++j) {
        const std::string expected = "x" + std::to_string(j + 1);
        if (header[j] != expected)
            throw ParseError("expected header column '" + expected +
                                 "', found '" + std::string(header[j]) + "'",
                             1, static_cast<int>(j + 1));
    }
    Dataset ds;
    if (header.back() == "label")
        ds.task = Task::Classification;
    else if (header.back() == "target")
        ds.task = Task::Regression;
    else
        throw ParseError("last header column must be 'label' or 'target', "
                         "found '" + std::string(header.back()) + "'",
                         1, static_cast<int>(header.size()));

    const Index rows = static_cast<Index>(lines.size()) - 1;
    ds.features.resize(rows, static_cast<Index>(feature_dim));
    ds.labels.resize(rows);
    for (Index r = 0; r < rows; ++r) {
        const int line_no = static_cast<int>(r) + 2;
        const auto cells = split_line(lines[static_cast<std::size_t>(r) + 1]);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) +
                                 " columns, found " +
                                 std::to_string(cells.size()),
                             line_no, 1);
        for (std::size_t j = 0; j < feature_dim; ++j) {
            double value = 0.0;
            if (!parse_double(cells[j], value))
                throw ParseError("non-numeric cell '" + std::string(cells[j]) +
                                     "'",
                                 line_no, static_cast<int>(j + 1));
            ds.features(r, static_cast<Index>(j)) = value;
        }
        double label = 0.0;
        if (!parse_double(cells.back(), label))
            throw ParseError("non-numeric cell '" + std::string(cells.back()) +
                                 "'",
                             line_no, static_cast<int>(header.size()));
        if (ds.task == Task::Classification &&
            (label < 0.0 || label != std::floor(label)))
            throw ParseError("class label must be a non-negative integer",
                             line_no, static_cast<int>(header.size()));
        ds.labels[r] = label;
    }
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::string out;
    for (Index j = 0; j < ds.feature_dim(); ++j)
        out += "x" + std::to_string(j + 1) + ",";
    out += ds.task == Task::Classification ? "label" : "target";
    out += "\n";
    for (Index r = 0; r < ds.size(); ++r) {
        for (Index j = 0; j < ds.feature_dim(); ++j) {
            out += format_double(ds.features(r, j));
            out += ",";
        }
        if (ds.task == Task::Classification)
            out += std::to_string(static_cast<std::int64_t>(ds.labels[r]));
        else
            out += format_double(ds.labels[r]);
        out += "\n";
    }
    atomic_write_file(path, out);
}

}  // namespace saifdl::data
