#include "grpnorm/grouped_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace grpnorm {

namespace {

std::string lower_copy(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

ExtReal parse_edge(const std::string& token) {
    std::string t = lower_copy(trim(token));
    if (t == "inf" || t == "+inf" || t == "infinity" || t == "+infinity")
        return std::numeric_limits<double>::infinity();
    if (t == "-inf" || t == "-infinity") return -std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw MalformedEdge("cannot parse edge value '" + token + "'");
    }
    if (pos != t.size() || std::isnan(v))
        throw MalformedEdge("cannot parse edge value '" + token + "'");
    return v;
}

std::string format_edge(ExtReal x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Axis::Axis(std::vector<ExtReal> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw MalformedEdge("axis needs at least 2 edges");
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i) {
        if (std::isnan(edges_[i]) || !(edges_[i] < edges_[i + 1]))
            throw MalformedEdge("axis edges must be strictly increasing");
    }
    for (std::size_t i = 1; i + 1 < edges_.size(); ++i) {
        if (std::isinf(edges_[i])) throw MalformedEdge("interior axis edges must be finite");
    }
}

std::size_t Axis::locate(double x) const {
    if (!(x >= edges_.front() && x < edges_.back()))
        throw IndexOutOfRange("value outside axis range");
    auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
    return static_cast<std::size_t>(it - edges_.begin()) - 1;
}

Rectangle::Rectangle(std::vector<ExtReal> lo, std::vector<ExtReal> hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.empty())
        throw ShapeMismatch("rectangle bounds must have equal, positive dimension");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower[i]) || std::isnan(upper[i]) || !(lower[i] < upper[i]))
            throw MalformedEdge("rectangle requires lower < upper in every dimension");
    }
}

bool Rectangle::contains(const std::vector<double>& x) const {
    if (x.size() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i)
        if (!(x[i] >= lower[i] && x[i] < upper[i])) return false;
    return true;
}

GroupedTable::GroupedTable(std::vector<Axis> axes, std::vector<std::int64_t> counts)
    : axes_(std::move(axes)), counts_(std::move(counts)) {
    if (axes_.empty()) throw ShapeMismatch("table needs at least one axis");
    std::size_t cells = 1;
    for (const auto& a : axes_) cells *= a.bins();
    if (counts_.size() != cells)
        throw ShapeMismatch("count tensor does not match axis bin counts");
    for (auto c : counts_) {
        if (c < 0) throw NegativeCount("negative cell count");
        total_ += c;
    }
    if (total_ < 1) throw ShapeMismatch("table must contain at least one observation");
}

std::vector<std::size_t> GroupedTable::shape() const {
    std::vector<std::size_t> s(dim());
    for (std::size_t i = 0; i < dim(); ++i) s[i] = axes_[i].bins();
    return s;
}

std::vector<std::size_t> GroupedTable::unravel(std::size_t flat) const {
    if (flat >= counts_.size()) throw IndexOutOfRange("flat cell id out of range");
    std::vector<std::size_t> idx(dim());
    for (std::size_t i = dim(); i-- > 0;) {
        idx[i] = flat % axes_[i].bins();
        flat /= axes_[i].bins();
    }
    return idx;
}

std::size_t GroupedTable::ravel(const std::vector<std::size_t>& index) const {
    if (index.size() != dim()) throw IndexOutOfRange("index dimension mismatch");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (index[i] >= axes_[i].bins()) throw IndexOutOfRange("bin index out of range");
        flat = flat * axes_[i].bins() + index[i];
    }
    return flat;
}

std::int64_t GroupedTable::count_at(const std::vector<std::size_t>& index) const {
    return counts_[ravel(index)];
}

Rectangle GroupedTable::cell_rectangle(const std::vector<std::size_t>& index) const {
    if (index.size() != dim()) throw IndexOutOfRange("index dimension mismatch");
    std::vector<ExtReal> lo(dim()), hi(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        if (index[i] >= axes_[i].bins()) throw IndexOutOfRange("bin index out of range");
        lo[i] = axes_[i].lower(index[i]);
        hi[i] = axes_[i].upper(index[i]);
    }
    return Rectangle(std::move(lo), std::move(hi));
}

Rectangle GroupedTable::cell_rectangle(std::size_t flat) const {
    return cell_rectangle(unravel(flat));
}

GroupedTable GroupedTable::marginal(std::size_t d) const {
    if (d >= dim()) throw IndexOutOfRange("marginal dimension out of range");
    std::vector<std::int64_t> sums(axes_[d].bins(), 0);
    for (std::size_t flat = 0; flat < counts_.size(); ++flat) {
        if (counts_[flat] == 0) continue;
        sums[unravel(flat)[d]] += counts_[flat];
    }
    return GroupedTable({axes_[d]}, std::move(sums));
}

std::vector<std::size_t> GroupedTable::occupied_cells() const {
    std::vector<std::size_t> ids;
    for (std::size_t flat = 0; flat < counts_.size(); ++flat)
        if (counts_[flat] > 0) ids.push_back(flat);
    return ids;
}

GroupedTable parse_grouped_csv(std::istream& in, std::size_t dims) {
    if (dims < 1) throw ShapeMismatch("dims must be >= 1");
    std::string line;
    if (!std::getline(in, line)) throw ShapeMismatch("empty CSV");
    // Header row is required; its names are not interpreted beyond arity.
    const std::size_t ncols = 2 * dims + 1;
    if (split_csv_line(line).size() != ncols)
        throw ShapeMismatch("CSV header has wrong number of columns for dims");

    struct Row {
        std::vector<ExtReal> lo, hi;
        std::int64_t count;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != ncols) throw ShapeMismatch("CSV row has wrong number of columns");
        Row r;
        for (std::size_t d = 0; d < dims; ++d) {
            r.lo.push_back(parse_edge(fields[2 * d]));
            r.hi.push_back(parse_edge(fields[2 * d + 1]));
            if (!(r.lo.back() < r.hi.back()))
                throw MalformedEdge("cell with hi <= lo in CSV");
        }
        double cnt;
        try {
            cnt = std::stod(fields[2 * dims]);
        } catch (const std::exception&) {
            throw ShapeMismatch("cannot parse count '" + fields[2 * dims] + "'");
        }
        if (cnt < 0) throw NegativeCount("negative count in CSV");
        if (std::floor(cnt) != cnt) throw ShapeMismatch("non-integer count in CSV");
        r.count = static_cast<std::int64_t>(cnt);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ShapeMismatch("CSV contains no data rows");

    // Reconstruct each axis from the union of edges seen on it.
    std::vector<Axis> axes;
    for (std::size_t d = 0; d < dims; ++d) {
        std::vector<ExtReal> edges;
        for (const auto& r : rows) {
            edges.push_back(r.lo[d]);
            edges.push_back(r.hi[d]);
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        axes.emplace_back(std::move(edges));
    }

    GroupedTable grid(axes, std::vector<std::int64_t>(
                                [&] {
                                    std::size_t c = 1;
                                    for (auto& a : axes) c *= a.bins();
                                    return c;
                                }(),
                                0));
    // Place rows; every grid cell must be hit exactly once.
    std::vector<std::int64_t> counts(grid.cell_count(), 0);
    std::vector<bool> seen(grid.cell_count(), false);
    for (const auto& r : rows) {
        std::vector<std::size_t> idx(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            const auto& e = axes[d].edges();
            auto lo_it = std::lower_bound(e.begin(), e.end(), r.lo[d]);
            auto hi_it = std::lower_bound(e.begin(), e.end(), r.hi[d]);
            if (lo_it == e.end() || *lo_it != r.lo[d] || hi_it == e.end() || *hi_it != r.hi[d] ||
                hi_it - lo_it != 1)
                throw ShapeMismatch("cell edges do not tile the reconstructed grid");
            idx[d] = static_cast<std::size_t>(lo_it - e.begin());
        }
        std::size_t flat = grid.ravel(idx);
        if (seen[flat]) throw ShapeMismatch("duplicate cell in CSV");
        seen[flat] = true;
        counts[flat] = r.count;
    }
    if (rows.size() != grid.cell_count())
        throw ShapeMismatch("CSV rows do not cover the full grid");
    return GroupedTable(std::move(axes), std::move(counts));
}

GroupedTable parse_grouped_csv_string(const std::string& text, std::size_t dims) {
    std::istringstream ss(text);
    return parse_grouped_csv(ss, dims);
}

GroupedTable load_grouped_csv(const std::string& path, std::size_t dims) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open data file: " + path);
    return parse_grouped_csv(in, dims);
}

void write_grouped_csv(std::ostream& out, const GroupedTable& table) {
    const std::size_t d = table.dim();
    if (d == 1) {
        out << "lo,hi,count\n";
    } else {
        for (std::size_t i = 0; i < d; ++i) out << "lo_" << i + 1 << ",hi_" << i + 1 << ",";
        out << "count\n";
    }
    for (std::size_t flat = 0; flat < table.cell_count(); ++flat) {
        auto rect = table.cell_rectangle(flat);
        for (std::size_t i = 0; i < d; ++i)
            out << format_edge(rect.lower[i]) << "," << format_edge(rect.upper[i]) << ",";
        out << table.counts()[flat] << "\n";
    }
}

std::string grouped_csv_string(const GroupedTable& table) {
    std::ostringstream ss;
    write_grouped_csv(ss, table);
    return ss.str();
}

GroupedTable bin_observations(const std::vector<Axis>& axes,
                              const std::vector<std::vector<double>>& data) {
    std::size_t cells = 1;
    for (const auto& a : axes) cells *= a.bins();
    std::vector<std::int64_t> counts(cells, 0);
    GroupedTable probe(axes, [&] {
        auto c = std::vector<std::int64_t>(cells, 0);
        c[0] = 1;  // placeholder to satisfy the n >= 1 invariant while we reuse ravel()
        return c;
    }());
    std::vector<std::size_t> idx(axes.size());
    for (const auto& x : data) {
        if (x.size() != axes.size()) throw ShapeMismatch("observation dimension mismatch");
        for (std::size_t d = 0; d < axes.size(); ++d) idx[d] = axes[d].locate(x[d]);
        counts[probe.ravel(idx)]++;
    }
    return GroupedTable(axes, std::move(counts));
}

}  // namespace grpnorm
