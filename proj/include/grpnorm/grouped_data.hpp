#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "grpnorm/errors.hpp"

namespace grpnorm {

// Extended reals are plain doubles: +-infinity are first-class values with the
// usual total order. Only NaN is excluded.
using ExtReal = double;

/// Parses a bin edge: a decimal number or "inf"/"+inf"/"-inf" (case-insensitive).
ExtReal parse_edge(const std::string& token);

/// Formats an edge so that parse_edge round-trips bit-exactly ("%.17g", or
/// "inf"/"-inf" for the infinities).
std::string format_edge(ExtReal x);

/// One axis of a grouped-data partition: k+1 strictly increasing edges
/// defining k half-open bins [e_i, e_{i+1}). Interior edges are finite; the
/// first edge may be -inf and the last +inf.
class Axis {
  public:
    explicit Axis(std::vector<ExtReal> edges);

    std::size_t bins() const { return edges_.size() - 1; }
    const std::vector<ExtReal>& edges() const { return edges_; }
    ExtReal lower(std::size_t bin) const { return edges_.at(bin); }
    ExtReal upper(std::size_t bin) const { return edges_.at(bin + 1); }

    /// Bin index for a value (half-open convention: boundary goes up).
    /// Requires the axis to cover x; with infinite outer edges it always does.
    std::size_t locate(double x) const;

  private:
    std::vector<ExtReal> edges_;
};

/// Axis-aligned rectangle with extended-real bounds, lower < upper per
/// dimension. Cells of a GroupedTable are half-open [lower, upper) rectangles.
struct Rectangle {
    std::vector<ExtReal> lower;
    std::vector<ExtReal> upper;

    Rectangle(std::vector<ExtReal> lo, std::vector<ExtReal> hi);
    std::size_t dim() const { return lower.size(); }
    bool contains(const std::vector<double>& x) const;
};

/// A d-dimensional table of non-negative counts over a product partition.
/// Counts are stored row-major (last axis fastest). Immutable after
/// construction; safe to share across threads.
class GroupedTable {
  public:
    GroupedTable(std::vector<Axis> axes, std::vector<std::int64_t> counts);

    std::size_t dim() const { return axes_.size(); }
    const std::vector<Axis>& axes() const { return axes_; }
    const Axis& axis(std::size_t d) const { return axes_.at(d); }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    std::int64_t total() const { return total_; }
    std::size_t cell_count() const { return counts_.size(); }

    std::vector<std::size_t> shape() const;
    /// Multi-index of the flat cell id (row-major).
    std::vector<std::size_t> unravel(std::size_t flat) const;
    std::size_t ravel(const std::vector<std::size_t>& index) const;

    std::int64_t count_at(const std::vector<std::size_t>& index) const;

    /// Half-open rectangle of one cell.
    Rectangle cell_rectangle(const std::vector<std::size_t>& index) const;
    Rectangle cell_rectangle(std::size_t flat) const;

    /// 1-D table of counts summed over all other dimensions (dim is 0-based).
    GroupedTable marginal(std::size_t dim) const;

    /// Cell ids with positive counts, in row-major order.
    std::vector<std::size_t> occupied_cells() const;

  private:
    std::vector<Axis> axes_;
    std::vector<std::int64_t> counts_;
    std::int64_t total_ = 0;
};

/// Parses the long-format grouped CSV. 1-D header: "lo,hi,count"; d-D header:
/// "lo_1,hi_1,...,lo_d,hi_d,count". Cells may appear in any order but must
/// tile the full product grid exactly once.
GroupedTable parse_grouped_csv(std::istream& in, std::size_t dims);
GroupedTable parse_grouped_csv_string(const std::string& text, std::size_t dims);
GroupedTable load_grouped_csv(const std::string& path, std::size_t dims);

/// Long-format serialization; parse_grouped_csv round-trips it exactly.
void write_grouped_csv(std::ostream& out, const GroupedTable& table);
std::string grouped_csv_string(const GroupedTable& table);

/// Bins raw observations (rows of data, length-d each) into a table over the
/// given axes. Values on a boundary go to the upper cell; every value must
/// fall inside the axis range.
GroupedTable bin_observations(const std::vector<Axis>& axes,
                              const std::vector<std::vector<double>>& data);

}  // namespace grpnorm
