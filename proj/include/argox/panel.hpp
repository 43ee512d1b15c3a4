#pragma once

#include "argox/epiweek.hpp"
#include "argox/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace argox {

/// All weeks from `first` to `last` inclusive.
inline std::vector<EpiWeek> week_range(EpiWeek first, EpiWeek last)
{
    std::vector<EpiWeek> out;
    if (last < first) {
        return out;
    }
    out.reserve(static_cast<std::size_t>(last - first) + 1);
    for (EpiWeek w = first; w <= last; w = w.next()) {
        out.push_back(w);
    }
    return out;
}

struct RawValues {};
struct FeatureValues {};

/// Rectangular week x series matrix. Rows follow a strictly increasing week
/// index, columns are named series. The tag separates raw observations
/// (%ILI, 0-100 search volumes) from transformed model features.
template <class Tag>
class Panel {
public:
    Panel() = default;

    Panel(std::vector<EpiWeek> index, std::vector<std::string> columns, Eigen::MatrixXd values)
        : index_(std::move(index)), columns_(std::move(columns)), values_(std::move(values))
    {
        if (values_.rows() != static_cast<Eigen::Index>(index_.size()) ||
            values_.cols() != static_cast<Eigen::Index>(columns_.size())) {
            throw DataError("panel shape does not match its index and columns");
        }
        for (std::size_t i = 1; i < index_.size(); ++i) {
            if (!(index_[i - 1] < index_[i])) {
                throw DataError("panel index not strictly increasing at " + index_[i].str());
            }
        }
        if (std::set<std::string>(columns_.begin(), columns_.end()).size() != columns_.size()) {
            throw DataError("duplicate panel column");
        }
    }

    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index cols() const { return values_.cols(); }
    bool empty() const { return values_.size() == 0; }

    const std::vector<EpiWeek>& index() const { return index_; }
    const std::vector<std::string>& columns() const { return columns_; }
    const Eigen::MatrixXd& values() const { return values_; }
    Eigen::MatrixXd& values() { return values_; }

    std::optional<Eigen::Index> row_of(EpiWeek w) const
    {
        const auto it = std::lower_bound(index_.begin(), index_.end(), w);
        if (it == index_.end() || *it != w) {
            return std::nullopt;
        }
        return static_cast<Eigen::Index>(it - index_.begin());
    }

    Eigen::Index require_row(EpiWeek w) const
    {
        if (auto r = row_of(w)) {
            return *r;
        }
        throw DataError("week " + w.str() + " not in panel");
    }

    std::optional<Eigen::Index> column_of(const std::string& name) const
    {
        const auto it = std::find(columns_.begin(), columns_.end(), name);
        if (it == columns_.end()) {
            return std::nullopt;
        }
        return static_cast<Eigen::Index>(it - columns_.begin());
    }

    Eigen::Index require_column(const std::string& name) const
    {
        if (auto c = column_of(name)) {
            return *c;
        }
        throw DataError("series '" + name + "' not in panel");
    }

    bool has_column(const std::string& name) const { return column_of(name).has_value(); }

    auto column(const std::string& name) const { return values_.col(require_column(name)); }

    double at(EpiWeek w, const std::string& name) const
    {
        return values_(require_row(w), require_column(name));
    }

    /// True when consecutive index entries are consecutive weeks.
    bool contiguous() const
    {
        for (std::size_t i = 1; i < index_.size(); ++i) {
            if (index_[i] - index_[i - 1] != 1) {
                return false;
            }
        }
        return true;
    }

private:
    std::vector<EpiWeek> index_;
    std::vector<std::string> columns_;
    Eigen::MatrixXd values_;
};

using WeeklyPanel = Panel<RawValues>;
using FeaturePanel = Panel<FeatureValues>;

} // namespace argox
