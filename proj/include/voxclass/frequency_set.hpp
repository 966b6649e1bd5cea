#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"
#include "spectra.hpp"

namespace voxclass {

/// D distinct probe positions on a log grid, kept sorted ascending.
class FrequencySet {
public:
    FrequencySet() = default;

    FrequencySet(LogGrid grid, std::vector<std::size_t> indices) : grid_(grid), indices_(std::move(indices)) {
        std::sort(indices_.begin(), indices_.end());
        if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
            throw GridError("frequency set contains duplicate grid positions");
        for (std::size_t i : indices_)
            if (i >= grid_.n_points)
                throw GridError("grid index " + std::to_string(i) + " outside grid of " +
                                std::to_string(grid_.n_points) + " points");
    }

    const LogGrid& grid() const { return grid_; }
    const std::vector<std::size_t>& indices() const { return indices_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }

    std::vector<double> frequencies_hz() const {
        std::vector<double> out;
        out.reserve(indices_.size());
        for (std::size_t i : indices_)
            out.push_back(grid_.frequency_hz(i));
        return out;
    }

    bool operator==(const FrequencySet&) const = default;

private:
    LogGrid grid_{};
    std::vector<std::size_t> indices_;
};

}  // namespace voxclass
