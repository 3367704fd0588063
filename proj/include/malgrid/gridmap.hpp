#pragma once

#include "malgrid/reduce.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace malgrid::gridmap {

inline constexpr std::size_t kDefaultExactThreshold = 3000;

struct Cell {
    int row = 0;
    int col = 0;
    auto operator<=>(const Cell&) const = default;
};

struct GridLayout {
    int rows = 0;
    int cols = 0;
    std::vector<std::string> sample_ids;  ///< same order as the source embedding
    std::vector<Cell> cells;              ///< cells[i] belongs to sample_ids[i]
    std::vector<Cell> empty_cells;        ///< row-major
    double cost = 0.0;
    bool degenerate = false;

    Cell cell_of(std::string_view id) const;
};

struct NeighborhoodScore {
    int k = 0;
    double mean_overlap = 0.0;
};

struct AssignOptions {
    std::size_t exact_threshold = kDefaultExactThreshold;
};

/// Near-aspect grid of minimal area holding n cells (see choose_grid rules in README).
std::pair<int, int> choose_grid(std::size_t n, double aspect = 1.0);

/// Grid for n samples with `slack` >= 1 extra capacity factor.
std::pair<int, int> choose_grid_with_slack(std::size_t n, double aspect, double slack);

/// Min-max normalizes each axis to [0, 1]; a zero-range axis maps to 0.5.
reduce::Matrix normalize_cloud(const reduce::Matrix& coords);

/// Lattice position of a cell in the normalized frame; row 0 is the top (y = 1).
std::pair<double, double> lattice_point(int row, int col, int rows, int cols);

GridLayout assign(const reduce::Embedding2D& emb, int rows, int cols, const AssignOptions& options = {});

/// Squared-distance cost of placing each sample in its cell, in normalized coordinates.
double layout_cost(const reduce::Embedding2D& emb, const GridLayout& layout);

NeighborhoodScore neighborhood_overlap(const reduce::Embedding2D& emb, const GridLayout& layout, int k);

/// Layout CSV (`sample_id,row,col`) and JSON sidecar.
std::string layout_to_csv(const GridLayout& layout);
std::string layout_sidecar(const GridLayout& layout);
GridLayout layout_from_files(std::string_view csv, std::string_view sidecar);

}  // namespace malgrid::gridmap
