#include "malgrid/gridmap.hpp"

#include "malgrid/common.hpp"
#include "malgrid/lap.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

namespace malgrid::gridmap {

using reduce::Matrix;
using ordered_json = nlohmann::ordered_json;

Cell GridLayout::cell_of(std::string_view id) const {
    for (std::size_t i = 0; i < sample_ids.size(); ++i)
        if (sample_ids[i] == id) return cells[i];
    throw Error("sample " + std::string(id) + " is not in the layout");
}

std::pair<int, int> choose_grid(std::size_t n, double aspect) {
    if (n == 0) throw Error("choose_grid: n must be positive");
    if (!(aspect > 0.0) || !std::isfinite(aspect)) throw Error("choose_grid: aspect must be positive");

    const double nd = static_cast<double>(n);
    const double ideal_rows = std::sqrt(nd / aspect);
    const double ideal_cols = std::sqrt(nd * aspect);
    auto ceil_div = [n](std::size_t d) { return (n + d - 1) / d; };

    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (double r : {std::floor(ideal_rows), std::ceil(ideal_rows)}) {
        const auto rows = static_cast<std::size_t>(std::max(1.0, r));
        candidates.emplace_back(rows, ceil_div(rows));
    }
    for (double c : {std::floor(ideal_cols), std::ceil(ideal_cols)}) {
        const auto cols = static_cast<std::size_t>(std::max(1.0, c));
        candidates.emplace_back(ceil_div(cols), cols);
    }

    auto aspect_error = [aspect](const std::pair<std::size_t, std::size_t>& rc) {
        return std::abs(std::log(static_cast<double>(rc.second) / static_cast<double>(rc.first) / aspect));
    };
    auto best = candidates.front();
    for (const auto& cand : candidates) {
        const auto area = cand.first * cand.second;
        const auto best_area = best.first * best.second;
        if (area != best_area) {
            if (area < best_area) best = cand;
            continue;
        }
        const double e = aspect_error(cand);
        const double eb = aspect_error(best);
        if (e < eb - 1e-12 || (std::abs(e - eb) <= 1e-12 && cand.second > best.second)) best = cand;
    }
    return {static_cast<int>(best.first), static_cast<int>(best.second)};
}

std::pair<int, int> choose_grid_with_slack(std::size_t n, double aspect, double slack) {
    if (!(slack >= 1.0)) throw Error("grid slack must be >= 1");
    return choose_grid(static_cast<std::size_t>(std::ceil(static_cast<double>(n) * slack)), aspect);
}

Matrix normalize_cloud(const Matrix& coords) {
    Matrix out(coords.rows(), 2);
    for (int c = 0; c < 2; ++c) {
        const double lo = coords.col(c).minCoeff();
        const double hi = coords.col(c).maxCoeff();
        const double range = hi - lo;
        if (range > 0.0) {
            out.col(c) = (coords.col(c).array() - lo) / range;
        } else {
            out.col(c).setConstant(0.5);
        }
    }
    return out;
}

std::pair<double, double> lattice_point(int row, int col, int rows, int cols) {
    const double x = cols == 1 ? 0.5 : static_cast<double>(col) / (cols - 1);
    const double y = rows == 1 ? 0.5 : 1.0 - static_cast<double>(row) / (rows - 1);
    return {x, y};
}

namespace {

struct Problem {
    const Matrix& points;  // normalized n x 2
    int rows;
    int cols;

    double cost(int point, int cell) const {
        if (point < 0) return 0.0;
        const auto [gx, gy] = lattice_point(cell / cols, cell % cols, rows, cols);
        const double dx = points(point, 0) - gx;
        const double dy = points(point, 1) - gy;
        return dx * dx + dy * dy;
    }
};

// Exact solve of `pts` onto `cells` (|pts| <= |cells|); fills occupant[cell].
void solve_exact(const Problem& pb, const std::vector<int>& pts, const std::vector<int>& cells,
                 std::vector<int>& occupant) {
    const std::size_t m = cells.size();
    std::vector<double> cost(m * m, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = pb.cost(pts[i], cells[j]);
    const auto col_of_row = lap::solve(cost, m);
    for (std::size_t i = 0; i < pts.size(); ++i) occupant[cells[col_of_row[i]]] = pts[i];
}

struct Rect {
    int r0, r1, c0, c1;
    int area() const { return (r1 - r0) * (c1 - c0); }
};

std::vector<int> cells_in(const Rect& rect, int cols) {
    std::vector<int> cells;
    for (int r = rect.r0; r < rect.r1; ++r)
        for (int c = rect.c0; c < rect.c1; ++c) cells.push_back(r * cols + c);
    return cells;
}

// Splits `pts` (sorted by `key`) so the first part holds a share proportional to `first_cells`.
std::pair<std::vector<int>, std::vector<int>> split_points(const Problem& pb, std::vector<int> pts, int axis,
                                                           bool descending, int first_cells, int second_cells) {
    std::stable_sort(pts.begin(), pts.end(), [&](int a, int b) {
        const double va = pb.points(a, axis);
        const double vb = pb.points(b, axis);
        return descending ? va > vb : va < vb;
    });
    const auto m = static_cast<long>(pts.size());
    long first = std::lround(static_cast<double>(m) * first_cells / (first_cells + second_cells));
    first = std::clamp(first, std::max(0L, m - second_cells), std::min<long>(m, first_cells));
    return {std::vector<int>(pts.begin(), pts.begin() + first), std::vector<int>(pts.begin() + first, pts.end())};
}

void solve_region(const Problem& pb, const std::vector<int>& pts, const Rect& rect, std::size_t threshold,
                  std::vector<int>& occupant) {
    if (pts.empty()) return;
    if (static_cast<std::size_t>(rect.area()) <= threshold || rect.area() <= 1) {
        solve_exact(pb, pts, cells_in(rect, pb.cols), occupant);
        return;
    }
    const int h = rect.r1 - rect.r0;
    const int w = rect.c1 - rect.c0;
    auto split_cols = [&](const std::vector<int>& part, int r0, int r1) {
        if (w < 2) {
            solve_region(pb, part, {r0, r1, rect.c0, rect.c1}, threshold, occupant);
            return;
        }
        const int cm = rect.c0 + w / 2;
        const Rect left{r0, r1, rect.c0, cm};
        const Rect right{r0, r1, cm, rect.c1};
        auto [lp, rp] = split_points(pb, part, 0, false, left.area(), right.area());
        solve_region(pb, lp, left, threshold, occupant);
        solve_region(pb, rp, right, threshold, occupant);
    };
    if (h < 2) {
        split_cols(pts, rect.r0, rect.r1);
        return;
    }
    const int rm = rect.r0 + h / 2;
    const Rect top{rect.r0, rm, rect.c0, rect.c1};
    const Rect bottom{rm, rect.r1, rect.c0, rect.c1};
    // Row 0 is the top of the lattice (largest y).
    auto [tp, bp] = split_points(pb, pts, 1, true, top.area(), bottom.area());
    split_cols(tp, top.r0, top.r1);
    split_cols(bp, bottom.r0, bottom.r1);
}

void refine_by_swaps(const Problem& pb, std::vector<int>& occupant) {
    const int total = static_cast<int>(occupant.size());
    bool improved = true;
    while (improved) {
        improved = false;
        for (int a = 0; a < total; ++a) {
            for (int b = a + 1; b < total; ++b) {
                const int pa = occupant[a];
                const int pb_ = occupant[b];
                if (pa < 0 && pb_ < 0) continue;
                const double before = pb.cost(pa, a) + pb.cost(pb_, b);
                const double after = pb.cost(pa, b) + pb.cost(pb_, a);
                if (after < before - 1e-12) {
                    std::swap(occupant[a], occupant[b]);
                    improved = true;
                }
            }
        }
    }
}

}  // namespace

GridLayout assign(const reduce::Embedding2D& emb, int rows, int cols, const AssignOptions& options) {
    const auto n = static_cast<std::size_t>(emb.coords.rows());
    if (rows <= 0 || cols <= 0) throw Error("grid dimensions must be positive");
    const auto total = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (total < n)
        throw Error("grid " + std::to_string(rows) + "x" + std::to_string(cols) + " cannot hold " +
                    std::to_string(n) + " samples");
    if (emb.sample_ids.size() != n) throw Error("embedding ids do not match coordinates");
    if (!emb.coords.allFinite()) throw Error("embedding has non-finite coordinates");
    if (n == 0) throw Error("empty embedding");

    GridLayout layout;
    layout.rows = rows;
    layout.cols = cols;
    layout.sample_ids = emb.sample_ids;

    std::vector<int> occupant(total, -1);
    const bool degenerate = (emb.coords.rowwise() - emb.coords.row(0)).cwiseAbs().maxCoeff() == 0.0;
    const Matrix pts = normalize_cloud(emb.coords);
    const Problem pb{pts, rows, cols};

    if (degenerate) {
        layout.degenerate = true;
        for (std::size_t i = 0; i < n; ++i) occupant[i] = static_cast<int>(i);
    } else {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        if (total <= options.exact_threshold) {
            std::vector<int> cells(total);
            std::iota(cells.begin(), cells.end(), 0);
            solve_exact(pb, all, cells, occupant);
        } else {
            solve_region(pb, all, {0, rows, 0, cols}, std::max<std::size_t>(options.exact_threshold, 1), occupant);
            refine_by_swaps(pb, occupant);
        }
    }

    layout.cells.resize(n);
    for (std::size_t cell = 0; cell < total; ++cell) {
        const Cell rc{static_cast<int>(cell / cols), static_cast<int>(cell % cols)};
        if (occupant[cell] < 0) {
            layout.empty_cells.push_back(rc);
        } else {
            layout.cells[occupant[cell]] = rc;
        }
    }
    layout.cost = layout_cost(emb, layout);
    return layout;
}

double layout_cost(const reduce::Embedding2D& emb, const GridLayout& layout) {
    const Matrix pts = normalize_cloud(emb.coords);
    double total = 0.0;
    for (std::size_t i = 0; i < layout.cells.size(); ++i) {
        const auto [gx, gy] = lattice_point(layout.cells[i].row, layout.cells[i].col, layout.rows, layout.cols);
        const double dx = pts(static_cast<Eigen::Index>(i), 0) - gx;
        const double dy = pts(static_cast<Eigen::Index>(i), 1) - gy;
        total += dx * dx + dy * dy;
    }
    return total;
}

NeighborhoodScore neighborhood_overlap(const reduce::Embedding2D& emb, const GridLayout& layout, int k) {
    const auto n = static_cast<int>(emb.coords.rows());
    if (k < 1 || k >= n) throw Error("neighborhood_overlap: need 1 <= k < n");
    if (layout.cells.size() != static_cast<std::size_t>(n)) throw Error("layout and embedding sizes differ");

    auto point_d2 = [&](int i, int j) { return (emb.coords.row(i) - emb.coords.row(j)).squaredNorm(); };
    auto grid_d2 = [&](int i, int j) {
        const double dr = layout.cells[i].row - layout.cells[j].row;
        const double dc = layout.cells[i].col - layout.cells[j].col;
        return dr * dr + dc * dc;
    };
    // Grid-space ties fall back to point-space distance, then index.
    auto knn = [n, k](int i, auto&& primary, auto&& secondary) {
        std::vector<std::tuple<double, double, int>> d;
        d.reserve(n - 1);
        for (int j = 0; j < n; ++j)
            if (j != i) d.emplace_back(primary(i, j), secondary(i, j), j);
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        std::vector<int> ids(k);
        for (int t = 0; t < k; ++t) ids[t] = std::get<2>(d[t]);
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    auto none = [](int, int) { return 0.0; };

    std::vector<double> overlap(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t idx) {
        const int i = static_cast<int>(idx);
        const auto a = knn(i, point_d2, none);
        const auto b = knn(i, grid_d2, point_d2);
        std::vector<int> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        overlap[idx] = static_cast<double>(common.size()) / k;
    });
    return {k, std::accumulate(overlap.begin(), overlap.end(), 0.0) / n};
}

std::string layout_to_csv(const GridLayout& layout) {
    std::string out = "sample_id,row,col\n";
    for (std::size_t i = 0; i < layout.sample_ids.size(); ++i)
        out += layout.sample_ids[i] + "," + std::to_string(layout.cells[i].row) + "," +
               std::to_string(layout.cells[i].col) + "\n";
    return out;
}

std::string layout_sidecar(const GridLayout& layout) {
    ordered_json j;
    j["rows"] = layout.rows;
    j["cols"] = layout.cols;
    j["cost"] = layout.cost;
    ordered_json empty = ordered_json::array();
    for (const auto& c : layout.empty_cells) empty.push_back({c.row, c.col});
    j["empty_cells"] = std::move(empty);
    j["degenerate"] = layout.degenerate;
    return j.dump(2) + "\n";
}

GridLayout layout_from_files(std::string_view csv, std::string_view sidecar) {
    GridLayout layout;
    try {
        const auto j = ordered_json::parse(sidecar);
        layout.rows = j.at("rows").get<int>();
        layout.cols = j.at("cols").get<int>();
        layout.cost = j.at("cost").get<double>();
        layout.degenerate = j.at("degenerate").get<bool>();
        for (const auto& c : j.at("empty_cells")) layout.empty_cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("layout sidecar: ") + e.what());
    }
    const auto lines = split_lines(csv);
    if (lines.empty() || lines.front() != "sample_id,row,col") throw Error("layout CSV: bad header");
    std::set<Cell> used;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 3) throw Error("layout CSV line " + std::to_string(i + 1) + ": expected 3 fields");
        const Cell c{static_cast<int>(parse_int(f[1])), static_cast<int>(parse_int(f[2]))};
        if (c.row < 0 || c.row >= layout.rows || c.col < 0 || c.col >= layout.cols)
            throw Error("layout CSV line " + std::to_string(i + 1) + ": cell outside the grid");
        if (!used.insert(c).second) throw Error("layout CSV line " + std::to_string(i + 1) + ": cell assigned twice");
        layout.sample_ids.push_back(f[0]);
        layout.cells.push_back(c);
    }
    return layout;
}

}  // namespace malgrid::gridmap
