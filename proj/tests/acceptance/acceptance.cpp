// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero when any check fails.

#include "malgrid/byteplot.hpp"
#include "malgrid/classify.hpp"
#include "malgrid/common.hpp"
#include "malgrid/corpus.hpp"
#include "malgrid/gist.hpp"
#include "malgrid/gridmap.hpp"
#include "malgrid/pipeline.hpp"
#include "malgrid/png.hpp"
#include "malgrid/reduce.hpp"

#include "../support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace malgrid;
using Matrix = Eigen::MatrixXd;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict;
    std::string detail;
};

Outcome pass(std::string d) { return {Verdict::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::fail, std::move(d)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

classify::Dataset gist_dataset(const corpus::CorpusManifest& m) {
    const auto bank = gist::build_bank();
    std::vector<std::vector<double>> rows(m.entries.size());
    parallel_for(m.entries.size(), [&](std::size_t i) {
        const auto bytes = read_file(m.entries[i].path);
        rows[i] = gist::gist(byteplot::to_byteplot(bytes), bank).values;
    });
    classify::Dataset ds;
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), gist::kGistDim);
    std::map<std::string, int> index;
    for (const auto& s : m.entries) index.emplace(*s.family, 0);
    for (auto& [name, idx] : index) {
        idx = static_cast<int>(ds.class_names.size());
        ds.class_names.push_back(name);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < gist::kGistDim; ++j) ds.X(static_cast<Eigen::Index>(i), j) = rows[i][j];
        ds.y.push_back(index.at(*m.entries[i].family));
        ds.sample_ids.push_back(m.entries[i].id);
    }
    return ds;
}

// 1. Synthetic-family classification.
Outcome synthetic_classification() {
    const auto t0 = std::chrono::steady_clock::now();
    testing::TempDir dir("acc_synth");
    corpus::SynthSpec spec;
    spec.n_families = 10;
    spec.variants_per_family = 30;
    spec.base_size_bytes = 64 * 1024;
    spec.mutation_rate = 0.02;
    spec.pack_profile = corpus::PackProfile::none;
    spec.seed = 42;
    corpus::save_manifest(corpus::synthesize(spec, dir.path()), dir / "manifest.json");
    const auto ds = gist_dataset(corpus::load_manifest(dir / "manifest.json"));
    const auto knn = classify::cross_validate(ds, classify::KnnSpec{5}, 10, 42);
    const auto rf = classify::cross_validate(ds, classify::RfSpec{100, 0}, 10, 42);
    const double secs = seconds_since(t0);
    const std::string d = "knn_acc=" + fmt(knn.accuracy) + " rf_acc=" + fmt(rf.accuracy) + " (>= 0.95) time=" +
                          fmt(secs) + "s (< 180s)";
    return knn.accuracy >= 0.95 && rf.accuracy >= 0.95 && secs < 180.0 ? pass(d) : fail(d);
}

// 2. Malimg-style image set: <dir>/<family>/*.png grayscale byteplots.
Outcome malimg_reproduction() {
    const char* root = std::getenv("MALGRID_MALIMG_DIR");
    if (!root || !*root) return {Verdict::skip, "set MALGRID_MALIMG_DIR to a <family>/*.png image tree"};
    std::vector<std::pair<fs::path, std::string>> images;
    for (const auto& fam : fs::directory_iterator(root)) {
        if (!fam.is_directory()) continue;
        for (const auto& f : fs::directory_iterator(fam.path()))
            if (f.path().extension() == ".png") images.emplace_back(f.path(), fam.path().filename().string());
    }
    std::sort(images.begin(), images.end());
    if (images.empty()) return fail(std::string("no images under ") + root);
    const auto bank = gist::build_bank();
    std::vector<std::vector<double>> rows(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
        rows[i] = gist::gist(byteplot::from_raster(png::read(images[i].first, 1)), bank).values;
    });
    classify::Dataset ds;
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), gist::kGistDim);
    std::map<std::string, int> index;
    for (const auto& [p, fam] : images)
        if (!index.count(fam)) index.emplace(fam, 0);
    for (auto& [name, idx] : index) {
        idx = static_cast<int>(ds.class_names.size());
        ds.class_names.push_back(name);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < gist::kGistDim; ++j) ds.X(static_cast<Eigen::Index>(i), j) = rows[i][j];
        ds.y.push_back(index.at(images[i].second));
        ds.sample_ids.push_back(images[i].first.string());
    }
    const auto rep = classify::cross_validate(ds, classify::RfSpec{100, 0}, 10, 0);
    const std::string d = "rf_acc=" + fmt(rep.accuracy) + " macro_f1=" + fmt(rep.macro_f1) + " (0.974 +/- 0.02)";
    return std::abs(rep.accuracy - 0.974) <= 0.02 ? pass(d) : fail(d);
}

// Oracle: squared distance between normalized point i and the lattice cell.
double oracle_cost(const Matrix& pts, int rows, int cols, const std::vector<int>& cell_of_point) {
    Matrix norm = pts;
    for (int a = 0; a < 2; ++a) {
        const double lo = pts.col(a).minCoeff(), hi = pts.col(a).maxCoeff();
        for (Eigen::Index i = 0; i < pts.rows(); ++i) norm(i, a) = hi > lo ? (pts(i, a) - lo) / (hi - lo) : 0.5;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < cell_of_point.size(); ++i) {
        const int r = cell_of_point[i] / cols, c = cell_of_point[i] % cols;
        const double gx = cols == 1 ? 0.5 : static_cast<double>(c) / (cols - 1);
        const double gy = rows == 1 ? 0.5 : 1.0 - static_cast<double>(r) / (rows - 1);
        const double dx = norm(static_cast<Eigen::Index>(i), 0) - gx, dy = norm(static_cast<Eigen::Index>(i), 1) - gy;
        total += dx * dx + dy * dy;
    }
    return total;
}

// 3. Grid assignment equals the exhaustive optimum.
Outcome lap_optimality() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    int mismatches = 0;
    double worst = 0.0;
    for (int inst = 0; inst < 200; ++inst) {
        const int n = 3 + static_cast<int>(rng.below(6));
        reduce::Embedding2D emb;
        emb.coords.resize(n, 2);
        for (int i = 0; i < n; ++i) {
            emb.coords(i, 0) = rng.uniform();
            emb.coords(i, 1) = rng.uniform();
            emb.sample_ids.push_back("s" + std::to_string(i));
        }
        const auto [rows, cols] = gridmap::choose_grid(static_cast<std::size_t>(n));
        const auto layout = gridmap::assign(emb, rows, cols);
        std::vector<int> got(n);
        for (int i = 0; i < n; ++i) got[i] = layout.cells[i].row * cols + layout.cells[i].col;
        const double got_cost = oracle_cost(emb.coords, rows, cols, got);

        // Every injective map of n points into rows*cols cells.
        std::vector<int> cells(rows * cols);
        std::iota(cells.begin(), cells.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            best = std::min(best, oracle_cost(emb.coords, rows, cols, std::vector<int>(cells.begin(), cells.begin() + n)));
        } while (std::next_permutation(cells.begin(), cells.end()));
        if (got_cost != best) {
            ++mismatches;
            worst = std::max(worst, got_cost - best);
        }
    }
    const double secs = seconds_since(t0);
    const std::string d = "mismatches=" + std::to_string(mismatches) + "/200 worst_gap=" + fmt(worst) +
                          " time=" + fmt(secs) + "s (< 10s)";
    return mismatches == 0 && secs < 10.0 ? pass(d) : fail(d);
}

// 4. t-SNE gradient and objective trace.
Outcome tsne_gradient_and_trace() {
    Rng rng(11);
    Matrix X(10, 5), Y(10, 2);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = rng.normal();
    const Matrix P = reduce::pairwise_affinities(X, reduce::effective_perplexity(30.0, 10));
    const Matrix G = reduce::kl_gradient(P, Y);
    const double h = 1e-5;
    double max_rel = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        for (Eigen::Index j = 0; j < 2; ++j) {
            Matrix Yp = Y, Ym = Y;
            Yp(i, j) += h;
            Ym(i, j) -= h;
            const double fd = (reduce::kl_divergence(P, Yp) - reduce::kl_divergence(P, Ym)) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(G(i, j)), 1e-12});
            max_rel = std::max(max_rel, std::abs(fd - G(i, j)) / denom);
        }
    }

    Matrix pts(200, 10);
    for (Eigen::Index i = 0; i < 200; ++i)
        for (Eigen::Index j = 0; j < 10; ++j) pts(i, j) = rng.normal() + (j == i % 4 ? 8.0 : 0.0);
    reduce::TsneParams params;
    params.seed = 5;
    const auto emb = reduce::tsne(pts, params);
    int rises = 0;
    double worst_rise = 0.0;
    const auto& trace = *emb.objective_trace;
    for (std::size_t t = 1; t < trace.size(); ++t) {
        if (trace[t - 1].iteration < params.exaggeration_iters) continue;
        const double rise = trace[t].kl - trace[t - 1].kl;
        worst_rise = std::max(worst_rise, rise);
        if (rise > 1e-3) ++rises;
    }
    const std::string d = "grad_max_rel_err=" + fmt(max_rel) + " (< 1e-4) kl_violations=" + std::to_string(rises) +
                          " worst_rise=" + fmt(worst_rise) + " (<= 1e-3)";
    return max_rel < 1e-4 && rises == 0 ? pass(d) : fail(d);
}

// Cyclic Jacobi eigen-solver for small symmetric matrices.
void jacobi_eigen(Matrix A, Eigen::VectorXd& values, Matrix& vectors) {
    const Eigen::Index n = A.rows();
    vectors = Matrix::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = vectors(k, p), vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    values = A.diagonal();
}

// Flips each column so its largest-magnitude entry is positive.
Matrix canonical_signs(Matrix M) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
        Eigen::Index best = 0;
        M.col(c).cwiseAbs().maxCoeff(&best);
        if (M(best, c) < 0) M.col(c) *= -1.0;
    }
    return M;
}

// 5. PCA against an independent eigendecomposition.
Outcome pca_oracle() {
    Rng rng(99);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        Matrix X(5, 3);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
        const Matrix centered = X.rowwise() - X.colwise().mean();
        Eigen::VectorXd values;
        Matrix vectors;
        jacobi_eigen(centered.transpose() * centered / 4.0, values, vectors);
        std::vector<Eigen::Index> order{0, 1, 2};
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values(a) > values(b); });
        Matrix axes(3, 2);
        axes.col(0) = vectors.col(order[0]);
        axes.col(1) = vectors.col(order[1]);
        const Matrix expected = canonical_signs(centered * axes);
        const Matrix got = canonical_signs(reduce::pca2(X).coords);
        worst = std::max(worst, (expected - got).cwiseAbs().maxCoeff());
    }
    const std::string d = "max_abs_diff=" + fmt(worst) + " (<= 1e-8)";
    return worst <= 1e-8 ? pass(d) : fail(d);
}

int table_width(std::size_t size) {
    const std::pair<std::size_t, int> table[] = {{10 * 1024, 32},   {30 * 1024, 64},   {60 * 1024, 128},
                                                 {100 * 1024, 256}, {200 * 1024, 384}, {500 * 1024, 512},
                                                 {1000 * 1024, 768}};
    for (const auto& [bound, w] : table)
        if (size < bound) return w;
    return 1024;
}

// 6. Byteplot round-trip.
Outcome byteplot_roundtrip() {
    Rng rng(6);
    int bad = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t len = t == 0 ? 1 : t == 1 ? 100000 : 1 + rng.below(100000);
        std::vector<std::uint8_t> bytes(len);
        for (auto& b : bytes) b = rng.byte();
        const auto img = byteplot::to_byteplot(bytes);
        const bool same = std::equal(bytes.begin(), bytes.end(), img.pixels.begin());
        const int w = table_width(len);
        const int h = static_cast<int>((len + w - 1) / w);
        if (!same || img.width != w || img.height != h) ++bad;
    }
    const std::string d = "mismatches=" + std::to_string(bad) + "/100";
    return bad == 0 ? pass(d) : fail(d);
}

// 7. Metrics arithmetic on a scripted confusion [[4,1],[2,3]].
Outcome metrics_arithmetic() {
    classify::Dataset ds;
    ds.X.resize(10, 1);
    for (int i = 0; i < 10; ++i) {
        ds.X(i, 0) = i;
        ds.y.push_back(i < 5 ? 0 : 1);
        ds.sample_ids.push_back("m" + std::to_string(i));
    }
    ds.class_names = {"a", "b"};
    // Samples 0..3 and 8,9 are predicted correctly; 4 -> b, 5 and 6 -> a, 7 -> b.
    classify::CustomSpec scripted{"scripted", [](const classify::Dataset&, const Matrix& q, std::uint64_t) {
                                      std::vector<int> out;
                                      for (Eigen::Index i = 0; i < q.rows(); ++i) {
                                          const int id = static_cast<int>(q(i, 0));
                                          out.push_back(id <= 3 ? 0 : id == 4 ? 1 : id <= 6 ? 0 : 1);
                                      }
                                      return out;
                                  }};
    const auto rep = classify::cross_validate(ds, scripted, 5, 0);
    // Hand arithmetic: P = (4/6 + 3/4)/2, R = (4/5 + 3/5)/2, F1 = (8/11 + 2/3)/2.
    const double acc = 7.0 / 10.0;
    const double prec = (4.0 / 6.0 + 3.0 / 4.0) / 2.0;
    const double rec = (4.0 / 5.0 + 3.0 / 5.0) / 2.0;
    const double f1 = (8.0 / 11.0 + 2.0 / 3.0) / 2.0;
    const double err = std::max({std::abs(rep.accuracy - acc), std::abs(rep.macro_precision - prec),
                                 std::abs(rep.macro_recall - rec), std::abs(rep.macro_f1 - f1)});
    const bool confusion_ok = rep.confusion == std::vector<std::vector<long>>{{4, 1}, {2, 3}};
    const std::string d = "acc=" + fmt(rep.accuracy) + " P=" + fmt(rep.macro_precision) + " R=" +
                          fmt(rep.macro_recall) + " F1=" + fmt(rep.macro_f1) + " max_err=" + fmt(err) + " (<= 1e-9)";
    return confusion_ok && err <= 1e-9 ? pass(d) : fail(d);
}

// 8. Cluster preservation under packing profiles.
Outcome packing_overlap() {
    testing::TempDir dir("acc_pack");
    const corpus::PackProfile profiles[] = {corpus::PackProfile::none, corpus::PackProfile::light,
                                            corpus::PackProfile::medium, corpus::PackProfile::heavy};
    std::vector<double> overlap;
    std::string d;
    for (const auto profile : profiles) {
        const auto name = corpus::to_string(profile);
        corpus::SynthSpec spec;
        spec.n_families = 10;
        spec.variants_per_family = 30;
        spec.pack_profile = profile;
        spec.seed = 42;
        const auto m = corpus::synthesize(spec, dir / ("corpus_" + name));
        corpus::save_manifest(m, dir / ("corpus_" + name) / "manifest.json");
        pipeline::RunConfig cfg;
        cfg.manifest = dir / ("corpus_" + name) / "manifest.json";
        cfg.out = dir / ("run_" + name);
        cfg.seed = 42;
        pipeline::RunOptions opts;
        opts.use_cache = false;
        pipeline::run_until(cfg, pipeline::Stage::grid, opts);
        const auto emb = reduce::embedding_from_files(read_text(cfg.out / pipeline::artifact::embedding),
                                                      read_text(cfg.out / pipeline::artifact::embedding_meta));
        const auto layout = gridmap::layout_from_files(read_text(cfg.out / pipeline::artifact::layout),
                                                       read_text(cfg.out / pipeline::artifact::layout_meta));
        overlap.push_back(gridmap::neighborhood_overlap(emb, layout, 5).mean_overlap);
        d += name + "=" + fmt(overlap.back()) + " ";
    }
    const bool floor_ok = overlap[0] >= 0.5 && overlap[1] >= 0.5 && overlap[2] >= 0.5;
    const bool monotone = overlap[1] <= overlap[0] && overlap[2] <= overlap[1] && overlap[3] <= overlap[2];
    d += "(none/light/medium >= 0.5, non-increasing)";
    return floor_ok && monotone ? pass(d) : fail(d);
}

// 9. Two CLI runs with the same seed produce identical artifacts.
Outcome end_to_end_determinism() {
    testing::TempDir dir("acc_det");
    const std::string cli = MALGRID_CLI_PATH;
    auto sh = [](const std::string& cmd) { return std::system((cmd + " > /dev/null").c_str()); };
    if (sh(cli + " synth --families 4 --variants 8 --base-size 16384 --seed 7 --out " + (dir / "corpus").string()) != 0)
        return fail("synth failed");
    for (const char* run : {"run_a", "run_b"}) {
        if (sh(cli + " run --seed 7 --manifest " + (dir / "corpus" / "manifest.json").string() + " --out " +
               (dir / run).string()) != 0)
            return fail(std::string("run failed: ") + run);
    }
    std::string d;
    bool ok = true;
    for (const char* f : {pipeline::artifact::embedding, pipeline::artifact::layout, pipeline::artifact::bundle}) {
        const bool same = read_file(dir / "run_a" / f) == read_file(dir / "run_b" / f);
        ok = ok && same;
        d += std::string(f) + (same ? "=identical " : "=DIFFERENT ");
    }
    return ok ? pass(d) : fail(d);
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
        {"synthetic_family_classification", synthetic_classification},
        {"malimg_gist_rf_accuracy", malimg_reproduction},
        {"lap_exhaustive_optimality", lap_optimality},
        {"tsne_gradient_and_kl_trace", tsne_gradient_and_trace},
        {"pca_eigendecomposition_oracle", pca_oracle},
        {"byteplot_roundtrip", byteplot_roundtrip},
        {"metrics_arithmetic", metrics_arithmetic},
        {"packing_cluster_overlap", packing_overlap},
        {"end_to_end_determinism", end_to_end_determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : checks) {
        Outcome out;
        try {
            out = check();
        } catch (const std::exception& e) {
            out = fail(std::string("exception: ") + e.what());
        }
        const char* tag = out.verdict == Verdict::pass ? "PASS" : out.verdict == Verdict::fail ? "FAIL" : "SKIP";
        if (out.verdict == Verdict::fail) ++failures;
        std::cout << tag << " " << name << ": " << out.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
