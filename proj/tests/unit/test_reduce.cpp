#include "malgrid/common.hpp"
#include "malgrid/reduce.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace malgrid;
using namespace malgrid::reduce;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    return X;
}

Matrix canonical_signs(Matrix M) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
        Eigen::Index best = 0;
        M.col(c).cwiseAbs().maxCoeff(&best);
        if (M(best, c) < 0) M.col(c) *= -1.0;
    }
    return M;
}

TsneParams quick_params(std::uint64_t seed) {
    TsneParams p;
    p.iterations = 300;
    p.exaggeration_iters = 100;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("equilateral triangle gives uniform affinities") {
    Matrix X(3, 2);
    X << 0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0;
    const auto P = pairwise_affinities(X, 2.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(P(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("conditional rows hit the target entropy") {
    const Matrix X = random_matrix(40, 6, 1);
    for (const double perp : {2.5, 5.0, 12.0}) {
        const auto cond = conditional_affinities(X, perp);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            double h = 0.0, sum = 0.0;
            for (Eigen::Index j = 0; j < X.rows(); ++j) {
                sum += cond(i, j);
                if (cond(i, j) > 0) h -= cond(i, j) * std::log2(cond(i, j));
            }
            CHECK(cond(i, i) == 0.0);
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(h - std::log2(perp)) <= 1e-5);
        }
    }
}

TEST_CASE("joint affinities are symmetric, non-negative, zero-diagonal and sum to one") {
    const auto P = pairwise_affinities(random_matrix(30, 4, 2), 8.0);
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(P.minCoeff() >= 0.0);
    CHECK(P.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(P.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("affinity preconditions") {
    CHECK_THROWS_AS(pairwise_affinities(random_matrix(2, 3, 1), 1.5), Error);
    CHECK_THROWS_AS(pairwise_affinities(random_matrix(10, 3, 1), 10.0), Error);
    Matrix dup = Matrix::Zero(10, 3);
    dup(9, 0) = 1.0;
    CHECK_THROWS_WITH_AS(pairwise_affinities(dup, 5.0), doctest::Contains("jitter"), Error);
}

TEST_CASE("effective perplexity clamps for small inputs") {
    CHECK(effective_perplexity(30.0, 10) == 3.0);
    CHECK(effective_perplexity(30.0, 1000) == 30.0);
}

TEST_CASE("KL gradient matches central finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix X = random_matrix(10, 5, 100 + seed);
        Matrix Y = random_matrix(10, 2, 200 + seed);
        const auto P = pairwise_affinities(X, effective_perplexity(30.0, 10));
        const auto G = kl_gradient(P, Y);
        const double h = 1e-5;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < 10; ++i)
            for (Eigen::Index c = 0; c < 2; ++c) {
                Matrix Yp = Y, Ym = Y;
                Yp(i, c) += h;
                Ym(i, c) -= h;
                const double fd = (kl_divergence(P, Yp) - kl_divergence(P, Ym)) / (2 * h);
                worst = std::max(worst, std::abs(fd - G(i, c)) / std::max({std::abs(fd), std::abs(G(i, c)), 1e-12}));
            }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("Student affinities sum to one") {
    const auto Q = student_affinities(random_matrix(12, 2, 3));
    CHECK(Q.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(Q.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("t-SNE is seeded and records its objective") {
    const Matrix X = random_matrix(60, 5, 4);
    const auto a = tsne(X, quick_params(9));
    const auto b = tsne(X, quick_params(9));
    const auto c = tsne(X, quick_params(10));
    CHECK(a.coords == b.coords);
    CHECK(a.coords != c.coords);
    CHECK(a.coords.allFinite());
    REQUIRE(a.objective_trace.has_value());
    CHECK(a.objective_trace->size() == 30);
    CHECK(a.objective_trace->front().iteration == 10);
    CHECK(a.params["perplexity"] == 30.0);
    CHECK(a.params["effective_perplexity"] == doctest::Approx(59.0 / 3.0));
    CHECK(a.params["seed"] == 9);
}

TEST_CASE("t-SNE KL trace is non-increasing after exaggeration") {
    Rng rng(21);
    Matrix X(200, 8);
    for (Eigen::Index i = 0; i < 200; ++i)
        for (Eigen::Index j = 0; j < 8; ++j) X(i, j) = rng.normal() + (j == i % 5 ? 6.0 : 0.0);
    TsneParams p;
    p.seed = 3;
    const auto emb = tsne(X, p);
    const auto& trace = *emb.objective_trace;
    for (std::size_t t = 1; t < trace.size(); ++t) {
        if (trace[t - 1].iteration < p.exaggeration_iters) continue;
        CAPTURE(trace[t].iteration);
        CHECK(trace[t].kl <= trace[t - 1].kl + 1e-3);
    }
}

TEST_CASE("t-SNE separates well-separated clusters") {
    Rng rng(5);
    Matrix X(60, 4);
    for (Eigen::Index i = 0; i < 60; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) X(i, j) = 0.1 * rng.normal() + (i < 30 ? 0.0 : 10.0);
    const auto emb = tsne(X, quick_params(1));
    const Eigen::RowVector2d ca = emb.coords.topRows(30).colwise().mean();
    const Eigen::RowVector2d cb = emb.coords.bottomRows(30).colwise().mean();
    double spread = 0.0;
    for (Eigen::Index i = 0; i < 60; ++i) spread = std::max(spread, (emb.coords.row(i) - (i < 30 ? ca : cb)).norm());
    CHECK((ca - cb).norm() > 2.0 * spread);
}

TEST_CASE("PCA on axis-aligned 2D data is the centered input") {
    Matrix X(5, 2);
    X << -4, 0.5, -2, -1, 0, 0.2, 2, -1, 4, 0.5;
    const auto emb = pca2(X);
    const Matrix centered = X.rowwise() - X.colwise().mean();
    CHECK((canonical_signs(emb.coords) - canonical_signs(centered)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("PCA matches the covariance eigenvectors") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix X = random_matrix(5, 3, seed);
        const Matrix centered = X.rowwise() - X.colwise().mean();
        // Power iteration with deflation as an independent oracle.
        Matrix C = centered.transpose() * centered / 4.0;
        Matrix axes(3, 2);
        for (int k = 0; k < 2; ++k) {
            Eigen::Vector3d v(1.0, 0.7, 0.3);
            for (int it = 0; it < 5000; ++it) v = (C * v).normalized();
            axes.col(k) = v;
            C -= (v.transpose() * C * v)(0) * v * v.transpose();
        }
        const auto got = canonical_signs(pca2(X).coords);
        const auto want = canonical_signs(centered * axes);
        CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("PCA ignores a constant column and row permutations") {
    const Matrix X = random_matrix(8, 3, 7);
    Matrix Xc(8, 4);
    Xc << X, Matrix::Constant(8, 1, 5.0);
    const auto a = pca2(X).coords;
    CHECK((pca2(Xc).coords - a).cwiseAbs().maxCoeff() <= 1e-8);

    std::vector<int> perm{3, 0, 7, 1, 6, 2, 5, 4};
    Matrix Xp(8, 3);
    for (int i = 0; i < 8; ++i) Xp.row(i) = X.row(perm[i]);
    const auto b = pca2(Xp).coords;
    for (int i = 0; i < 8; ++i) CHECK((b.row(i) - a.row(perm[i])).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("PCA flags rank-deficient input") {
    Matrix X(4, 3);
    X << 1, 2, 3, 2, 4, 6, 3, 6, 9, 4, 8, 12;
    const auto emb = pca2(X);
    CHECK(emb.params["rank_deficient"] == true);
    CHECK(emb.coords.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(pca2(random_matrix(2, 3, 1)), Error);
}

TEST_CASE("random projection") {
    CHECK(randproj2(Matrix::Zero(6, 5), 3).coords.cwiseAbs().maxCoeff() == 0.0);
    const Matrix X = random_matrix(10, 5, 8);
    CHECK(randproj2(X, 4).coords == randproj2(X, 4).coords);
    CHECK(randproj2(X, 4).coords != randproj2(X, 5).coords);
    CHECK_THROWS_AS(randproj2(random_matrix(5, 1, 1), 1), Error);
}

TEST_CASE("random projection preserves squared distances in expectation") {
    const Matrix X = random_matrix(50, 100, 12);
    const double orig = (X.row(0) - X.row(1)).squaredNorm();
    double ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto Y = randproj2(X, seed).coords;
        ratio += (Y.row(0) - Y.row(1)).squaredNorm() / orig;
    }
    CHECK(std::abs(ratio / 200.0 - 1.0) <= 0.15);
}

TEST_CASE("standardize gives zero mean and unit variance, zeroing constant columns") {
    Matrix X = random_matrix(20, 3, 6);
    X.col(2).setConstant(4.0);
    const auto Z = standardize(X);
    for (int c = 0; c < 2; ++c) {
        CHECK(std::abs(Z.col(c).mean()) < 1e-12);
        CHECK(Z.col(c).squaredNorm() / 20.0 == doctest::Approx(1.0));
    }
    CHECK(Z.col(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embedding files round trip") {
    const Matrix X = random_matrix(12, 4, 2);
    const auto emb = tsne(X, quick_params(2), {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"});
    const auto back = embedding_from_files(embedding_to_csv(emb), embedding_sidecar(emb));
    CHECK(back.sample_ids == emb.sample_ids);
    CHECK(back.coords == emb.coords);
    CHECK(back.method == Method::tsne);
    CHECK(back.params == emb.params);
    REQUIRE(back.objective_trace.has_value());
    CHECK(back.objective_trace->size() == emb.objective_trace->size());
    CHECK(back.objective_trace->back().kl == emb.objective_trace->back().kl);

    const auto pca = pca2(X);
    const auto pca_back = embedding_from_files(embedding_to_csv(pca), embedding_sidecar(pca));
    CHECK_FALSE(pca_back.objective_trace.has_value());
    CHECK(embedding_to_csv(pca).rfind("sample_id,x,y,method\n0,", 0) == 0);
}
