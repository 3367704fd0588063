#pragma once

#include "malgrid/util.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace malgrid::reduce {

using Matrix = Eigen::MatrixXd;

enum class Method { tsne, pca, randproj };

std::string to_string(Method method);
Method parse_method(std::string_view text);

struct TracePoint {
    int iteration = 0;
    double kl = 0.0;
};

struct Embedding2D {
    std::vector<std::string> sample_ids;
    Matrix coords;  ///< n x 2
    Method method = Method::tsne;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    std::optional<std::vector<TracePoint>> objective_trace;
};

struct TsneParams {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    std::uint64_t seed = 0;

    nlohmann::ordered_json to_json() const;
};

/// Perplexity clamped to (n - 1) / 3 for small inputs.
double effective_perplexity(double requested, std::size_t n);

/// Row-stochastic conditional affinities p(j|i); bandwidths found by bisection.
Matrix conditional_affinities(const Matrix& X, double perplexity);

/// Symmetric joint affinities with per-row entropy matched to log2(perplexity).
Matrix pairwise_affinities(const Matrix& X, double perplexity);

/// Student-t joint similarities Q for an embedding (zero diagonal).
Matrix student_affinities(const Matrix& Y);

/// KL(P || Q(Y)).
double kl_divergence(const Matrix& P, const Matrix& Y);

/// dKL/dY: row i is 4 * sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2).
Matrix kl_gradient(const Matrix& P, const Matrix& Y);

/// Exact O(n^2) t-SNE. `ids` may be empty (rows are then unnamed).
Embedding2D tsne(const Matrix& X, const TsneParams& params, std::vector<std::string> ids = {});

/// Projection onto the top two principal axes; see Embedding2D::params["rank_deficient"].
Embedding2D pca2(const Matrix& X, std::vector<std::string> ids = {});

/// X * R with R ~ N(0, 1/2) entrywise, R of shape d x 2.
Embedding2D randproj2(const Matrix& X, std::uint64_t seed, std::vector<std::string> ids = {});

/// Per-column z-score; constant columns become zero.
Matrix standardize(const Matrix& X);

/// Embedding CSV (`sample_id,x,y,method`) and its JSON sidecar.
std::string embedding_to_csv(const Embedding2D& emb);
std::string embedding_sidecar(const Embedding2D& emb);
Embedding2D embedding_from_files(std::string_view csv, std::string_view sidecar);

}  // namespace malgrid::reduce
