#include "malgrid/reduce.hpp"

#include "malgrid/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace malgrid::reduce {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kAffinityFloor = 1e-12;
constexpr double kEntropyTolBits = 1e-5;
constexpr int kMaxBisection = 200;
constexpr double kInitSigma = 1e-4;
constexpr double kMinGain = 0.01;
constexpr int kTraceEvery = 10;

std::vector<std::string> ensure_ids(std::vector<std::string> ids, Eigen::Index n) {
    if (ids.empty()) {
        ids.reserve(n);
        for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    }
    if (static_cast<Eigen::Index>(ids.size()) != n) throw Error("sample id count does not match matrix rows");
    return ids;
}

void require_finite(const Matrix& X, const char* what) {
    if (!X.allFinite()) throw Error(std::string(what) + ": input contains non-finite values");
}

Matrix squared_distances(const Matrix& X) {
    const Eigen::Index n = X.rows();
    Matrix D = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = (X.row(i) - X.row(j)).squaredNorm();
            D(i, j) = d;
            D(j, i) = d;
        }
    return D;
}

}  // namespace

std::string to_string(Method method) {
    switch (method) {
        case Method::tsne: return "tsne";
        case Method::pca: return "pca";
        case Method::randproj: return "randproj";
    }
    return "tsne";
}

Method parse_method(std::string_view text) {
    if (text == "tsne") return Method::tsne;
    if (text == "pca") return Method::pca;
    if (text == "randproj") return Method::randproj;
    throw Error("unknown reduction method '" + std::string(text) + "'");
}

ordered_json TsneParams::to_json() const {
    ordered_json j;
    j["perplexity"] = perplexity;
    j["iterations"] = iterations;
    j["learning_rate"] = learning_rate;
    j["early_exaggeration"] = early_exaggeration;
    j["exaggeration_iters"] = exaggeration_iters;
    j["momentum_initial"] = momentum_initial;
    j["momentum_final"] = momentum_final;
    j["seed"] = seed;
    return j;
}

double effective_perplexity(double requested, std::size_t n) {
    const double cap = (static_cast<double>(n) - 1.0) / 3.0;
    return std::min(requested, cap);
}

Matrix conditional_affinities(const Matrix& X, double perplexity) {
    const Eigen::Index n = X.rows();
    if (n < 3) throw Error("affinities need at least 3 points");
    if (!(perplexity > 1.0) || perplexity >= static_cast<double>(n))
        throw Error("perplexity must lie in (1, n), got " + format_double(perplexity));
    require_finite(X, "affinities");

    const Matrix D = squared_distances(X);
    const double target = std::log(perplexity);
    const double tol = kEntropyTolBits * std::log(2.0);

    Matrix cond = Matrix::Zero(n, n);
    std::vector<double> e(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        int zeros = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            dmin = std::min(dmin, D(i, j));
            if (D(i, j) == 0.0) ++zeros;
        }
        // The conditional entropy cannot drop below log(#exact duplicates).
        if (zeros > 0 && static_cast<double>(zeros) >= perplexity)
            throw Error("row " + std::to_string(i) + " has " + std::to_string(zeros) +
                        " identical duplicates, too many for perplexity " + format_double(perplexity) +
                        "; add a small jitter to the features");

        double beta = 1.0;
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double sum = 0.0;
        bool converged = false;
        for (int iter = 0; iter < kMaxBisection; ++iter) {
            sum = 0.0;
            double weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    e[j] = 0.0;
                    continue;
                }
                const double shifted = D(i, j) - dmin;
                e[j] = std::exp(-beta * shifted);
                sum += e[j];
                weighted += shifted * e[j];
            }
            const double entropy = std::log(sum) + beta * weighted / sum;
            const double diff = entropy - target;
            if (std::abs(diff) < tol) {
                converged = true;
                break;
            }
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        if (!converged)
            throw Error("perplexity search did not converge for row " + std::to_string(i) +
                        "; add a small jitter to the features");
        for (Eigen::Index j = 0; j < n; ++j) cond(i, j) = e[j] / sum;
    }
    return cond;
}

Matrix pairwise_affinities(const Matrix& X, double perplexity) {
    const Matrix cond = conditional_affinities(X, perplexity);
    const Eigen::Index n = cond.rows();
    Matrix P(n, n);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) {
                P(i, j) = 0.0;
                continue;
            }
            P(i, j) = std::max((cond(i, j) + cond(j, i)) * scale, kAffinityFloor);
            total += P(i, j);
        }
    }
    P /= total;
    return P;
}

Matrix student_affinities(const Matrix& Y) {
    const Eigen::Index n = Y.rows();
    Matrix Q = Matrix::Zero(n, n);
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double w = 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
            Q(i, j) = w;
            Q(j, i) = w;
            z += 2.0 * w;
        }
    return Q / z;
}

double kl_divergence(const Matrix& P, const Matrix& Y) {
    const Matrix Q = student_affinities(Y);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            if (i == j || P(i, j) <= 0.0) continue;
            kl += P(i, j) * std::log(P(i, j) / std::max(Q(i, j), std::numeric_limits<double>::min()));
        }
    return kl;
}

Matrix kl_gradient(const Matrix& P, const Matrix& Y) {
    const Eigen::Index n = Y.rows();
    Matrix num = Matrix::Zero(n, n);
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double w = 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
            num(i, j) = w;
            num(j, i) = w;
            z += 2.0 * w;
        }
    Matrix grad = Matrix::Zero(n, Y.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double coeff = (P(i, j) - num(i, j) / z) * num(i, j);
            grad.row(i) += coeff * (Y.row(i) - Y.row(j));
        }
    }
    return 4.0 * grad;
}

Embedding2D tsne(const Matrix& X, const TsneParams& params, std::vector<std::string> ids) {
    const Eigen::Index n = X.rows();
    if (n < 3) throw Error("t-SNE needs at least 3 points");
    if (params.iterations <= 0 || !(params.learning_rate > 0.0) || params.early_exaggeration < 1.0 ||
        params.exaggeration_iters < 0 || params.momentum_initial < 0.0 || params.momentum_initial >= 1.0 ||
        params.momentum_final < 0.0 || params.momentum_final >= 1.0 || !(params.perplexity > 1.0))
        throw Error("invalid t-SNE parameters");

    const double perplexity = effective_perplexity(params.perplexity, static_cast<std::size_t>(n));
    const Matrix P = pairwise_affinities(X, perplexity);

    Rng rng(params.seed);
    Matrix Y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < 2; ++c) Y(i, c) = kInitSigma * rng.normal();

    Matrix update = Matrix::Zero(n, 2);
    Matrix gains = Matrix::Ones(n, 2);
    std::vector<TracePoint> trace;
    const Matrix Pex = P * params.early_exaggeration;

    for (int it = 0; it < params.iterations; ++it) {
        const bool exaggerating = it < params.exaggeration_iters;
        if (it == params.exaggeration_iters) {
            // Second phase starts from a fresh optimizer state.
            update.setZero();
            gains.setOnes();
        }
        const Matrix grad = kl_gradient(exaggerating ? Pex : P, Y);
        const double momentum = exaggerating ? params.momentum_initial : params.momentum_final;
        for (Eigen::Index i = 0; i < n; ++i)
            for (int c = 0; c < 2; ++c) {
                const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
                gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, kMinGain) : gains(i, c) + 0.2;
                update(i, c) = momentum * update(i, c) - params.learning_rate * gains(i, c) * grad(i, c);
            }
        Y += update;
        Y.rowwise() -= Y.colwise().mean();
        if ((it + 1) % kTraceEvery == 0) trace.push_back({it + 1, kl_divergence(P, Y)});
    }

    Embedding2D emb;
    emb.sample_ids = ensure_ids(std::move(ids), n);
    emb.coords = std::move(Y);
    emb.method = Method::tsne;
    emb.params = params.to_json();
    emb.params["effective_perplexity"] = perplexity;
    emb.objective_trace = std::move(trace);
    return emb;
}

Embedding2D pca2(const Matrix& X, std::vector<std::string> ids) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (n < 3 || d < 2) throw Error("PCA needs n >= 3 and d >= 2");
    require_finite(X, "PCA");

    const Matrix centered = X.rowwise() - X.colwise().mean();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");

    // Eigenvalues come back ascending.
    Matrix axes(d, 2);
    axes.col(0) = solver.eigenvectors().col(d - 1);
    axes.col(1) = solver.eigenvectors().col(d - 2);
    const double top = std::max(solver.eigenvalues()(d - 1), 0.0);
    const double second = std::max(solver.eigenvalues()(d - 2), 0.0);
    const double rank_tol = 1e-12 * std::max(top, std::numeric_limits<double>::min());
    const bool first_null = top <= std::numeric_limits<double>::min();
    const bool second_null = second <= rank_tol;

    for (int c = 0; c < 2; ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < d; ++k)
            if (std::abs(axes(k, c)) > std::abs(axes(best, c))) best = k;
        if (axes(best, c) < 0.0) axes.col(c) *= -1.0;
    }

    Matrix coords = centered * axes;
    if (second_null) coords.col(1).setZero();
    if (first_null) coords.col(0).setZero();

    Embedding2D emb;
    emb.sample_ids = ensure_ids(std::move(ids), n);
    emb.coords = std::move(coords);
    emb.method = Method::pca;
    emb.params["explained_variance"] = {top, second};
    emb.params["rank_deficient"] = second_null;
    return emb;
}

Embedding2D randproj2(const Matrix& X, std::uint64_t seed, std::vector<std::string> ids) {
    const Eigen::Index d = X.cols();
    if (d < 2) throw Error("random projection needs d >= 2");
    require_finite(X, "random projection");
    Rng rng(seed);
    Matrix R(d, 2);
    const double scale = 1.0 / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < d; ++i)
        for (int c = 0; c < 2; ++c) R(i, c) = scale * rng.normal();

    Embedding2D emb;
    emb.sample_ids = ensure_ids(std::move(ids), X.rows());
    emb.coords = X * R;
    emb.method = Method::randproj;
    emb.params["seed"] = seed;
    return emb;
}

Matrix standardize(const Matrix& X) {
    Matrix out = X;
    const double n = static_cast<double>(X.rows());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double mean = X.col(c).mean();
        const double var = (X.col(c).array() - mean).square().sum() / n;
        if (var <= 0.0) {
            out.col(c).setZero();
        } else {
            out.col(c) = (X.col(c).array() - mean) / std::sqrt(var);
        }
    }
    return out;
}

std::string embedding_to_csv(const Embedding2D& emb) {
    std::string out = "sample_id,x,y,method\n";
    const auto method = to_string(emb.method);
    for (std::size_t i = 0; i < emb.sample_ids.size(); ++i) {
        out += emb.sample_ids[i] + "," + format_double(emb.coords(i, 0)) + "," +
               format_double(emb.coords(i, 1)) + "," + method + "\n";
    }
    return out;
}

std::string embedding_sidecar(const Embedding2D& emb) {
    ordered_json j;
    j["method"] = to_string(emb.method);
    j["params"] = emb.params;
    if (emb.objective_trace) {
        ordered_json trace = ordered_json::array();
        for (const auto& tp : *emb.objective_trace) trace.push_back({tp.iteration, tp.kl});
        j["objective_trace"] = std::move(trace);
    } else {
        j["objective_trace"] = nullptr;
    }
    return j.dump(2) + "\n";
}

Embedding2D embedding_from_files(std::string_view csv, std::string_view sidecar) {
    Embedding2D emb;
    const auto lines = split_lines(csv);
    if (lines.empty() || lines.front() != "sample_id,x,y,method") throw Error("embedding CSV: bad header");
    std::vector<std::array<double, 2>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 4) throw Error("embedding CSV line " + std::to_string(i + 1) + ": expected 4 fields");
        emb.sample_ids.push_back(f[0]);
        rows.push_back({parse_double(f[1]), parse_double(f[2])});
        emb.method = parse_method(f[3]);
    }
    emb.coords.resize(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        emb.coords(i, 0) = rows[i][0];
        emb.coords(i, 1) = rows[i][1];
    }
    try {
        const auto j = ordered_json::parse(sidecar);
        emb.method = parse_method(j.at("method").get<std::string>());
        emb.params = j.at("params");
        if (!j.at("objective_trace").is_null()) {
            std::vector<TracePoint> trace;
            for (const auto& tp : j.at("objective_trace")) trace.push_back({tp.at(0).get<int>(), tp.at(1).get<double>()});
            emb.objective_trace = std::move(trace);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("embedding sidecar: ") + e.what());
    }
    return emb;
}

}  // namespace malgrid::reduce
