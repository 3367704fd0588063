#include "malgrid/gist.hpp"

#include "malgrid/common.hpp"
#include "malgrid/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace malgrid::gist {

namespace {

constexpr double kVarianceFloor = 1e-8;

double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
    if (a < 0) a += 2.0 * std::numbers::pi;
    return a - std::numbers::pi;
}

struct AxisWeights {
    std::vector<int> first;
    std::vector<std::vector<double>> weights;
};

AxisWeights area_weights(int n_src, int n_dst) {
    AxisWeights aw;
    aw.first.resize(n_dst);
    aw.weights.resize(n_dst);
    const double scale = static_cast<double>(n_src) / n_dst;
    for (int i = 0; i < n_dst; ++i) {
        const double lo = i * scale;
        const double hi = (i + 1) * scale;
        const int k0 = static_cast<int>(std::floor(lo));
        const int k1 = std::min(n_src - 1, static_cast<int>(std::ceil(hi)) - 1);
        aw.first[i] = k0;
        for (int k = k0; k <= k1; ++k) {
            const double overlap = std::min(hi, k + 1.0) - std::max(lo, static_cast<double>(k));
            aw.weights[i].push_back(std::max(0.0, overlap) / scale);
        }
    }
    return aw;
}

}  // namespace

std::string to_string(FeatureKind kind) { return kind == FeatureKind::gist320 ? "gist320" : "external"; }

FeatureKind parse_feature_kind(std::string_view text) {
    if (text == "gist320" || text == "gist") return FeatureKind::gist320;
    if (text == "external") return FeatureKind::external;
    throw Error("unknown feature kind '" + std::string(text) + "'");
}

double transfer_at(const Channel& ch, double fx, double fy) {
    const double f = std::hypot(fx, fy);
    if (f == 0.0) return 0.0;
    const double log_ratio = std::log(f / ch.center_frequency);
    const double log_sigma = std::log(kRadialSigmaRatio);
    const double radial = std::exp(-(log_ratio * log_ratio) / (2.0 * log_sigma * log_sigma));
    const int n_orient = kOrientationsPerScale[ch.scale_index];
    const double angular_sigma = 0.6 * std::numbers::pi / n_orient;
    const double d = wrap_angle(std::atan2(fy, fx) - ch.orientation);
    const double angular = std::exp(-(d * d) / (2.0 * angular_sigma * angular_sigma));
    return radial * angular;
}

GaborBank build_bank(int preprocess_size) {
    if (preprocess_size < 32 || !fft::is_power_of_two(static_cast<std::size_t>(preprocess_size)))
        throw Error("GIST preprocess size must be a power of two >= 32, got " + std::to_string(preprocess_size));
    const int P = preprocess_size;
    GaborBank bank;
    bank.preprocess_size = P;
    double center = kTopCenterFrequency;
    for (int s = 0; s < static_cast<int>(kOrientationsPerScale.size()); ++s, center /= 2.0) {
        const int n_orient = kOrientationsPerScale[s];
        for (int o = 0; o < n_orient; ++o) {
            Channel ch;
            ch.scale_index = s;
            ch.orientation_index = o;
            ch.center_frequency = center;
            ch.orientation = std::numbers::pi * o / n_orient;
            ch.transfer.assign(static_cast<std::size_t>(P) * P, 0.0);
            for (int i = 0; i < P; ++i) {
                for (int j = 0; j < P; ++j) {
                    // The Nyquist row/column has no symmetric partner; leave it dark
                    // so the bank commutes exactly with transposition.
                    if (i == 0 || j == 0) continue;
                    const double fy = static_cast<double>(i - P / 2) / P;
                    const double fx = static_cast<double>(j - P / 2) / P;
                    ch.transfer[static_cast<std::size_t>(i) * P + j] = transfer_at(ch, fx, fy);
                }
            }
            bank.channels.push_back(std::move(ch));
        }
    }
    return bank;
}

Plane resize_area(const Plane& src, int width, int height) {
    if (src.width <= 0 || src.height <= 0 || width <= 0 || height <= 0) throw Error("resize of empty plane");
    if (src.width == width && src.height == height) return src;
    const auto wx = area_weights(src.width, width);
    const auto wy = area_weights(src.height, height);

    // Columns first: src.height x width.
    std::vector<double> tmp(static_cast<std::size_t>(src.height) * width, 0.0);
    for (int r = 0; r < src.height; ++r) {
        const double* row = src.values.data() + static_cast<std::size_t>(r) * src.width;
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            const auto& w = wx.weights[c];
            for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * row[wx.first[c] + k];
            tmp[static_cast<std::size_t>(r) * width + c] = acc;
        }
    }
    Plane out{width, height, std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
    for (int r = 0; r < height; ++r) {
        const auto& w = wy.weights[r];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double* row = tmp.data() + static_cast<std::size_t>(wy.first[r] + k) * width;
            for (int c = 0; c < width; ++c) out.values[static_cast<std::size_t>(r) * width + c] += w[k] * row[c];
        }
    }
    return out;
}

void normalize(Plane& plane) {
    const double n = static_cast<double>(plane.values.size());
    if (n == 0) return;
    double mean = 0.0;
    for (double v : plane.values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double& v : plane.values) {
        v -= mean;
        var += v * v;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(std::max(var, kVarianceFloor));
    for (double& v : plane.values) v *= inv;
}

std::vector<double> pool_blocks(std::span<const double> response, int size, int grid) {
    if (grid <= 0 || size % grid != 0) throw Error("pool_blocks: size must be a multiple of grid");
    if (response.size() != static_cast<std::size_t>(size) * size) throw Error("pool_blocks: response size mismatch");
    const int block = size / grid;
    std::vector<double> pooled(static_cast<std::size_t>(grid) * grid, 0.0);
    for (int by = 0; by < grid; ++by) {
        for (int bx = 0; bx < grid; ++bx) {
            double acc = 0.0;
            for (int y = by * block; y < (by + 1) * block; ++y)
                for (int x = bx * block; x < (bx + 1) * block; ++x)
                    acc += response[static_cast<std::size_t>(y) * size + x];
            pooled[static_cast<std::size_t>(by) * grid + bx] = acc / (block * block);
        }
    }
    return pooled;
}

std::vector<double> describe(const Plane& plane, const GaborBank& bank) {
    const int P = bank.preprocess_size;
    Plane work = resize_area(plane, P, P);
    normalize(work);

    std::vector<fft::cplx> spectrum(work.values.begin(), work.values.end());
    fft::transform_2d(spectrum, P, P, false);

    std::vector<double> out;
    out.reserve(bank.channels.size() * kBlockGrid * kBlockGrid);
    std::vector<fft::cplx> filtered(spectrum.size());
    std::vector<double> magnitude(spectrum.size());
    for (std::size_t c = 0; c < bank.channels.size(); ++c) {
        for (int u = 0; u < P; ++u) {
            // Unshifted FFT index u holds frequency u (u < P/2) or u - P; centered index is that + P/2.
            const int ci = (u + P / 2) % P;
            for (int v = 0; v < P; ++v) {
                const int cj = (v + P / 2) % P;
                const std::size_t k = static_cast<std::size_t>(u) * P + v;
                filtered[k] = spectrum[k] * bank.gain(c, ci, cj);
            }
        }
        fft::transform_2d(filtered, P, P, true);
        for (std::size_t k = 0; k < filtered.size(); ++k) magnitude[k] = std::abs(filtered[k]);
        const auto pooled = pool_blocks(magnitude, P, kBlockGrid);
        out.insert(out.end(), pooled.begin(), pooled.end());
    }
    return out;
}

FeatureVector gist(const byteplot::ByteplotImage& img, const GaborBank& bank, std::string sample_id) {
    if (img.width <= 0 || img.height <= 0 || img.pixels.empty()) throw Error("gist of an empty image");
    Plane plane{img.width, img.height, std::vector<double>(img.pixels.begin(), img.pixels.end())};
    FeatureVector fv;
    fv.sample_id = std::move(sample_id);
    fv.values = describe(plane, bank);
    fv.kind = FeatureKind::gist320;
    fv.dim = static_cast<int>(fv.values.size());
    return fv;
}

std::vector<FeatureVector> parse_external_features(std::string_view csv, FeatureKind kind) {
    std::vector<FeatureVector> out;
    const auto lines = split_lines(csv);
    std::size_t first = 0;
    while (first < lines.size() && lines[first].empty()) ++first;
    if (first == lines.size()) return out;

    const auto header = split_csv_line(lines[first]);
    if (header.empty() || header[0] != "sample_id") throw Error("feature file: first column must be sample_id");
    const std::size_t dim = header.size() - 1;
    if (dim == 0) throw Error("feature file: no feature columns");
    for (std::size_t c = 1; c < header.size(); ++c)
        if (header[c] != "f" + std::to_string(c - 1))
            throw Error("feature file: column " + std::to_string(c) + " must be named f" + std::to_string(c - 1));

    for (std::size_t i = first + 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto fields = split_csv_line(lines[i]);
        const std::string row = "row " + std::to_string(i - first) + " (" + fields[0] + ")";
        if (fields.size() - 1 != dim)
            throw Error("feature file: ragged " + row + ": " + std::to_string(fields.size() - 1) +
                        " values, expected " + std::to_string(dim));
        FeatureVector fv;
        fv.sample_id = fields[0];
        fv.kind = kind;
        fv.dim = static_cast<int>(dim);
        fv.values.reserve(dim);
        for (std::size_t c = 1; c < fields.size(); ++c) {
            double v = 0.0;
            try {
                v = parse_double(fields[c]);
            } catch (const Error&) {
                throw Error("feature file: unparseable value in " + row);
            }
            if (!std::isfinite(v)) throw Error("feature file: non-finite value in " + row);
            fv.values.push_back(v);
        }
        out.push_back(std::move(fv));
    }
    return out;
}

std::vector<FeatureVector> load_external_features(const fs::path& path) {
    return parse_external_features(read_text(path), FeatureKind::external);
}

std::string features_to_csv(const std::vector<FeatureVector>& features) {
    std::string out = "sample_id";
    const std::size_t dim = features.empty() ? 0 : features.front().values.size();
    for (std::size_t c = 0; c < dim; ++c) out += ",f" + std::to_string(c);
    out += "\n";
    for (const auto& fv : features) {
        if (fv.values.size() != dim) throw Error("features_to_csv: mixed dimensions");
        out += fv.sample_id;
        for (double v : fv.values) {
            out += ",";
            out += format_double(v);
        }
        out += "\n";
    }
    return out;
}

}  // namespace malgrid::gist
