#include "malgrid/fft.hpp"

#include "malgrid/common.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

namespace malgrid::fft {

namespace {

// Plans are created once per shape (planner calls are not thread-safe) and
// executed on caller buffers through the new-array interface.
fftw_plan plan_for(std::size_t rows, std::size_t cols, bool inverse) {
    static std::mutex mu;
    static std::map<std::tuple<std::size_t, std::size_t, bool>, fftw_plan> plans;
    std::lock_guard lock(mu);
    auto& plan = plans[{rows, cols, inverse}];
    if (!plan) {
        std::vector<cplx> scratch(rows * cols);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        const int sign = inverse ? FFTW_BACKWARD : FFTW_FORWARD;
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        plan = rows == 1 ? fftw_plan_dft_1d(static_cast<int>(cols), buf, buf, sign, flags)
                         : fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf, buf, sign, flags);
        if (!plan) throw Error("fft: could not create plan");
    }
    return plan;
}

void run(std::span<cplx> data, std::size_t rows, std::size_t cols, bool inverse) {
    if (data.empty()) return;
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan_for(rows, cols, inverse), buf, buf);
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(data.size());
        for (auto& x : data) x *= scale;
    }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void transform(std::span<cplx> data, bool inverse) { run(data, 1, data.size(), inverse); }

void transform_2d(std::span<cplx> data, std::size_t rows, std::size_t cols, bool inverse) {
    if (data.size() != rows * cols) throw Error("fft: buffer size mismatch");
    run(data, rows, cols, inverse);
}

}  // namespace malgrid::fft
