// Timing comparison between the OpenMP kernels and the serial reference
// implementations, plus a parity check that both agree.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rpnet/kernels.hpp"
#include "rpnet/reference_kernels.hpp"
#include "rpnet/rng.hpp"

namespace {

using rpnet::Tensor;

Tensor<float> random_tensor(std::vector<int> shape, std::uint64_t seed) {
    Tensor<float> t(std::move(shape));
    rpnet::Rng rng(seed);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm-up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

double max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i])));
    return m;
}

void bench_conv(int batch, int ci, int co, int h, int w, int k, int dilation, int reps) {
    auto input = random_tensor({batch, ci, h, w}, 11);
    auto weights = random_tensor({co, ci, k, k}, 22);
    auto bias = random_tensor({co}, 33);
    int pad = dilation * (k - 1) / 2;

    Tensor<float> fast, slow;
    double t_fast = time_ms([&] { fast = rpnet::conv2d_forward(input, weights, bias, 1, pad, dilation); }, reps);
    double t_slow = time_ms([&] { slow = rpnet::reference::conv2d_forward(input, weights, bias, 1, pad, dilation); }, reps);

    double flops = 2.0 * batch * co * ci * h * w * k * k;
    std::printf("conv  %dx%d  %2d->%2d k%d d%d | omp %8.3f ms (%6.2f GFLOP/s) | ref %8.3f ms (%6.2f GFLOP/s) | x%.1f | diff %.2e\n",
                h, w, ci, co, k, dilation, t_fast, flops / t_fast / 1e6, t_slow,
                flops / t_slow / 1e6, t_slow / t_fast, max_abs_diff(fast, slow));
}

void bench_dense(int batch, int in_dim, int out_dim, int reps) {
    auto input = random_tensor({batch, in_dim}, 44);
    auto weights = random_tensor({out_dim, in_dim}, 55);
    auto bias = random_tensor({out_dim}, 66);

    Tensor<float> fast, slow;
    double t_fast = time_ms([&] { fast = rpnet::dense_forward(input, weights, bias); }, reps);
    double t_slow = time_ms([&] { slow = rpnet::reference::dense_forward(input, weights, bias); }, reps);

    double flops = 2.0 * batch * in_dim * out_dim;
    std::printf("dense %5d->%4d  b%2d   | omp %8.3f ms (%6.2f GFLOP/s) | ref %8.3f ms (%6.2f GFLOP/s) | x%.1f | diff %.2e\n",
                in_dim, out_dim, batch, t_fast, flops / t_fast / 1e6, t_slow,
                flops / t_slow / 1e6, t_slow / t_fast, max_abs_diff(fast, slow));
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n");
#endif
    // network-shaped workloads at the default 64x53 resolution
    bench_conv(16, 3, 8, 53, 64, 3, 1, 20);
    bench_conv(16, 8, 16, 53, 64, 3, 1, 20);
    for (int d = 1; d <= 8; d *= 2) bench_conv(16, 16, 16, 53, 64, 3, d, 20);
    bench_conv(16, 16, 32, 13, 16, 3, 1, 40);
    bench_dense(16, 6656, 128, 40);
    bench_dense(16, 3328, 128, 40);
    bench_dense(16, 128, 64, 200);
    return 0;
}
