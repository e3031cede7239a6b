// Times the OpenMP kernels against the serial reference implementations
// and verifies they agree bit-for-bit on every shape they are timed on.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "rxncond/kernels.hpp"
#include "rxncond/rng.hpp"

using namespace rxncond;
using Clock = std::chrono::steady_clock;

namespace {

template <class F>
double time_ms(F&& f, int reps) {
    f();  // warm up
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) f();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

template <class T>
std::vector<T> random_buffer(Rng& rng, size_t n) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.normal());
    return v;
}

int g_mismatches = 0;

template <class T>
void check_equal(const std::vector<T>& a, const std::vector<T>& b, const char* what) {
    if (a != b) {
        std::printf("  MISMATCH in %s\n", what);
        ++g_mismatches;
    }
}

void bench_gemm(int m, int n, int k, int reps) {
    Rng rng(1);
    const auto a = random_buffer<float>(rng, static_cast<size_t>(m) * k);
    const auto b = random_buffer<float>(rng, static_cast<size_t>(k) * n);
    std::vector<float> c_par(static_cast<size_t>(m) * n), c_ref(c_par.size());
    const double par =
        time_ms([&] { kern::gemm<float>(a.data(), b.data(), c_par.data(), m, n, k, false, false,
                                        false); },
                reps);
    const double ser =
        time_ms([&] { ref::gemm<float>(a.data(), b.data(), c_ref.data(), m, n, k, false, false,
                                       false); },
                reps);
    check_equal(c_par, c_ref, "gemm");
    const double gflops = 2.0 * m * n * k / (par * 1e6);
    std::printf("  gemm %4dx%4dx%4d   omp %8.3f ms   serial %8.3f ms   x%.2f   %6.2f GF/s\n", m,
                n, k, par, ser, ser / par, gflops);
}

void bench_softmax(int m, int n, int reps) {
    Rng rng(2);
    const auto x = random_buffer<float>(rng, static_cast<size_t>(m) * n);
    std::vector<float> y_par(x.size()), y_ref(x.size());
    const double par = time_ms([&] { kern::softmax_rows<float>(x.data(), y_par.data(), m, n); },
                               reps);
    const double ser = time_ms([&] { ref::softmax_rows<float>(x.data(), y_ref.data(), m, n); },
                               reps);
    check_equal(y_par, y_ref, "softmax_rows");
    std::printf("  softmax   %5dx%-4d   omp %8.3f ms   serial %8.3f ms   x%.2f\n", m, n, par, ser,
                ser / par);
}

void bench_layernorm(int m, int n, int reps) {
    Rng rng(3);
    const auto x = random_buffer<float>(rng, static_cast<size_t>(m) * n);
    const auto g = random_buffer<float>(rng, static_cast<size_t>(n));
    const auto b = random_buffer<float>(rng, static_cast<size_t>(n));
    std::vector<float> y_par(x.size()), y_ref(x.size());
    std::vector<float> rs_par(static_cast<size_t>(m)), rs_ref(rs_par.size());
    std::vector<float> mu_par(static_cast<size_t>(m)), mu_ref(mu_par.size());
    const double par = time_ms(
        [&] {
            kern::layernorm_rows<float>(x.data(), g.data(), b.data(), y_par.data(), rs_par.data(),
                                        mu_par.data(), m, n, 1e-5f);
        },
        reps);
    const double ser = time_ms(
        [&] {
            ref::layernorm_rows<float>(x.data(), g.data(), b.data(), y_ref.data(), rs_ref.data(),
                                       mu_ref.data(), m, n, 1e-5f);
        },
        reps);
    check_equal(y_par, y_ref, "layernorm_rows");
    std::printf("  layernorm %5dx%-4d   omp %8.3f ms   serial %8.3f ms   x%.2f\n", m, n, par, ser,
                ser / par);
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    if (argc > 1) threads = std::atoi(argv[1]);
    if (threads > 0) omp_set_num_threads(threads);
    std::printf("kernel benchmark, %d OpenMP threads\n", omp_get_max_threads());

    std::printf("gemm (f32):\n");
    bench_gemm(64, 64, 64, 200);
    bench_gemm(128, 128, 128, 50);
    bench_gemm(256, 256, 256, 10);
    bench_gemm(512, 512, 512, 3);
    bench_gemm(131, 64, 512, 50);  // decoder-shaped

    std::printf("row kernels (f32):\n");
    bench_softmax(512, 512, 50);
    bench_softmax(4096, 128, 50);
    bench_layernorm(512, 512, 50);
    bench_layernorm(4096, 128, 50);

    if (g_mismatches) {
        std::printf("%d kernel mismatches against the serial reference\n", g_mismatches);
        return 1;
    }
    std::printf("all timed kernels bit-identical to the serial reference\n");
    return 0;
}
