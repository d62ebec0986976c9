#pragma once

#include <cstddef>
#include <string>

namespace mvt::kern {

// Dense f64 primitives behind the tensor layer. Two implementations exist:
// a scalar reference and an AVX2 variant, selected once per process.
//
// The AVX2 kernels are written to be bit-identical to the scalar reference:
// every per-element operation sequence is preserved (matmul vectorizes the
// non-reduction axis, mul and add stay separate instructions, sqrt/div are
// IEEE-exact), and the build disables FP contraction. The equivalence tests
// assert bitwise equality, so results never depend on which variant runs.
struct Kernels {
    const char* name;

    // dst = a op b, elementwise over n values
    void (*add)(const double* a, const double* b, double* dst, std::size_t n);
    void (*sub)(const double* a, const double* b, double* dst, std::size_t n);
    void (*mul)(const double* a, const double* b, double* dst, std::size_t n);

    // dst = a * s           (s scalar)
    void (*scale)(const double* a, double s, double* dst, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // dst = a / s
    void (*divs)(const double* a, double s, double* dst, std::size_t n);

    // max over n >= 1 finite values; if both +0 and -0 tie for the maximum
    // the sign of the returned zero is unspecified
    double (*max)(const double* a, std::size_t n);

    // c[m x n] (+)= a[m x k] * b[k x n], all row-major
    void (*matmul)(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n, bool accumulate);

    // Adam update over one parameter block:
    //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
    //   p -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
    // bc1/bc2 are the bias corrections 1-b1^t, 1-b2^t supplied by the caller.
    void (*adam)(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double b1, double b2, double eps, double bc1, double bc2);
};

const Kernels& scalar_kernels();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const Kernels* avx2_kernels();
bool avx2_supported();

// The process-wide selection. Defaults to the best supported variant; the
// MVT_KERNELS environment variable ("auto", "scalar", "avx2") overrides.
const Kernels& active();

// Force a variant, mainly for tests and the CLI --kernels flag.
// Throws ConfigError for an unknown name or an unsupported variant.
void select(const std::string& which);

}  // namespace mvt::kern
