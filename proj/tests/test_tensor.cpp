#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "doctest.h"
#include "mvt/errors.hpp"
#include "mvt/ops.hpp"
#include "mvt/rng.hpp"
#include "mvt/tensor.hpp"

using namespace mvt;

namespace {

TensorPtr random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -2.0,
                        double hi = 2.0) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return make_tensor(std::move(shape), std::move(v));
}

// Scalar loss as a function of the inputs; tape == nullptr gives the pure
// forward value used for the central differences.
using BuildFn = std::function<TensorPtr(GradTape*, const std::vector<TensorPtr>&)>;

void check_gradients(const BuildFn& build, std::vector<TensorPtr> inputs, double tol = 1e-4) {
    GradTape tape;
    for (auto& t : inputs) {
        t->enable_grad();
        t->zero_grad();
    }
    TensorPtr loss = build(&tape, inputs);
    REQUIRE(loss->size() == 1);
    tape.backward(loss);

    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor& t = *inputs[ti];
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double x0 = t[i];
            const double h = 1e-5 * std::max(1.0, std::abs(x0));
            t[i] = x0 + h;
            const double fp = (*build(nullptr, inputs))[0];
            t[i] = x0 - h;
            const double fm = (*build(nullptr, inputs))[0];
            t[i] = x0;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = t.grad[i];
            const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
            INFO("input ", ti, " entry ", i, " numeric ", num, " analytic ", ana);
            CHECK(std::abs(num - ana) / denom < tol);
        }
    }
}

// Weighted sum turns any op output into a scalar with non-uniform upstream
// gradients.
TensorPtr weighted_sum(GradTape* tape, const TensorPtr& y, const TensorPtr& w) {
    return ops::sum_all(tape, ops::mul(tape, y, w));
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("tensor shape accessors") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    CHECK(a.at(1, 2) == 6);
    Tensor v({4});
    CHECK(v.rows() == 1);
    CHECK(v.cols() == 4);
    CHECK(Tensor::scalar(3.5)[0] == 3.5);
}

TEST_CASE("all_finite flags nan and inf") {
    Tensor a({3}, {1.0, 2.0, 3.0});
    CHECK(a.all_finite());
    a[1] = std::nan("");
    CHECK(!a.all_finite());
    a[1] = std::numeric_limits<double>::infinity();
    CHECK(!a.all_finite());
}

TEST_CASE("matmul forward hand example") {
    auto a = make_tensor({2, 2}, {1, 2, 3, 4});
    auto b = make_tensor({2, 2}, {5, 6, 7, 8});
    auto c = ops::matmul(nullptr, a, b);
    CHECK(c->values() == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("transpose forward") {
    auto a = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    auto t = ops::transpose(nullptr, a);
    CHECK(t->shape() == std::vector<std::size_t>{3, 2});
    CHECK(t->values() == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("elementwise forwards") {
    auto a = make_tensor({2}, {1, 2});
    auto b = make_tensor({2}, {3, 4});
    CHECK(ops::add(nullptr, a, b)->values() == std::vector<double>{4, 6});
    CHECK(ops::sub(nullptr, a, b)->values() == std::vector<double>{-2, -2});
    CHECK(ops::mul(nullptr, a, b)->values() == std::vector<double>{3, 8});
    CHECK(ops::scale(nullptr, a, 2.5)->values() == std::vector<double>{2.5, 5});
    auto r = make_tensor({3}, {-1, 0, 2});
    CHECK(ops::relu(nullptr, r)->values() == std::vector<double>{0, 0, 2});
}

TEST_CASE("add_rowvec broadcasts over rows") {
    auto x = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = make_tensor({3}, {10, 20, 30});
    CHECK(ops::add_rowvec(nullptr, x, b)->values() ==
          std::vector<double>{11, 22, 33, 14, 25, 36});
}

TEST_CASE("softmax rows and columns") {
    auto a = make_tensor({2, 2}, {0, 0, std::log(1.0), std::log(3.0)});
    auto rows = ops::softmax(nullptr, a, 1);
    CHECK(rows->at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rows->at(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(rows->at(1, 1) == doctest::Approx(0.75).epsilon(1e-12));
    auto cols = ops::softmax(nullptr, a, 0);
    // Column sums are 1.
    CHECK(cols->at(0, 0) + cols->at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cols->at(0, 1) + cols->at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant and stable") {
    auto a = make_tensor({3}, {1000.0, 1001.0, 1002.0});
    auto y = ops::softmax(nullptr, a, 0);
    CHECK(y->all_finite());
    CHECK((*y)[0] + (*y)[1] + (*y)[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("masked softmax zeroes invalid entries exactly") {
    auto s = make_tensor({2, 3}, {0.3, -0.7, 1.1, 0.2, 0.9, -0.4});
    std::vector<std::uint8_t> mask = {1, 0, 0, 1, 1, 0};
    auto w = ops::masked_softmax_rows(nullptr, s, mask);
    CHECK(w->at(0, 0) == 1.0);
    CHECK(w->at(0, 1) == 0.0);
    CHECK(w->at(0, 2) == 0.0);
    CHECK(w->at(1, 2) == 0.0);
    CHECK(w->at(1, 0) + w->at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    // Valid entries match the softmax of the valid sub-row.
    const double e0 = std::exp(0.2 - 0.9), e1 = 1.0;
    CHECK(w->at(1, 0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
}

TEST_CASE("masked softmax never reads masked scores") {
    auto s1 = make_tensor({1, 3}, {0.5, 99.0, -0.25});
    auto s2 = make_tensor({1, 3}, {0.5, std::nan(""), -0.25});
    std::vector<std::uint8_t> mask = {1, 0, 1};
    auto w1 = ops::masked_softmax_rows(nullptr, s1, mask);
    auto w2 = ops::masked_softmax_rows(nullptr, s2, mask);
    CHECK(std::memcmp(w1->data(), w2->data(), 3 * sizeof(double)) == 0);
}

TEST_CASE("layer_norm normalizes each row") {
    auto x = make_tensor({1, 3}, {1, 2, 3});
    auto g = make_tensor({3}, {1, 1, 1});
    auto b = make_tensor({3}, {0, 0, 0});
    auto y = ops::layer_norm(nullptr, x, g, b, 1e-12);
    const double s = std::sqrt(1.5);  // (x - 2)/sqrt(2/3)
    CHECK((*y)[0] == doctest::Approx(-s).epsilon(1e-9));
    CHECK((*y)[1] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK((*y)[2] == doctest::Approx(s).epsilon(1e-9));
}

TEST_CASE("embedding_rows gathers by id") {
    auto table = make_tensor({3, 2}, {0, 1, 10, 11, 20, 21});
    auto rows = ops::embedding_rows(nullptr, table, {2, 0, 2});
    CHECK(rows->values() == std::vector<double>{20, 21, 0, 1, 20, 21});
}

TEST_CASE("concat and slice of columns") {
    auto a = make_tensor({2, 2}, {1, 2, 5, 6});
    auto b = make_tensor({2, 1}, {3, 7});
    auto c = ops::concat_cols(nullptr, a, b);
    CHECK(c->values() == std::vector<double>{1, 2, 3, 5, 6, 7});
    auto s = ops::slice_cols(nullptr, c, 1, 3);
    CHECK(s->values() == std::vector<double>{2, 3, 6, 7});
}

TEST_CASE("cross_entropy_rows hand value") {
    // Uniform logits over 2 classes: loss = ln 2 regardless of gold.
    auto logits = make_tensor({2, 2}, {0, 0, 0, 0});
    auto loss = ops::cross_entropy_rows(nullptr, logits, {0, 1}, {1, 1});
    CHECK((*loss)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // Pad rows do not contribute.
    auto logits2 = make_tensor({2, 2}, {0, 0, 50, -50});
    auto loss2 = ops::cross_entropy_rows(nullptr, logits2, {0, 1}, {1, 0});
    CHECK((*loss2)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(ops::cross_entropy_rows(nullptr, logits, {0, 1}, {0, 0}), DataError);
}

TEST_CASE("log_softmax_row hand value") {
    std::vector<double> row = {0.0, 0.0};
    auto l = ops::log_softmax_row(row.data(), 2);
    CHECK(l[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    CHECK(l[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("shape mismatches throw") {
    auto a = make_tensor({2, 3});
    auto b = make_tensor({3, 2});
    CHECK_THROWS_AS(ops::add(nullptr, a, b), ShapeError);
    CHECK_THROWS_AS(ops::matmul(nullptr, a, a), ShapeError);
    auto v = make_tensor({2});
    CHECK_THROWS_AS(ops::add_rowvec(nullptr, a, v), ShapeError);
    CHECK_THROWS_AS(ops::slice_cols(nullptr, a, 2, 2), ShapeError);
}

TEST_CASE("gradient: matmul") {
    Rng rng(21);
    auto w = random_tensor(rng, {3, 2});
    check_gradients(
        [w](GradTape* t, const std::vector<TensorPtr>& in) {
            return weighted_sum(t, ops::matmul(t, in[0], in[1]), w);
        },
        {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})});
}

TEST_CASE("gradient: transpose") {
    Rng rng(22);
    auto w = random_tensor(rng, {4, 3});
    check_gradients(
        [w](GradTape* t, const std::vector<TensorPtr>& in) {
            return weighted_sum(t, ops::transpose(t, in[0]), w);
        },
        {random_tensor(rng, {3, 4})});
}

TEST_CASE("gradient: elementwise add sub mul scale") {
    Rng rng(23);
    auto w = random_tensor(rng, {2, 3});
    check_gradients(
        [w](GradTape* t, const std::vector<TensorPtr>& in) {
            auto y = ops::add(t, in[0], in[1]);
            y = ops::sub(t, y, in[2]);
            y = ops::mul(t, y, in[3]);
            y = ops::scale(t, y, -1.7);
            return weighted_sum(t, y, w);
        },
        {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3}),
         random_tensor(rng, {2, 3})});
}

TEST_CASE("gradient: add_rowvec") {
    Rng rng(24);
    auto w = random_tensor(rng, {3, 4});
    check_gradients(
        [w](GradTape* t, const std::vector<TensorPtr>& in) {
            return weighted_sum(t, ops::add_rowvec(t, in[0], in[1]), w);
        },
        {random_tensor(rng, {3, 4}), random_tensor(rng, {4})});
}

TEST_CASE("gradient: relu away from the kink") {
    Rng rng(25);
    auto x = make_tensor({2, 3}, {0.5, -0.7, 1.2, -1.5, 0.3, -0.2});
    auto w = random_tensor(rng, {2, 3});
    check_gradients(
        [w](GradTape* t, const std::vector<TensorPtr>& in) {
            return weighted_sum(t, ops::relu(t, in[0]), w);
        },
        {x});
}

TEST_CASE("gradient: softmax both axes") {
    Rng rng(26);
    auto w = random_tensor(rng, {3, 4});
    for (std::size_t axis : {std::size_t(0), std::size_t(1)}) {
        check_gradients(
            [w, axis](GradTape* t, const std::vector<TensorPtr>& in) {
                return weighted_sum(t, ops::softmax(t, in[0], axis), w);
            },
            {random_tensor(rng, {3, 4})});
    }
}

TEST_CASE("gradient: masked_softmax_rows") {
    Rng rng(27);
    auto w = random_tensor(rng, {3, 3});
    std::vector<std::uint8_t> mask = {1, 0, 0, 1, 1, 0, 1, 1, 1};  // causal
    check_gradients(
        [w, mask](GradTape* t, const std::vector<TensorPtr>& in) {
            return weighted_sum(t, ops::masked_softmax_rows(t, in[0], mask), w);
        },
        {random_tensor(rng, {3, 3})});
}

TEST_CASE("gradient: layer_norm") {
    Rng rng(28);
    auto w = random_tensor(rng, {3, 4});
    check_gradients(
        [w](GradTape* t, const std::vector<TensorPtr>& in) {
            return weighted_sum(t, ops::layer_norm(t, in[0], in[1], in[2], 1e-6), w);
        },
        {random_tensor(rng, {3, 4}), random_tensor(rng, {4}, 0.5, 1.5),
         random_tensor(rng, {4})});
}

TEST_CASE("gradient: embedding_rows accumulates repeated ids") {
    Rng rng(29);
    auto w = random_tensor(rng, {4, 3});
    std::vector<int> ids = {2, 0, 2, 4};
    check_gradients(
        [w, ids](GradTape* t, const std::vector<TensorPtr>& in) {
            return weighted_sum(t, ops::embedding_rows(t, in[0], ids), w);
        },
        {random_tensor(rng, {5, 3})});
}

TEST_CASE("gradient: concat and slice") {
    Rng rng(30);
    auto w = random_tensor(rng, {2, 2});
    check_gradients(
        [w](GradTape* t, const std::vector<TensorPtr>& in) {
            auto c = ops::concat_cols(t, in[0], in[1]);
            return weighted_sum(t, ops::slice_cols(t, c, 1, 3), w);
        },
        {random_tensor(rng, {2, 2}), random_tensor(rng, {2, 2})});
}

TEST_CASE("gradient: cross_entropy_rows") {
    Rng rng(31);
    std::vector<int> gold = {1, 0, 3, 2};
    std::vector<std::uint8_t> live = {1, 0, 1, 1};
    check_gradients(
        [gold, live](GradTape* t, const std::vector<TensorPtr>& in) {
            return ops::cross_entropy_rows(t, in[0], gold, live);
        },
        {random_tensor(rng, {4, 5})});
}

TEST_CASE("fan-out accumulates gradients additively") {
    GradTape tape;
    auto x = make_tensor({2}, {1.0, -2.0});
    x->enable_grad();
    auto y = ops::add(&tape, x, x);  // y = 2x
    auto loss = ops::sum_all(&tape, y);
    tape.backward(loss);
    CHECK(x->grad == std::vector<double>{2.0, 2.0});

    x->zero_grad();
    tape.reset();
    auto sq = ops::mul(&tape, x, x);  // x^2
    auto loss2 = ops::sum_all(&tape, sq);
    tape.backward(loss2);
    CHECK(x->grad == std::vector<double>{2.0, -4.0});
}

TEST_CASE("taping is deterministic bitwise") {
    auto run = [] {
        Rng rng(77);
        GradTape tape;
        auto a = random_tensor(rng, {4, 4});
        auto b = random_tensor(rng, {4, 4});
        a->enable_grad();
        b->enable_grad();
        auto y = ops::matmul(&tape, ops::softmax(&tape, a, 1), b);
        auto loss = ops::sum_all(&tape, ops::relu(&tape, y));
        tape.backward(loss);
        std::vector<double> out = {(*loss)[0]};
        out.insert(out.end(), a->grad.begin(), a->grad.end());
        out.insert(out.end(), b->grad.begin(), b->grad.end());
        return out;
    };
    auto r1 = run(), r2 = run();
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
}

TEST_CASE("backward requires a recorded scalar") {
    GradTape tape;
    auto x = make_tensor({2}, {1, 2});
    x->enable_grad();
    auto y = ops::add(&tape, x, x);
    CHECK_THROWS(tape.backward(y));  // not a scalar
}

}  // TEST_SUITE
