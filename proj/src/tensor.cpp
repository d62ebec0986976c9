#include "mvt/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mvt/errors.hpp"

namespace mvt {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
    for (std::size_t d : shape_)
        if (d == 0) throw ShapeError("tensor: zero dimension in shape " + shape_str(shape_));
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_product(shape_) != data_.size())
        throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

void Tensor::enable_grad() {
    requires_grad = true;
    grad.assign(data_.size(), 0.0);
}

void Tensor::zero_grad() {
    if (requires_grad) grad.assign(data_.size(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

TensorPtr make_tensor(std::vector<std::size_t> shape) {
    return std::make_shared<Tensor>(std::move(shape));
}

TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values));
}

TensorPtr make_scalar(double v) { return make_tensor({1}, {v}); }

TensorPtr make_param(std::vector<std::size_t> shape, std::vector<double> values) {
    auto t = make_tensor(std::move(shape), std::move(values));
    t->enable_grad();
    return t;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void GradTape::backward(const TensorPtr& loss) {
    if (!loss || loss->size() != 1)
        throw ConfigError("backward: loss must be a scalar tensor");
    if (!loss->requires_grad)
        throw ConfigError("backward: loss was not recorded under a tape");
    loss->grad.assign(1, 1.0);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

}  // namespace mvt
