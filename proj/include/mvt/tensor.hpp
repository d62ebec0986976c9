#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mvt {

// Dense row-major f64 tensor. Rank is 1 or 2 everywhere in this codebase;
// sequences are [len x d] matrices, scalars are size-1 rank-1 tensors.
// `grad` is allocated (zeroed) iff requires_grad is set.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    // 2-D accessors; a rank-1 tensor counts as a single row.
    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
    std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : (shape_.empty() ? 0 : shape_[0]); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool requires_grad = false;
    std::vector<double> grad;

    void enable_grad();
    void zero_grad();
    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<std::size_t> shape);
TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values);
TensorPtr make_scalar(double v);
TensorPtr make_param(std::vector<std::size_t> shape, std::vector<double> values);

std::string shape_str(const std::vector<std::size_t>& shape);

// Reverse-mode tape. Ops append one backward closure per recorded node;
// backward() replays them once, newest first. Gradients accumulate
// additively, so fan-out sums path contributions.
class GradTape {
public:
    void record(std::function<void()> backfn) { entries_.push_back(std::move(backfn)); }

    // loss must be a scalar recorded under this tape.
    void backward(const TensorPtr& loss);

    void reset() { entries_.clear(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<std::function<void()>> entries_;
};

}  // namespace mvt
