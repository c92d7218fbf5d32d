#include "bd/tensor.hpp"

#include <sstream>

namespace bd {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    Tensor t;
    int64_t n = shape_numel(shape);
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<double>>(static_cast<size_t>(n), value);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(data.size()))
        throw ContractError("tensor data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<double>>(std::move(data));
    return t;
}

Tensor Tensor::share(Shape shape, std::shared_ptr<std::vector<double>> data) {
    int64_t n = shape_numel(shape);
    if (!data || n != static_cast<int64_t>(data->size()))
        throw ContractError("share: buffer length does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.grad_state_ = std::make_shared<GradState>();
    return t;
}

Tensor Tensor::param_zeros(Shape shape) { return param_full(std::move(shape), 0.0); }

Tensor Tensor::param_full(Shape shape, double value) {
    int64_t n = shape_numel(shape);
    return param(std::move(shape), std::vector<double>(static_cast<size_t>(n), value));
}

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() requires a single-element tensor, got " + shape_str(shape_));
    return (*data_)[0];
}

const std::vector<double>& Tensor::grad() const {
    if (!grad_state_) throw ContractError("grad() on a tensor without requires_grad");
    if (grad_state_->grad.empty())
        throw ContractError("grad() before any backward touched this leaf");
    return grad_state_->grad;
}

std::vector<double>& Tensor::grad_mut() {
    if (!grad_state_) throw ContractError("grad_mut() on a tensor without requires_grad");
    if (grad_state_->grad.empty()) grad_state_->grad.assign(static_cast<size_t>(numel()), 0.0);
    return grad_state_->grad;
}

void Tensor::zero_grad() {
    if (grad_state_) grad_state_->grad.clear();
}

Tensor Tensor::detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<double>>(*data_);
    return t;
}

}  // namespace bd
