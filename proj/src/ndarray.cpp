// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/ndarray.hpp"

#include <cmath>
#include <numeric>

#include "refinery/errors.hpp"

namespace refinery {

namespace {
std::int64_t shape_size(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw EvalError("negative dimension in shape");
        n *= d;
    }
    return n;
}
} // namespace

NDArray::NDArray(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

NDArray::NDArray(std::vector<std::int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_))
        throw EvalError("data size does not match shape");
}

NDArray NDArray::zeros(std::vector<std::int64_t> shape) { return NDArray(std::move(shape)); }

NDArray NDArray::full(std::vector<std::int64_t> shape, double v) {
    NDArray a(std::move(shape));
    std::fill(a.data_.begin(), a.data_.end(), v);
    return a;
}

NDArray NDArray::random_normal(std::vector<std::int64_t> shape, std::mt19937_64& rng) {
    NDArray a(std::move(shape));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : a.data_) v = dist(rng);
    return a;
}

NDArray NDArray::random_ints(std::vector<std::int64_t> shape, std::int64_t lo, std::int64_t hi,
                             std::mt19937_64& rng) {
    NDArray a(std::move(shape));
    std::uniform_int_distribution<std::int64_t> dist(lo, hi - 1);
    for (auto& v : a.data_) v = static_cast<double>(dist(rng));
    return a;
}

std::vector<std::int64_t> NDArray::strides() const {
    std::vector<std::int64_t> st(shape_.size(), 1);
    for (std::int64_t i = rank() - 2; i >= 0; i--) st[i] = st[i + 1] * shape_[i + 1];
    return st;
}

std::int64_t NDArray::offset_of(const std::vector<std::int64_t>& idx) const {
    auto st = strides();
    std::int64_t off = 0;
    for (size_t i = 0; i < idx.size(); i++) off += idx[i] * st[i];
    return off;
}

double& NDArray::at(const std::vector<std::int64_t>& idx) { return data_[offset_of(idx)]; }
double NDArray::at(const std::vector<std::int64_t>& idx) const { return data_[offset_of(idx)]; }

NDArray NDArray::map(const std::function<double(double)>& f) const {
    NDArray out(shape_);
    for (std::int64_t i = 0; i < size(); i++) out.data_[i] = f(data_[i]);
    return out;
}

NDArray NDArray::zip(const NDArray& o, const std::function<double(double, double)>& f) const {
    if (shape_ != o.shape_) throw EvalError("elementwise op on mismatched shapes");
    NDArray out(shape_);
    for (std::int64_t i = 0; i < size(); i++) out.data_[i] = f(data_[i], o.data_[i]);
    return out;
}

NDArray NDArray::matmul(const NDArray& o) const {
    if (rank() != 2 || o.rank() != 2) throw EvalError("matmul expects rank-2 operands");
    if (shape_[1] != o.shape_[0]) throw EvalError("matmul inner dimension mismatch");
    std::int64_t m = shape_[0], k = shape_[1], n = o.shape_[1];
    NDArray out({m, n});
    for (std::int64_t i = 0; i < m; i++)
        for (std::int64_t p = 0; p < k; p++) {
            double a = data_[i * k + p];
            if (a == 0.0) continue;
            for (std::int64_t j = 0; j < n; j++) out.data_[i * n + j] += a * o.data_[p * n + j];
        }
    return out;
}

NDArray NDArray::transpose(std::int64_t d0, std::int64_t d1) const {
    if (d0 < 0 || d1 < 0 || d0 >= rank() || d1 >= rank())
        throw EvalError("transpose dims out of range");
    std::vector<std::int64_t> nshape = shape_;
    std::swap(nshape[d0], nshape[d1]);
    NDArray out(nshape);
    std::vector<std::int64_t> idx(shape_.size(), 0);
    for (std::int64_t flat = 0; flat < size(); flat++) {
        std::vector<std::int64_t> nidx = idx;
        std::swap(nidx[d0], nidx[d1]);
        out.at(nidx) = data_[flat];
        for (std::int64_t i = rank() - 1; i >= 0; i--) {
            if (++idx[i] < shape_[i]) break;
            idx[i] = 0;
        }
    }
    return out;
}

NDArray NDArray::reshape(std::vector<std::int64_t> shape) const {
    if (shape_size(shape) != size()) throw EvalError("reshape changes element count");
    return NDArray(std::move(shape), data_);
}

NDArray NDArray::slice(std::int64_t dim, std::int64_t start, std::int64_t end) const {
    if (dim < 0 || dim >= rank()) throw EvalError("slice dim out of range");
    if (start < 0 || end < start || end > shape_[dim]) throw EvalError("slice bounds out of range");
    std::vector<std::int64_t> nshape = shape_;
    nshape[dim] = end - start;
    NDArray out(nshape);
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t i = 0; i < dim; i++) outer *= shape_[i];
    for (std::int64_t i = dim + 1; i < rank(); i++) inner *= shape_[i];
    std::int64_t len = end - start;
    for (std::int64_t o = 0; o < outer; o++)
        for (std::int64_t j = 0; j < len; j++)
            std::copy_n(data_.begin() + (o * shape_[dim] + start + j) * inner, inner,
                        out.data_.begin() + (o * len + j) * inner);
    return out;
}

NDArray NDArray::pad(std::int64_t dim, std::int64_t before, std::int64_t after) const {
    if (dim < 0 || dim >= rank()) throw EvalError("pad dim out of range");
    if (before < 0 || after < 0) throw EvalError("negative padding");
    std::vector<std::int64_t> nshape = shape_;
    nshape[dim] += before + after;
    NDArray out(nshape);
    out.assign_slice(dim, before, *this);
    return out;
}

void NDArray::assign_slice(std::int64_t dim, std::int64_t start, const NDArray& part) {
    if (part.rank() != rank()) throw EvalError("assign_slice rank mismatch");
    for (std::int64_t i = 0; i < rank(); i++)
        if (i != dim && part.shape_[i] != shape_[i]) throw EvalError("assign_slice shape mismatch");
    if (start < 0 || start + part.shape_[dim] > shape_[dim])
        throw EvalError("assign_slice out of range");
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t i = 0; i < dim; i++) outer *= shape_[i];
    for (std::int64_t i = dim + 1; i < rank(); i++) inner *= shape_[i];
    std::int64_t len = part.shape_[dim];
    for (std::int64_t o = 0; o < outer; o++)
        for (std::int64_t j = 0; j < len; j++)
            std::copy_n(part.data_.begin() + (o * len + j) * inner, inner,
                        data_.begin() + (o * shape_[dim] + start + j) * inner);
}

NDArray NDArray::reduce_sum(std::int64_t dim) const {
    if (dim < 0 || dim >= rank()) throw EvalError("reduce_sum dim out of range");
    std::vector<std::int64_t> nshape;
    for (std::int64_t i = 0; i < rank(); i++)
        if (i != dim) nshape.push_back(shape_[i]);
    NDArray out(nshape);
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t i = 0; i < dim; i++) outer *= shape_[i];
    for (std::int64_t i = dim + 1; i < rank(); i++) inner *= shape_[i];
    for (std::int64_t o = 0; o < outer; o++)
        for (std::int64_t d = 0; d < shape_[dim]; d++)
            for (std::int64_t j = 0; j < inner; j++)
                out.data_[o * inner + j] += data_[(o * shape_[dim] + d) * inner + j];
    return out;
}

NDArray NDArray::softmax(std::int64_t dim) const {
    if (dim < 0 || dim >= rank()) throw EvalError("softmax dim out of range");
    NDArray out(shape_);
    std::int64_t outer = 1, inner = 1;
    for (std::int64_t i = 0; i < dim; i++) outer *= shape_[i];
    for (std::int64_t i = dim + 1; i < rank(); i++) inner *= shape_[i];
    for (std::int64_t o = 0; o < outer; o++)
        for (std::int64_t j = 0; j < inner; j++) {
            double mx = -1e300;
            for (std::int64_t d = 0; d < shape_[dim]; d++)
                mx = std::max(mx, data_[(o * shape_[dim] + d) * inner + j]);
            double z = 0;
            for (std::int64_t d = 0; d < shape_[dim]; d++)
                z += std::exp(data_[(o * shape_[dim] + d) * inner + j] - mx);
            for (std::int64_t d = 0; d < shape_[dim]; d++) {
                auto idx = (o * shape_[dim] + d) * inner + j;
                out.data_[idx] = std::exp(data_[idx] - mx) / z;
            }
        }
    return out;
}

NDArray NDArray::concat(const std::vector<NDArray>& parts, std::int64_t dim) {
    if (parts.empty()) throw EvalError("concat of zero tensors");
    std::vector<std::int64_t> nshape = parts[0].shape_;
    if (dim < 0 || dim >= parts[0].rank()) throw EvalError("concat dim out of range");
    std::int64_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != parts[0].rank()) throw EvalError("concat rank mismatch");
        for (std::int64_t i = 0; i < p.rank(); i++)
            if (i != dim && p.shape_[i] != nshape[i]) throw EvalError("concat shape mismatch");
        total += p.shape_[dim];
    }
    nshape[dim] = total;
    NDArray out(nshape);
    std::int64_t off = 0;
    for (const auto& p : parts) {
        out.assign_slice(dim, off, p);
        off += p.shape_[dim];
    }
    return out;
}

double NDArray::max_abs() const {
    double m = 0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool allclose(const NDArray& a, const NDArray& b, double rtol, double atol, double* max_dev) {
    if (a.shape() != b.shape()) {
        if (max_dev) *max_dev = 1e308;
        return false;
    }
    bool ok = true;
    double worst = 0;
    for (std::int64_t i = 0; i < a.size(); i++) {
        double x = a.data()[i], y = b.data()[i];
        double tol = atol + rtol * std::abs(y);
        double dev = std::abs(x - y);
        if (tol > 0) worst = std::max(worst, dev / tol);
        if (dev > tol) ok = false;
    }
    if (max_dev) *max_dev = worst;
    return ok;
}

} // namespace refinery
