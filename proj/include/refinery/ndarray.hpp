// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace refinery {

/// Row-major dense f64 array. The oracle runs everything in f64 regardless of
/// declared dtype; dtype fidelity is not a goal.
class NDArray {
public:
    NDArray() = default;
    explicit NDArray(std::vector<std::int64_t> shape);
    NDArray(std::vector<std::int64_t> shape, std::vector<double> data);

    static NDArray zeros(std::vector<std::int64_t> shape);
    static NDArray full(std::vector<std::int64_t> shape, double v);
    static NDArray random_normal(std::vector<std::int64_t> shape, std::mt19937_64& rng);
    static NDArray random_ints(std::vector<std::int64_t> shape, std::int64_t lo, std::int64_t hi,
                               std::mt19937_64& rng);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    double& at(const std::vector<std::int64_t>& idx);
    double at(const std::vector<std::int64_t>& idx) const;

    NDArray map(const std::function<double(double)>& f) const;
    NDArray zip(const NDArray& o, const std::function<double(double, double)>& f) const;

    NDArray matmul(const NDArray& o) const;               // rank-2 only
    NDArray transpose(std::int64_t d0, std::int64_t d1) const;
    NDArray reshape(std::vector<std::int64_t> shape) const;
    NDArray slice(std::int64_t dim, std::int64_t start, std::int64_t end) const;
    NDArray pad(std::int64_t dim, std::int64_t before, std::int64_t after) const;
    NDArray reduce_sum(std::int64_t dim) const;
    NDArray softmax(std::int64_t dim) const;
    static NDArray concat(const std::vector<NDArray>& parts, std::int64_t dim);

    /// Writes `part` into the region [start, start+part.size(dim)) along dim.
    void assign_slice(std::int64_t dim, std::int64_t start, const NDArray& part);

    double max_abs() const;

private:
    std::vector<std::int64_t> shape_;
    std::vector<double> data_;
    std::vector<std::int64_t> strides() const;
    std::int64_t offset_of(const std::vector<std::int64_t>& idx) const;
};

/// max(|a-b| / (atol + rtol*|b|)) style check; true when every element agrees.
bool allclose(const NDArray& a, const NDArray& b, double rtol, double atol,
              double* max_dev = nullptr);

} // namespace refinery
