// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdiqa/rng.hpp"

namespace mdiqa::ad {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

// Dense tensor with a value buffer and a same-sized gradient buffer.
// `req` marks tensors that participate in backward accumulation; outputs of
// an op require grad iff any input does.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> v;
    std::vector<T> g;
    bool req = false;

    Tensor() = default;
    Tensor(Shape s, bool requires_grad)
        : shape(std::move(s)),
          v(static_cast<std::size_t>(shape_numel(shape)), T(0)),
          g(static_cast<std::size_t>(shape_numel(shape)), T(0)),
          req(requires_grad) {}

    std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
    void fill(T x) { std::fill(v.begin(), v.end(), x); }
};

template <typename T>
using TP = std::shared_ptr<Tensor<T>>;

template <typename T>
TP<T> make_tensor(Shape s, bool req = false) {
    return std::make_shared<Tensor<T>>(std::move(s), req);
}

template <typename T>
TP<T> constant(Shape s, const std::vector<T>& vals) {
    auto t = make_tensor<T>(std::move(s), false);
    if (static_cast<std::int64_t>(vals.size()) != t->numel())
        throw std::invalid_argument("constant: value count does not match shape");
    t->v = vals;
    return t;
}

template <typename T>
TP<T> scalar_tensor(T x, bool req = false) {
    auto t = make_tensor<T>(Shape{1}, req);
    t->v[0] = x;
    return t;
}

// Records backward closures during a forward pass; backward() replays them in
// reverse. Tensors are free objects, the tape only owns the closure list.
template <typename T>
class Tape {
public:
    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

    void backward(const TP<T>& root) {
        if (root->numel() != 1)
            throw std::invalid_argument("backward: root must be a scalar, got shape " +
                                        shape_str(root->shape));
        root->g[0] = T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    void clear() { ops_.clear(); }
    std::size_t size() const { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

}  // namespace mdiqa::ad
