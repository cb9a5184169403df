#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gst/error.hpp"

namespace gst {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw Error("tensor: negative extent in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

// Shaped n-dimensional array, flat row-major storage. float is the training
// precision; double instantiations back the finite-difference checks.
template <typename S>
struct TensorT {
    Shape shape;
    std::vector<S> data;

    TensorT() = default;
    explicit TensorT(Shape s)
        : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), S(0)) {}
    TensorT(Shape s, std::vector<S> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel(shape) != static_cast<std::int64_t>(data.size()))
            throw Error("tensor: shape " + shape_str(shape) + " does not hold " +
                        std::to_string(data.size()) + " values");
    }

    static TensorT full(Shape s, S v) {
        TensorT t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static TensorT scalar(S v) { return TensorT({1}, {v}); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(std::size_t i) const {
        if (i >= shape.size()) throw Error("tensor: dim index out of range");
        return shape[i];
    }
    bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename S>
bool all_finite(const TensorT<S>& t) {
    for (S v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
    TensorT<To> out(t.shape);
    for (std::size_t i = 0; i < t.data.size(); ++i)
        out.data[i] = static_cast<To>(t.data[i]);
    return out;
}

}  // namespace gst
