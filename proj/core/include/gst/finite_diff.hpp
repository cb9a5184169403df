#pragma once

#include <functional>

#include "gst/tensor.hpp"

namespace gst {

// Central-difference gradient (f(x+h*e_i) - f(x-h*e_i)) / 2h per element.
// Test oracle for the analytic backward pass; deliberately knows nothing
// about the graph. Meant to be used with S = double.
template <typename S>
TensorT<S> finite_diff_grad(const std::function<S(const TensorT<S>&)>& f,
                            const TensorT<S>& x, S step) {
    if (!(step > S(0))) throw Error("finite_diff_grad: step must be positive");
    TensorT<S> g(x.shape);
    TensorT<S> probe = x;
    for (std::size_t i = 0; i < probe.data.size(); ++i) {
        const S orig = probe.data[i];
        probe.data[i] = orig + step;
        const S fp = f(probe);
        probe.data[i] = orig - step;
        const S fm = f(probe);
        probe.data[i] = orig;
        g.data[i] = (fp - fm) / (S(2) * step);
    }
    return g;
}

}  // namespace gst
