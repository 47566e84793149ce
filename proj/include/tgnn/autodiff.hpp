#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tgnn::ad {

// Dense row-major matrix of doubles. Vectors are 1×n or n×1 matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> values);

    static Matrix row(std::vector<double> values);
    static Matrix identity(std::size_t n);

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }
    std::span<const double> row_span(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::span<double> row_span(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::string shape_string() const;

    bool operator==(const Matrix&) const = default;
};

// A named trainable array. The tape accumulates into `grad`.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    void zero_grad();
};

class Tape;

// Handle to a node on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }
    const Matrix& value() const;
    // Zero matrix of the right shape when no gradient reached this node.
    Matrix grad() const;
    std::size_t rows() const { return value().rows; }
    std::size_t cols() const { return value().cols; }
    double scalar() const;

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Topologically ordered record of one forward pass. Nodes are appended in
// creation order, so every node follows its parents.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var variable(Matrix value);
    // Leaf bound to a parameter; one leaf per parameter per tape.
    Var param(Parameter& p);

    Var push(const char* op, Matrix value, std::vector<std::size_t> parents, BackwardFn backward);

    // Populates gradients of every node on a path to `loss` and adds leaf
    // gradients into the bound Parameter::grad arrays.
    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const char* op(std::size_t id) const { return nodes_[id].op; }
    // Gradient buffer for node `id`, allocated zero-filled on first access.
    Matrix& grad_buffer(std::size_t id);
    const Matrix* grad_if_any(std::size_t id) const;

private:
    struct Node {
        const char* op = "";
        Matrix value;
        Matrix grad;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
        Parameter* param = nullptr;
    };

    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, std::size_t> param_leaf_;
};

// ---- primitives -----------------------------------------------------------
// Shapes must match exactly; the only broadcast is a scalar constant factor.

Var matmul(Var a, Var b);               // (n×k)(k×m)
Var linear(Var x, Var w);               // x wᵀ : (n×k)(m×k)ᵀ → n×m
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                  // elementwise
Var scale(Var a, double factor);
Var neg(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var exp(Var a);
Var log(Var a);
Var log_sigmoid(Var a);                 // log σ(a), stable for large |a|
Var sum(Var a);                         // → 1×1
Var mean_rows(Var a);                   // n×c → 1×c
// Row i of the result is the mean of the rows of `a` listed in segments[i];
// an empty segment yields a zero row.
Var segment_mean(Var a, std::vector<std::vector<std::size_t>> segments);
Var gather_rows(Var a, std::vector<std::size_t> index);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var softmax_rows(Var a);
Var slice_col(Var a, std::size_t col);  // n×c → n×1
Var mul_rowwise(Var a, Var col);        // a (n×c) with row i scaled by col(i,0)
Var rowdot(Var a, Var b);               // n×c, n×c → n×1

// Worst coordinatewise relative error between the backward-pass gradient and
// central differences (f(p+ε) − f(p−ε)) / 2ε. `loss` must rebuild the same
// computation on the given tape each call.
double grad_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                  double eps = 1e-5);

} // namespace tgnn::ad
