#include "tgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tgnn/error.hpp"

namespace tgnn::ad {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
        throw ShapeError("matrix: " + std::to_string(data.size()) + " values for shape " +
                         std::to_string(r) + "x" + std::to_string(c));
    }
}

Matrix Matrix::row(std::vector<double> values) {
    const std::size_t n = values.size();
    return Matrix(1, n, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::string Matrix::shape_string() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

void Parameter::zero_grad() {
    grad = Matrix(value.rows, value.cols);
}

const Matrix& Var::value() const { return tape_->value(id_); }

Matrix Var::grad() const {
    if (const Matrix* g = tape_->grad_if_any(id_)) return *g;
    const Matrix& v = value();
    return Matrix(v.rows, v.cols);
}

double Var::scalar() const {
    const Matrix& v = value();
    if (v.size() != 1) throw ShapeError("scalar: tensor has shape " + v.shape_string());
    return v.data[0];
}

// ---- tape -----------------------------------------------------------------

Var Tape::constant(Matrix value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
    Node n;
    n.op = "variable";
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
    if (auto it = param_leaf_.find(&p); it != param_leaf_.end()) return Var(this, it->second);
    Node n;
    n.op = "param";
    n.value = p.value;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    param_leaf_.emplace(&p, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::push(const char* op, Matrix value, std::vector<std::size_t> parents, BackwardFn backward) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                  [this](std::size_t p) { return nodes_[p].requires_grad; });
    n.parents = std::move(parents);
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
        n.grad = Matrix(n.value.rows, n.value.cols);
    return n.grad;
}

const Matrix* Tape::grad_if_any(std::size_t id) const {
    const Node& n = nodes_[id];
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols) return nullptr;
    return &n.grad;
}

void Tape::backward(Var loss) {
    if (loss.value().size() != 1)
        throw ContractError("backward: loss must be scalar, got " + loss.value().shape_string());
    for (Node& n : nodes_) n.grad = Matrix();
    grad_buffer(loss.id()).data[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.backward) n.backward(*this, i);
    }
    for (Node& n : nodes_) {
        if (n.param == nullptr) continue;
        Parameter& p = *n.param;
        if (p.grad.rows != p.value.rows || p.grad.cols != p.value.cols) p.zero_grad();
        if (n.grad.empty()) continue;
        for (std::size_t k = 0; k < n.grad.size(); ++k) p.grad.data[k] += n.grad.data[k];
    }
}

// ---- primitives -----------------------------------------------------------

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) shape_mismatch(op, a, b);
}

void require_same_tape(const char* op, Var a, Var b) {
    if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

// C += A B
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c.data.data() + i * m;
        const double* ai = a.data.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b.data.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
    }
}

// C += A Bᵀ
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    const std::size_t n = a.rows, k = a.cols, m = b.rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.data.data() + i * k;
        double* ci = c.data.data() + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b.data.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] += s;
        }
    }
}

// C += Aᵀ B
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.data.data() + i * k;
        const double* bi = b.data.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            double* cp = c.data.data() + p * m;
            for (std::size_t j = 0; j < m; ++j) cp[j] += aip * bi[j];
        }
    }
}

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Elementwise unary op whose derivative is expressed through input x and
// output y.
template <class Fwd, class Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
    const Matrix& x = a.value();
    Matrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = fwd(x.data[i]);
    const std::size_t pa = a.id();
    return a.tape().push(op, std::move(y), {pa}, [pa, deriv](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        const Matrix& xv = t.value(pa);
        const Matrix& yv = t.value(self);
        Matrix& ga = t.grad_buffer(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * deriv(xv.data[i], yv.data[i]);
    });
}

} // namespace

Var matmul(Var a, Var b) {
    require_same_tape("matmul", a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols != bv.rows) shape_mismatch("matmul", av, bv);
    Matrix c(av.rows, bv.cols);
    gemm_nn(av, bv, c);
    const std::size_t pa = a.id(), pb = b.id();
    return a.tape().push("matmul", std::move(c), {pa, pb}, [pa, pb](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        if (t.requires_grad(pa)) {
            // dA = G Bᵀ
            gemm_nt(g, t.value(pb), t.grad_buffer(pa));
        }
        if (t.requires_grad(pb)) {
            // dB = Aᵀ G
            gemm_tn(t.value(pa), g, t.grad_buffer(pb));
        }
    });
}

Var linear(Var x, Var w) {
    require_same_tape("linear", x, w);
    const Matrix& xv = x.value();
    const Matrix& wv = w.value();
    if (xv.cols != wv.cols) shape_mismatch("linear", xv, wv);
    Matrix c(xv.rows, wv.rows);
    gemm_nt(xv, wv, c);
    const std::size_t px = x.id(), pw = w.id();
    return x.tape().push("linear", std::move(c), {px, pw}, [px, pw](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        if (t.requires_grad(px)) gemm_nn(g, t.value(pw), t.grad_buffer(px));  // dX = G W
        if (t.requires_grad(pw)) gemm_tn(g, t.value(px), t.grad_buffer(pw));  // dW = Gᵀ X
    });
}

Var add(Var a, Var b) {
    require_same_tape("add", a, b);
    require_same_shape("add", a.value(), b.value());
    Matrix c = a.value();
    const Matrix& bv = b.value();
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += bv.data[i];
    const std::size_t pa = a.id(), pb = b.id();
    return a.tape().push("add", std::move(c), {pa, pb}, [pa, pb](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        for (std::size_t p : {pa, pb}) {
            if (!t.requires_grad(p)) continue;
            Matrix& gp = t.grad_buffer(p);
            for (std::size_t i = 0; i < g.size(); ++i) gp.data[i] += g.data[i];
        }
    });
}

Var sub(Var a, Var b) {
    require_same_tape("sub", a, b);
    require_same_shape("sub", a.value(), b.value());
    Matrix c = a.value();
    const Matrix& bv = b.value();
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= bv.data[i];
    const std::size_t pa = a.id(), pb = b.id();
    return a.tape().push("sub", std::move(c), {pa, pb}, [pa, pb](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        if (t.requires_grad(pa)) {
            Matrix& ga = t.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        }
        if (t.requires_grad(pb)) {
            Matrix& gb = t.grad_buffer(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
        }
    });
}

Var mul(Var a, Var b) {
    require_same_tape("mul", a, b);
    require_same_shape("mul", a.value(), b.value());
    Matrix c = a.value();
    const Matrix& bv = b.value();
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] *= bv.data[i];
    const std::size_t pa = a.id(), pb = b.id();
    return a.tape().push("mul", std::move(c), {pa, pb}, [pa, pb](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        if (t.requires_grad(pa)) {
            const Matrix& bv2 = t.value(pb);
            Matrix& ga = t.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
        }
        if (t.requires_grad(pb)) {
            const Matrix& av2 = t.value(pa);
            Matrix& gb = t.grad_buffer(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av2.data[i];
        }
    });
}

Var scale(Var a, double factor) {
    return unary("scale", a, [factor](double x) { return factor * x; },
                 [factor](double, double) { return factor; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var sigmoid(Var a) {
    return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
    return unary("leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
                 [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var exp(Var a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var log_sigmoid(Var a) {
    // log σ(x) = −softplus(−x); derivative σ(−x).
    return unary("log_sigmoid", a,
                 [](double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
                 [](double x, double) { return stable_sigmoid(-x); });
}

Var sum(Var a) {
    const Matrix& av = a.value();
    double s = 0.0;
    for (double v : av.data) s += v;
    const std::size_t pa = a.id();
    return a.tape().push("sum", Matrix(1, 1, s), {pa}, [pa](Tape& t, std::size_t self) {
        const double g = t.grad_if_any(self)->data[0];
        Matrix& ga = t.grad_buffer(pa);
        for (double& v : ga.data) v += g;
    });
}

Var mean_rows(Var a) {
    const Matrix& av = a.value();
    if (av.rows == 0) throw ShapeError("mean_rows: empty input " + av.shape_string());
    Matrix c(1, av.cols);
    for (std::size_t r = 0; r < av.rows; ++r)
        for (std::size_t j = 0; j < av.cols; ++j) c.data[j] += av(r, j);
    const double inv = 1.0 / static_cast<double>(av.rows);
    for (double& v : c.data) v *= inv;
    const std::size_t pa = a.id();
    return a.tape().push("mean_rows", std::move(c), {pa}, [pa, inv](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        Matrix& ga = t.grad_buffer(pa);
        for (std::size_t r = 0; r < ga.rows; ++r)
            for (std::size_t j = 0; j < ga.cols; ++j) ga(r, j) += g.data[j] * inv;
    });
}

Var segment_mean(Var a, std::vector<std::vector<std::size_t>> segments) {
    const Matrix& av = a.value();
    Matrix c(segments.size(), av.cols);
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto& seg = segments[s];
        if (seg.empty()) continue;
        double* cs = c.data.data() + s * av.cols;
        for (std::size_t r : seg) {
            if (r >= av.rows)
                throw ShapeError("segment_mean: row " + std::to_string(r) + " out of range for " +
                                 av.shape_string());
            const double* ar = av.data.data() + r * av.cols;
            for (std::size_t j = 0; j < av.cols; ++j) cs[j] += ar[j];
        }
        const double inv = 1.0 / static_cast<double>(seg.size());
        for (std::size_t j = 0; j < av.cols; ++j) cs[j] *= inv;
    }
    const std::size_t pa = a.id();
    return a.tape().push("segment_mean", std::move(c), {pa},
                         [pa, segments = std::move(segments)](Tape& t, std::size_t self) {
                             const Matrix& g = *t.grad_if_any(self);
                             Matrix& ga = t.grad_buffer(pa);
                             for (std::size_t s = 0; s < segments.size(); ++s) {
                                 const auto& seg = segments[s];
                                 if (seg.empty()) continue;
                                 const double inv = 1.0 / static_cast<double>(seg.size());
                                 const double* gs = g.data.data() + s * g.cols;
                                 for (std::size_t r : seg) {
                                     double* gr = ga.data.data() + r * ga.cols;
                                     for (std::size_t j = 0; j < ga.cols; ++j) gr[j] += gs[j] * inv;
                                 }
                             }
                         });
}

Var gather_rows(Var a, std::vector<std::size_t> index) {
    const Matrix& av = a.value();
    Matrix c(index.size(), av.cols);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= av.rows)
            throw ShapeError("gather_rows: row " + std::to_string(index[i]) + " out of range for " +
                             av.shape_string());
        std::copy_n(av.data.data() + index[i] * av.cols, av.cols, c.data.data() + i * av.cols);
    }
    const std::size_t pa = a.id();
    return a.tape().push("gather_rows", std::move(c), {pa},
                         [pa, index = std::move(index)](Tape& t, std::size_t self) {
                             const Matrix& g = *t.grad_if_any(self);
                             Matrix& ga = t.grad_buffer(pa);
                             for (std::size_t i = 0; i < index.size(); ++i) {
                                 const double* gi = g.data.data() + i * g.cols;
                                 double* gr = ga.data.data() + index[i] * ga.cols;
                                 for (std::size_t j = 0; j < ga.cols; ++j) gr[j] += gi[j];
                             }
                         });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        require_same_tape("concat_cols", parts[0], p);
        if (p.rows() != rows) shape_mismatch("concat_cols", parts[0].value(), p.value());
        cols += p.cols();
        ids.push_back(p.id());
    }
    Matrix c(rows, cols);
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Matrix& pv = p.value();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(pv.data.data() + r * pv.cols, pv.cols, c.data.data() + r * cols + off);
        off += pv.cols;
    }
    return parts[0].tape().push("concat_cols", std::move(c), ids, [ids](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        std::size_t off2 = 0;
        for (std::size_t p : ids) {
            const std::size_t pc = t.value(p).cols;
            if (t.requires_grad(p)) {
                Matrix& gp = t.grad_buffer(p);
                for (std::size_t r = 0; r < g.rows; ++r)
                    for (std::size_t j = 0; j < pc; ++j) gp(r, j) += g(r, off2 + j);
            }
            off2 += pc;
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        require_same_tape("concat_rows", parts[0], p);
        if (p.cols() != cols) shape_mismatch("concat_rows", parts[0].value(), p.value());
        rows += p.rows();
        ids.push_back(p.id());
    }
    Matrix c(rows, cols);
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Matrix& pv = p.value();
        std::copy(pv.data.begin(), pv.data.end(), c.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += pv.size();
    }
    return parts[0].tape().push("concat_rows", std::move(c), ids, [ids](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        std::size_t off2 = 0;
        for (std::size_t p : ids) {
            const std::size_t n = t.value(p).size();
            if (t.requires_grad(p)) {
                Matrix& gp = t.grad_buffer(p);
                for (std::size_t i = 0; i < n; ++i) gp.data[i] += g.data[off2 + i];
            }
            off2 += n;
        }
    });
}

Var softmax_rows(Var a) {
    const Matrix& av = a.value();
    Matrix y(av.rows, av.cols);
    for (std::size_t r = 0; r < av.rows; ++r) {
        auto in = av.row_span(r);
        auto out = y.row_span(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double z = 0.0;
        for (std::size_t j = 0; j < av.cols; ++j) z += (out[j] = std::exp(in[j] - mx));
        for (double& v : out) v /= z;
    }
    const std::size_t pa = a.id();
    return a.tape().push("softmax_rows", std::move(y), {pa}, [pa](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        const Matrix& yv = t.value(self);
        Matrix& ga = t.grad_buffer(pa);
        for (std::size_t r = 0; r < yv.rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < yv.cols; ++j) dot += g(r, j) * yv(r, j);
            for (std::size_t j = 0; j < yv.cols; ++j) ga(r, j) += yv(r, j) * (g(r, j) - dot);
        }
    });
}

Var slice_col(Var a, std::size_t col) {
    const Matrix& av = a.value();
    if (col >= av.cols)
        throw ShapeError("slice_col: column " + std::to_string(col) + " out of range for " + av.shape_string());
    Matrix c(av.rows, 1);
    for (std::size_t r = 0; r < av.rows; ++r) c.data[r] = av(r, col);
    const std::size_t pa = a.id();
    return a.tape().push("slice_col", std::move(c), {pa}, [pa, col](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        Matrix& ga = t.grad_buffer(pa);
        for (std::size_t r = 0; r < g.rows; ++r) ga(r, col) += g.data[r];
    });
}

Var mul_rowwise(Var a, Var col) {
    require_same_tape("mul_rowwise", a, col);
    const Matrix& av = a.value();
    const Matrix& cv = col.value();
    if (cv.cols != 1 || cv.rows != av.rows) shape_mismatch("mul_rowwise", av, cv);
    Matrix y = av;
    for (std::size_t r = 0; r < av.rows; ++r)
        for (std::size_t j = 0; j < av.cols; ++j) y(r, j) *= cv.data[r];
    const std::size_t pa = a.id(), pc = col.id();
    return a.tape().push("mul_rowwise", std::move(y), {pa, pc}, [pa, pc](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        const Matrix& av2 = t.value(pa);
        const Matrix& cv2 = t.value(pc);
        if (t.requires_grad(pa)) {
            Matrix& ga = t.grad_buffer(pa);
            for (std::size_t r = 0; r < g.rows; ++r)
                for (std::size_t j = 0; j < g.cols; ++j) ga(r, j) += g(r, j) * cv2.data[r];
        }
        if (t.requires_grad(pc)) {
            Matrix& gc = t.grad_buffer(pc);
            for (std::size_t r = 0; r < g.rows; ++r) {
                double s = 0.0;
                for (std::size_t j = 0; j < g.cols; ++j) s += g(r, j) * av2(r, j);
                gc.data[r] += s;
            }
        }
    });
}

Var rowdot(Var a, Var b) {
    require_same_tape("rowdot", a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    require_same_shape("rowdot", av, bv);
    Matrix y(av.rows, 1);
    for (std::size_t r = 0; r < av.rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < av.cols; ++j) s += av(r, j) * bv(r, j);
        y.data[r] = s;
    }
    const std::size_t pa = a.id(), pb = b.id();
    return a.tape().push("rowdot", std::move(y), {pa, pb}, [pa, pb](Tape& t, std::size_t self) {
        const Matrix& g = *t.grad_if_any(self);
        const Matrix& av2 = t.value(pa);
        const Matrix& bv2 = t.value(pb);
        if (t.requires_grad(pa)) {
            Matrix& ga = t.grad_buffer(pa);
            for (std::size_t r = 0; r < av2.rows; ++r)
                for (std::size_t j = 0; j < av2.cols; ++j) ga(r, j) += g.data[r] * bv2(r, j);
        }
        if (t.requires_grad(pb)) {
            Matrix& gb = t.grad_buffer(pb);
            for (std::size_t r = 0; r < av2.rows; ++r)
                for (std::size_t j = 0; j < av2.cols; ++j) gb(r, j) += g.data[r] * av2(r, j);
        }
    });
}

// ---- gradient check -------------------------------------------------------

double grad_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params, double eps) {
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Var l = loss(tape);
        if (!std::isfinite(l.scalar())) throw NumericError("grad_check: non-finite loss");
        tape.backward(l);
    }
    auto evaluate = [&loss]() {
        Tape tape;
        const double v = loss(tape).scalar();
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss under perturbation");
        return v;
    };
    double worst = 0.0;
    for (Parameter* p : params) {
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const double saved = p->value.data[k];
            p->value.data[k] = saved + eps;
            const double up = evaluate();
            p->value.data[k] = saved - eps;
            const double down = evaluate();
            p->value.data[k] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = p->grad.data[k];
            if (!std::isfinite(analytic)) throw NumericError("grad_check: non-finite gradient in " + p->name);
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

} // namespace tgnn::ad
