#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "tgnn/autodiff.hpp"
#include "tgnn/error.hpp"
#include "tgnn/rng.hpp"

using namespace tgnn;
using namespace tgnn::ad;

namespace {

Parameter random_param(const std::string& name, std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Parameter p{name, Matrix(r, c), Matrix(r, c)};
    for (double& v : p.value.data) v = scale * (2 * uniform01(rng) - 1);
    return p;
}

} // namespace

TEST_SUITE("tensor-autodiff") {

TEST_CASE("sigmoid at zero") {
    Tape t;
    CHECK(sigmoid(t.constant(Matrix::row({0.0}))).scalar() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul shape contract") {
    Tape t;
    Var a = t.constant(Matrix(2, 3, 1.0));
    Var b = t.constant(Matrix(3, 1, 2.0));
    Var c = matmul(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 1);
    CHECK(c.value()(1, 0) == 6.0);
    try {
        matmul(a, a);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("2x3") != std::string::npos);
    }
}

TEST_CASE("tanh matches a series oracle") {
    Tape t;
    const double got = tanh(t.constant(Matrix::row({1.8808}))).scalar();
    CHECK(std::fabs(got - testing::series_tanh(1.8808)) < 1e-12);
    CHECK(got == doctest::Approx(0.95459).epsilon(1e-4));
}

TEST_CASE("gradient of sum of squares") {
    Tape t;
    Var x = t.variable(Matrix::row({1.0, -2.0}));
    Var loss = sum(mul(x, x));
    t.backward(loss);
    CHECK(x.grad() == Matrix::row({2.0, -4.0}));
}

TEST_CASE("sigmoid derivative at zero") {
    Parameter w{"w", Matrix::row({0.0}), Matrix(1, 1)};
    Tape t;
    Var loss = sum(sigmoid(mul(t.param(w), t.constant(Matrix::row({1.0})))));
    t.backward(loss);
    CHECK(w.grad(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("backward needs a scalar") {
    Tape t;
    Var x = t.variable(Matrix::row({1.0, 2.0}));
    CHECK_THROWS_AS(t.backward(scale(x, 2.0)), ContractError);
}

TEST_CASE("gradient check on a composite of every primitive") {
    Rng rng(derive_seed(11, "composite"));
    Parameter X = random_param("X", 3, 4, rng);
    Parameter W = random_param("W", 5, 4, rng);
    Parameter U = random_param("U", 5, 5, rng);
    Parameter c = random_param("c", 3, 1, rng);
    Parameter a = random_param("a", 1, 10, rng);
    std::vector<Parameter*> params{&X, &W, &U, &c, &a};

    auto loss = [&](Tape& t) {
        Var x = t.param(X), w = t.param(W), u = t.param(U), col = t.param(c), att = t.param(a);
        Var h = tanh(linear(x, w));                                   // 3×5
        Var g = sigmoid(matmul(h, u));                                // 3×5
        Var k = leaky_relu(sub(add(h, g), scale(g, 0.3)));            // 3×5
        Var r = relu(add(k, t.constant(Matrix(3, 5, 0.05))));
        Var e = log(add(exp(scale(g, 0.5)), t.constant(Matrix(3, 5, 1.0))));
        Var m = mul(neg(r), e);                                       // 3×5
        Var seg = segment_mean(m, {{0, 2}, {}, {1}, {0, 1, 2}});      // 4×5
        Var gat = gather_rows(h, {2, 0, 1, 1});                       // 4×5
        std::vector<Var> cols{seg, gat};
        Var cc = concat_cols(cols);                                   // 4×10
        Var sm = softmax_rows(mul(cc, concat_rows(std::vector<Var>{att, att, att, att})));
        Var s = slice_col(sm, 3);                                     // 4×1
        std::vector<Var> rows{col, gather_rows(col, {0})};
        Var scaled = mul_rowwise(gat, concat_rows(rows));             // 4×5
        Var d = rowdot(scaled, seg);                                  // 4×1
        Var ls = log_sigmoid(add(d, s));
        return add(sum(ls), sum(mean_rows(scaled)));
    };
    CHECK(grad_check(loss, params) < 1e-4);
}

TEST_CASE("gradient check is exact on quadratics") {
    Rng rng(5);
    Parameter p = random_param("p", 2, 3, rng);
    std::vector<Parameter*> params{&p};
    auto loss = [&](Tape& t) {
        Var x = t.param(p);
        return add(sum(mul(x, x)), sum(scale(x, 3.0)));
    };
    CHECK(grad_check(loss, params) < 1e-9);
}

TEST_CASE("a corrupted backward rule is caught") {
    Rng rng(6);
    Parameter p = random_param("p", 1, 4, rng);
    std::vector<Parameter*> params{&p};
    auto loss = [&](Tape& t) {
        Var x = t.param(p);
        Matrix v = x.value();
        for (double& e : v.data) e = std::sin(e);
        const std::size_t parent = x.id();
        // Wrong derivative: sin instead of cos.
        Var y = t.push("bad_sin", v, {parent}, [parent](Tape& tape, std::size_t self) {
            const Matrix& g = tape.grad_buffer(self);
            Matrix& out = tape.grad_buffer(parent);
            for (std::size_t i = 0; i < g.size(); ++i) out.data[i] += g.data[i] * std::sin(tape.value(parent).data[i]);
        });
        return sum(y);
    };
    CHECK(grad_check(loss, params) > 1e-2);
}

TEST_CASE("non-finite values are numeric errors") {
    Parameter p{"p", Matrix::row({-1.0}), Matrix(1, 1)};
    std::vector<Parameter*> params{&p};
    CHECK_THROWS_AS(grad_check([&](Tape& t) { return sum(log(t.param(p))); }, params), NumericError);
}

}
