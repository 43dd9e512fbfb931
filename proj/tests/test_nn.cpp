#include "saifdl/nn.hpp"

#include "saifdl/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

using namespace saifdl;
using namespace saifdl::nn;

namespace {

const std::vector<LayerSpec> kTwoTenTwo = {
    {2, 10, Activation::ReLU}, {10, 2, Activation::Identity}};

// Flattens every parameter so finite differences can walk them uniformly.
std::vector<double*> parameter_pointers(Network& net) {
    std::vector<double*> ptrs;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (Index i = 0; i < net.weights[l].size(); ++i)
            ptrs.push_back(net.weights[l].data() + i);
        for (Index i = 0; i < net.biases[l].size(); ++i)
            ptrs.push_back(net.biases[l].data() + i);
    }
    return ptrs;
}

std::vector<double> flatten_grads(const ParamGrads& grads) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        for (Index i = 0; i < grads.weights[l].size(); ++i)
            flat.push_back(*(grads.weights[l].data() + i));
        for (Index i = 0; i < grads.biases[l].size(); ++i)
            flat.push_back(grads.biases[l][i]);
    }
    return flat;
}

double min_abs_preactivation(const Network& net, const Matrix& X) {
    auto [pred, cache] = forward(net, X);
    double min_abs = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (net.layers[l].activation != Activation::ReLU) continue;
        min_abs = std::min(min_abs,
                           cache.preactivations[l].cwiseAbs().minCoeff());
    }
    return min_abs;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("init: parameter count of the 2-10-2 network") {
    Network net = init_network(kTwoTenTwo, Task::Classification, 1);
    CHECK(net.parameter_count() == 52);
    CHECK(net.weights[0].rows() == 2);
    CHECK(net.weights[0].cols() == 10);
    CHECK(net.biases[0].isZero(0.0));
    CHECK(net.biases[1].isZero(0.0));
    const double bound0 = std::sqrt(6.0 / 12.0);
    CHECK(net.weights[0].cwiseAbs().maxCoeff() <= bound0);
}

TEST_CASE("init: identical seeds give bit-identical parameters") {
    Network a = init_network(kTwoTenTwo, Task::Classification, 42);
    Network b = init_network(kTwoTenTwo, Task::Classification, 42);
    Network c = init_network(kTwoTenTwo, Task::Classification, 43);
    CHECK(a.weights[0] == b.weights[0]);
    CHECK(a.weights[1] == b.weights[1]);
    CHECK(a.weights[0] != c.weights[0]);
}

TEST_CASE("init: dimension chain violations") {
    CHECK_THROWS_AS(init_network({{2, 10, Activation::ReLU},
                                  {5, 2, Activation::Identity}},
                                 Task::Classification, 1),
                    ShapeError);
    CHECK_THROWS_AS(init_network({}, Task::Classification, 1), ShapeError);
    CHECK_THROWS_AS(init_network({{0, 3, Activation::ReLU}},
                                 Task::Classification, 1),
                    ShapeError);
}

TEST_CASE("forward: softmax of zero logits is uniform") {
    Network net = init_network(kTwoTenTwo, Task::Classification, 1);
    for (auto& w : net.weights) w.setZero();
    Matrix X = Matrix::Random(5, 2);
    auto [pred, cache] = forward(net, X);
    for (Index r = 0; r < pred.rows(); ++r) {
        CHECK(pred(r, 0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(pred(r, 1) == doctest::Approx(0.5).epsilon(1e-15));
    }
}

TEST_CASE("forward: identity regression layer is the identity map") {
    Network net = init_network({{3, 3, Activation::Identity}}, Task::Regression,
                               1);
    net.weights[0] = Matrix::Identity(3, 3);
    net.biases[0].setZero();
    Matrix X = Matrix::Random(4, 3);
    auto [pred, cache] = forward(net, X);
    CHECK((pred - X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: softmax rows sum to one, even for huge logits") {
    Network net = init_network({{2, 2, Activation::Identity}},
                               Task::Classification, 3);
    net.weights[0].setZero();
    net.biases[0] << 1000.0, -1000.0;
    Matrix X = Matrix::Random(6, 2);
    auto [pred, cache] = forward(net, X);
    for (Index r = 0; r < pred.rows(); ++r) {
        CHECK(std::abs(pred.row(r).sum() - 1.0) <= 1e-12);
        CHECK(std::isfinite(pred(r, 0)));
    }
    CHECK_THROWS_AS(forward(net, Matrix::Zero(2, 5)), ShapeError);
}

TEST_CASE("cross-entropy of the uniform prediction is ln 2") {
    Matrix pred(1, 2);
    pred << 0.5, 0.5;
    Vector y(1);
    y << 0.0;
    auto [value, grad] = base_loss(LossKind::CrossEntropy, y, pred);
    CHECK(value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    // Fused logit-space gradient (p - onehot)/B.
    CHECK(grad(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(grad(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("cross-entropy clamps vanishing probabilities") {
    Matrix pred(1, 2);
    pred << 1.0, 0.0;
    Vector y(1);
    y << 1.0;
    auto [value, grad] = base_loss(LossKind::CrossEntropy, y, pred);
    CHECK(value == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
    CHECK(std::isfinite(value));
}

TEST_CASE("cross-entropy rejects out-of-range labels") {
    Matrix pred(1, 2);
    pred << 0.5, 0.5;
    Vector y(1);
    y << 2.0;
    CHECK_THROWS_AS(base_loss(LossKind::CrossEntropy, y, pred), DomainError);
    y << 0.5;
    CHECK_THROWS_AS(base_loss(LossKind::CrossEntropy, y, pred), DomainError);
}

TEST_CASE("fused softmax cross-entropy gradient matches finite differences") {
    Rng rng(11);
    const double step = 1e-6;
    Matrix logits(4, 3);
    for (Index r = 0; r < 4; ++r)
        for (Index c = 0; c < 3; ++c) logits(r, c) = rng.uniform(-2, 2);
    Vector y(4);
    for (Index r = 0; r < 4; ++r)
        y[r] = static_cast<double>(rng.next_below(3));

    auto ce_of_logits = [&](const Matrix& z) {
        Matrix p(z.rows(), z.cols());
        for (Index r = 0; r < z.rows(); ++r) {
            Eigen::RowVectorXd e =
                (z.row(r).array() - z.row(r).maxCoeff()).exp();
            p.row(r) = e / e.sum();
        }
        return base_loss(LossKind::CrossEntropy, y, p).first;
    };

    Matrix probs(4, 3);
    for (Index r = 0; r < 4; ++r) {
        Eigen::RowVectorXd e =
            (logits.row(r).array() - logits.row(r).maxCoeff()).exp();
        probs.row(r) = e / e.sum();
    }
    auto [value, grad] = base_loss(LossKind::CrossEntropy, y, probs);
    for (Index r = 0; r < 4; ++r) {
        for (Index c = 0; c < 3; ++c) {
            Matrix plus = logits, minus = logits;
            plus(r, c) += step;
            minus(r, c) -= step;
            const double fd = (ce_of_logits(plus) - ce_of_logits(minus)) /
                              (2.0 * step);
            CHECK(std::abs(grad(r, c) - fd) <=
                  1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("mse value and gradient") {
    Matrix pred(1, 1);
    pred << 3.0;
    Vector y(1);
    y << 1.0;
    auto [value, grad] = base_loss(LossKind::MSE, y, pred);
    CHECK(value == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(grad(0, 0) == doctest::Approx(4.0).epsilon(1e-15));

    auto [zero, zgrad] = base_loss(LossKind::MSE, pred.col(0), pred);
    CHECK(zero == 0.0);
    CHECK(zgrad.isZero(0.0));
}

TEST_CASE("mae value and subgradient convention") {
    Matrix pred(2, 1);
    pred << 3.0, -1.0;
    Vector y(2);
    y << 1.0, -1.0;
    auto [value, grad] = base_loss(LossKind::MAE, y, pred);
    CHECK(value == doctest::Approx(1.0).epsilon(1e-15));  // (2 + 0)/2
    CHECK(grad(0, 0) == 0.5);
    CHECK(grad(1, 0) == 0.0);  // residual exactly zero
}

TEST_CASE("backward: zero output gradient gives zero parameter gradients") {
    Network net = init_network(kTwoTenTwo, Task::Classification, 5);
    Matrix X = Matrix::Random(4, 2);
    auto [pred, cache] = forward(net, X);
    ParamGrads grads = backward(net, cache, Matrix::Zero(4, 2));
    for (const auto& g : grads.weights) CHECK(g.isZero(0.0));
    for (const auto& g : grads.biases) CHECK(g.isZero(0.0));
}

TEST_CASE("backward: single linear layer weight gradient is the outer product") {
    Network net = init_network({{3, 2, Activation::Identity}}, Task::Regression,
                               7);
    Matrix X(1, 3);
    X << 0.5, -1.0, 2.0;
    auto [pred, cache] = forward(net, X);
    Matrix G(1, 2);
    G << 0.25, -0.75;
    ParamGrads grads = backward(net, cache, G);
    CHECK((grads.weights[0] - X.transpose() * G).cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.biases[0][0] == 0.25);
    CHECK(grads.biases[0][1] == -0.75);
}

TEST_CASE("backward matches finite differences over all 52 parameters") {
    // Oracle: central differences of a fixed linear functional of the
    // regression output.
    Rng rng(123);
    Network net;
    Matrix X(4, 2);
    do {
        net = init_network(kTwoTenTwo, Task::Regression, rng.next_u64());
        for (Index r = 0; r < 4; ++r)
            for (Index c = 0; c < 2; ++c) X(r, c) = rng.uniform(-1, 1);
    } while (min_abs_preactivation(net, X) < 1e-4);

    Matrix C(4, 2);
    for (Index r = 0; r < 4; ++r)
        for (Index c = 0; c < 2; ++c) C(r, c) = rng.uniform(-1, 1);
    auto loss_of = [&](Network& n) {
        auto [pred, cache] = forward(n, X);
        return (pred.cwiseProduct(C)).sum();
    };

    auto [pred, cache] = forward(net, X);
    ParamGrads grads = backward(net, cache, C);
    std::vector<double> flat = flatten_grads(grads);
    std::vector<double*> ptrs = parameter_pointers(net);
    REQUIRE(ptrs.size() == 52);
    const double step = 1e-6;
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
        const double saved = *ptrs[i];
        *ptrs[i] = saved + step;
        const double up = loss_of(net);
        *ptrs[i] = saved - step;
        const double down = loss_of(net);
        *ptrs[i] = saved;
        const double fd = (up - down) / (2.0 * step);
        CHECK(std::abs(flat[i] - fd) <=
              1e-5 * std::max({1.0, std::abs(fd), std::abs(flat[i])}));
    }
}

TEST_CASE("backward rejects a cache from another network") {
    Network small = init_network({{2, 3, Activation::ReLU},
                                  {3, 2, Activation::Identity}},
                                 Task::Regression, 1);
    Network big = init_network(kTwoTenTwo, Task::Regression, 1);
    auto [pred, cache] = forward(small, Matrix::Random(2, 2));
    CHECK_THROWS_AS(backward(big, cache, Matrix::Zero(2, 2)), StateError);
}

TEST_CASE("softmax_vjp on a uniform row") {
    Matrix probs(1, 2);
    probs << 0.5, 0.5;
    Matrix grad(1, 2);
    grad << 1.0, 0.0;
    Matrix gz = softmax_vjp(probs, grad);
    CHECK(gz(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(gz(0, 1) == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("adam first step is approximately -eta") {
    Network net = init_network({{1, 1, Activation::Identity}}, Task::Regression,
                               9);
    const double theta0 = net.weights[0](0, 0);
    AdamState state = init_adam(net);
    ParamGrads grads;
    grads.weights = {Matrix::Ones(1, 1)};
    grads.biases = {Vector::Ones(1)};
    adam_step(state, net, grads);
    CHECK(state.step == 1);
    CHECK(std::abs((net.weights[0](0, 0) - theta0) + 0.01) < 1e-6);
}

TEST_CASE("adam with zero gradients never moves") {
    Network net = init_network(kTwoTenTwo, Task::Classification, 10);
    Network copy = net;
    AdamState state = init_adam(net);
    ParamGrads zeros;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        zeros.weights.push_back(Matrix::Zero(net.weights[l].rows(),
                                             net.weights[l].cols()));
        zeros.biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    for (int i = 0; i < 5; ++i) adam_step(state, net, zeros);
    CHECK(net.weights[0] == copy.weights[0]);
    CHECK(net.weights[1] == copy.weights[1]);
}

TEST_CASE("adam two-step recurrence matches the scalar oracle") {
    Network net = init_network({{1, 1, Activation::Identity}}, Task::Regression,
                               9);
    const double theta0 = net.weights[0](0, 0);
    AdamState state = init_adam(net);
    ParamGrads grads;
    grads.weights = {Matrix::Ones(1, 1)};
    grads.biases = {Vector::Ones(1)};
    adam_step(state, net, grads);
    adam_step(state, net, grads);

    // Hand-rolled recurrence with g = 1.
    double m = 0.0, v = 0.0, theta = theta0;
    for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        const double m_hat = m / (1.0 - std::pow(0.9, t));
        const double v_hat = v / (1.0 - std::pow(0.999, t));
        theta -= 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8);
    }
    CHECK(net.weights[0](0, 0) == doctest::Approx(theta).epsilon(1e-15));
    // Each step stays close to the raw learning rate.
    CHECK(std::abs(theta0 - net.weights[0](0, 0)) ==
          doctest::Approx(0.02).epsilon(1e-4));
}

TEST_CASE("adam shape mismatch") {
    Network net = init_network(kTwoTenTwo, Task::Classification, 10);
    AdamState state = init_adam(net);
    ParamGrads bad;
    bad.weights = {Matrix::Zero(2, 10)};
    bad.biases = {Vector::Zero(10)};
    CHECK_THROWS_AS(adam_step(state, net, bad), ShapeError);
}

TEST_CASE("checkpoint round-trip is bit exact") {
    namespace fs = std::filesystem;
    Network net = init_network(kTwoTenTwo, Task::Classification, 77);
    const fs::path path =
        fs::temp_directory_path() / "saifdl_test_checkpoint.json";
    save_checkpoint(net, path);
    Network loaded = load_checkpoint(path);
    CHECK(loaded.task == net.task);
    REQUIRE(loaded.layers.size() == net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(loaded.layers[l] == net.layers[l]);
        CHECK(loaded.weights[l] == net.weights[l]);
        CHECK(loaded.biases[l] == net.biases[l]);
    }
    fs::remove(path);
}

TEST_CASE("checkpoint loader rejects damaged files") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "saifdl_bad_ckpt.json";
    {
        FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("{\"format\": \"other\", \"version\": 9}", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    {
        FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("not json at all", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    fs::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);  // missing file
}

}  // TEST_SUITE
