#include "saifdl/trainer.hpp"

#include "saifdl/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace saifdl;
using namespace saifdl::trainer;
using data::Dataset;
using nn::Activation;
using nn::LayerSpec;
using nn::LossKind;
using nn::Network;

namespace {

const std::vector<LayerSpec> kTwoTenTwo = {
    {2, 10, Activation::ReLU}, {10, 2, Activation::Identity}};

rulelang::RuleSet hot_rule() {
    return rulelang::parse_rules("rule hot: if feature[0] > 0.8 then class 1");
}

// Penalty-free reference loop: same pinned shuffle stream and batch
// schedule, but wired straight through forward/base_loss/backward/adam with
// no penalty machinery anywhere. Used to pin the lambda = 0 equivalence.
Network plain_train(Network net, const Dataset& train_data,
                    const TrainingConfig& config) {
    nn::AdamState adam = nn::init_adam(net, config.learning_rate, config.beta1,
                                       config.beta2, config.epsilon);
    Rng shuffle_rng(config.seed);
    std::vector<Index> order(static_cast<std::size_t>(train_data.size()));
    std::iota(order.begin(), order.end(), Index{0});
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle) shuffle(order, shuffle_rng);
        const Index n = train_data.size();
        for (Index start = 0; start < n; start += config.batch_size) {
            const Index count = std::min<Index>(config.batch_size, n - start);
            Matrix bx(count, train_data.feature_dim());
            Vector by(count);
            for (Index i = 0; i < count; ++i) {
                bx.row(i) = train_data.features.row(order[start + i]);
                by[i] = train_data.labels[order[start + i]];
            }
            auto [pred, cache] = nn::forward(net, bx);
            auto [value, grad] = nn::base_loss(config.loss, by, pred);
            nn::ParamGrads grads = nn::backward(net, cache, grad);
            nn::adam_step(adam, net, grads);
        }
    }
    return net;
}

bool networks_bit_equal(const Network& a, const Network& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (!(a.weights[l] == b.weights[l])) return false;
        if (!(a.biases[l] == b.biases[l])) return false;
    }
    return true;
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("total_loss arithmetic") {
    Matrix bg = Matrix::Ones(1, 2);
    Matrix pg = Matrix::Constant(1, 2, 2.0);
    auto [v1, g1] = total_loss(0.5, bg, 0.2, pg, 1.0);
    CHECK(v1 == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(g1(0, 0) == 3.0);
    auto [v3, g3] = total_loss(0.5, bg, 0.2, pg, 3.0);
    CHECK(v3 == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(g3(0, 1) == 7.0);
    CHECK_THROWS_AS(total_loss(0.5, bg, 0.2, Matrix::Zero(2, 2), 1.0),
                    ShapeError);
}

TEST_CASE("total_loss with lambda zero returns the base pair untouched") {
    Matrix bg(1, 2);
    bg << -0.25, 0.75;
    Matrix pg = Matrix::Constant(1, 2, 123.0);
    auto [value, grad] = total_loss(0.5, bg, 99.0, pg, 0.0);
    CHECK(value == 0.5);
    CHECK(grad == bg);
}

TEST_CASE("split_dataset takes the leading rows for training") {
    Dataset ds = data::generate_classification(1000, 3);
    auto [train_split, val_split] = split_dataset(ds, 0.2);
    CHECK(train_split.size() == 800);
    CHECK(val_split.size() == 200);
    CHECK(train_split.features.row(0) == ds.features.row(0));
    CHECK(val_split.features.row(0) == ds.features.row(800));
    CHECK_THROWS_AS(split_dataset(ds, 1.0), DomainError);
}

TEST_CASE("lambda zero run is bit-identical to the plain loop") {
    Dataset full = data::generate_classification(300, 17);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    TrainingConfig config;
    config.lambda = 0.0;
    config.epochs = 3;
    config.seed = 17;

    Network start = nn::init_network(kTwoTenTwo, Task::Classification, 17);
    RunResult penalized = train(start, hot_rule(), train_split, val_split,
                                config);
    Network reference = plain_train(start, train_split, config);
    CHECK(networks_bit_equal(penalized.model, reference));

    // The prefix of the trajectory matches too.
    TrainingConfig one_epoch = config;
    one_epoch.epochs = 1;
    RunResult first = train(start, hot_rule(), train_split, val_split,
                            one_epoch);
    Network reference_one = plain_train(start, train_split, one_epoch);
    CHECK(networks_bit_equal(first.model, reference_one));
}

TEST_CASE("empty rule set behaves exactly like lambda zero") {
    Dataset full = data::generate_classification(300, 23);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    TrainingConfig config;
    config.lambda = 1.0;
    config.epochs = 3;
    config.seed = 23;
    Network start = nn::init_network(kTwoTenTwo, Task::Classification, 23);
    RunResult with_empty = train(start, rulelang::RuleSet{}, train_split,
                                 val_split, config);
    Network reference = plain_train(start, train_split, config);
    CHECK(networks_bit_equal(with_empty.model, reference));
}

TEST_CASE("per-epoch bookkeeping: total = base + lambda * penalty") {
    Dataset full = data::generate_classification(400, 5);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    TrainingConfig config;
    config.lambda = 1.5;
    config.epochs = 4;
    config.seed = 5;
    Network start = nn::init_network(kTwoTenTwo, Task::Classification, 5);
    RunResult result = train(start, hot_rule(), train_split, val_split, config);
    REQUIRE(result.curves.size() == 4);
    for (const EpochMetrics& m : result.curves) {
        CHECK(std::abs(m.train_total - (m.train_base + 1.5 * m.train_penalty)) <=
              1e-9);
        CHECK(std::abs(m.val_total - (m.val_base + 1.5 * m.val_penalty)) <=
              1e-9);
        CHECK(m.val_accuracy >= 0.0);
        CHECK(m.val_accuracy <= 1.0);
        CHECK(m.val_satisfaction >= 0.0);
        CHECK(m.val_satisfaction <= 1.0);
    }
    CHECK(result.final_accuracy == result.curves.back().val_accuracy);
}

TEST_CASE("seeded runs reproduce bit-identically") {
    Dataset full = data::generate_classification(200, 31);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    TrainingConfig config;
    config.epochs = 2;
    config.seed = 31;
    Network start = nn::init_network(kTwoTenTwo, Task::Classification, 31);
    RunResult a = train(start, hot_rule(), train_split, val_split, config);
    RunResult b = train(start, hot_rule(), train_split, val_split, config);
    CHECK(networks_bit_equal(a.model, b.model));
    REQUIRE(a.curves.size() == b.curves.size());
    for (std::size_t i = 0; i < a.curves.size(); ++i) {
        CHECK(a.curves[i].train_total == b.curves[i].train_total);
        CHECK(a.curves[i].val_satisfaction == b.curves[i].val_satisfaction);
    }
}

TEST_CASE("diverged run reports epoch and batch") {
    Dataset full = data::generate_regression_demo(100, 2);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    TrainingConfig config;
    config.lambda = 0.0;
    config.epochs = 5;
    config.loss = LossKind::MSE;
    config.learning_rate = 1e200;  // Adam step size explodes the parameters
    Network start = nn::init_network({{2, 4, Activation::ReLU},
                                      {4, 1, Activation::Identity}},
                                     Task::Regression, 2);
    try {
        train(start, rulelang::RuleSet{}, train_split, val_split, config);
        FAIL("expected DivergedError");
    } catch (const DivergedError& e) {
        CHECK(e.epoch() >= 1);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("train validates inputs") {
    Dataset full = data::generate_classification(50, 1);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    Network start = nn::init_network(kTwoTenTwo, Task::Classification, 1);
    TrainingConfig config;
    config.epochs = 0;
    CHECK_THROWS_AS(train(start, {}, train_split, val_split, config),
                    DomainError);
    config.epochs = 1;
    Dataset empty;
    empty.features.resize(0, 2);
    empty.labels.resize(0);
    CHECK_THROWS_AS(train(start, {}, empty, val_split, config), ShapeError);

    Network reg = nn::init_network({{2, 1, Activation::Identity}},
                                   Task::Regression, 1);
    CHECK_THROWS_AS(train(reg, hot_rule(), train_split, val_split, config),
                    TaskMismatchError);
}

TEST_CASE("evaluate: exact predictor scores accuracy 1") {
    // Logits c*(1 - x1 - x2) and c*(x1 + x2 - 1) implement the labeling
    // function exactly; the tie at the boundary goes to class 0, matching
    // the strict label threshold.
    Network net;
    net.task = Task::Classification;
    net.layers = {{2, 2, Activation::Identity}};
    Matrix w(2, 2);
    const double scale = 8.0;
    w << -scale, scale, -scale, scale;
    net.weights = {w};
    Vector b(2);
    b << scale, -scale;
    net.biases = {b};

    Dataset ds = data::generate_classification(500, 11);
    auto [accuracy, report] = evaluate(net, hot_rule(), ds);
    CHECK(accuracy == 1.0);
}

TEST_CASE("evaluate: constant predictors") {
    Network net;
    net.task = Task::Classification;
    net.layers = {{2, 2, Activation::Identity}};
    net.weights = {Matrix::Zero(2, 2)};
    Vector b(2);
    b << 1.0, 0.0;  // always class 0
    net.biases = {b};

    Dataset balanced;
    balanced.task = Task::Classification;
    balanced.features.resize(4, 2);
    balanced.features << 0.1, 0.1, 0.2, 0.2, 0.9, 0.9, 0.8, 0.8;
    balanced.labels.resize(4);
    balanced.labels << 0, 0, 1, 1;
    auto [accuracy, report] = evaluate(net, {}, balanced);
    CHECK(accuracy == 0.5);

    // Constant class-1 predictor satisfies the implication everywhere.
    Network ones = net;
    ones.biases[0] << 0.0, 1.0;
    auto [acc1, sat1] = evaluate(ones, hot_rule(), balanced);
    CHECK(sat1.ratio == 1.0);
}

TEST_CASE("sweep: single zero lambda is one baseline run") {
    Dataset full = data::generate_classification(200, 13);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    TrainingConfig config;
    config.epochs = 2;
    config.seed = 13;
    auto results = sweep_lambda(kTwoTenTwo, Task::Classification, hot_rule(),
                                train_split, val_split, config, {0.0});
    REQUIRE(results.size() == 1);
    CHECK(results[0].config.lambda == 0.0);
    Network reference = plain_train(
        nn::init_network(kTwoTenTwo, Task::Classification, 13), train_split,
        config);
    CHECK(networks_bit_equal(results[0].model, reference));
}

TEST_CASE("sweep: duplicate lambdas give bit-identical paired results") {
    Dataset full = data::generate_classification(200, 29);
    auto [train_split, val_split] = split_dataset(full, 0.2);
    TrainingConfig config;
    config.epochs = 2;
    config.seed = 29;
    auto results = sweep_lambda(kTwoTenTwo, Task::Classification, hot_rule(),
                                train_split, val_split, config, {0.7, 0.7});
    REQUIRE(results.size() == 2);
    CHECK(networks_bit_equal(results[0].model, results[1].model));
    for (std::size_t i = 0; i < results[0].curves.size(); ++i) {
        CHECK(results[0].curves[i].train_total ==
              results[1].curves[i].train_total);
    }
}

TEST_CASE("sweep: training against the penalty does not raise it (median)") {
    std::vector<double> penalty_free, penalized;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Dataset full = data::generate_classification(1000, seed);
        auto [train_split, val_split] = split_dataset(full, 0.2);
        TrainingConfig config;
        config.seed = seed;
        auto results = sweep_lambda(kTwoTenTwo, Task::Classification,
                                    hot_rule(), train_split, val_split, config,
                                    {0.0, 1.0});
        penalty_free.push_back(results[0].curves.back().train_penalty);
        penalized.push_back(results[1].curves.back().train_penalty);
    }
    CHECK(median(penalized) <= median(penalty_free));
}

}  // TEST_SUITE
