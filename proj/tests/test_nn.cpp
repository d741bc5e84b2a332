#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>

#include "gcmi/nn.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace gcmi;
using namespace gcmi::nn;
using gcmi::test::check_gradients;
using gcmi::test::random_matrix;

namespace {

Mlp linear(double w, double b, OutputActivation act = OutputActivation::identity) {
    DenseLayer l{Matrix::Constant(1, 1, w), Vector::Constant(1, b)};
    return Mlp({l}, act);
}

bool same_parameters(const Mlp& a, const Mlp& b) {
    if (a.layers().size() != b.layers().size()) return false;
    for (std::size_t i = 0; i < a.layers().size(); ++i) {
        if (!test::bit_equal(a.layers()[i].weight, b.layers()[i].weight)) return false;
        if (!test::bit_equal(a.layers()[i].bias, b.layers()[i].bias)) return false;
    }
    return true;
}

} // namespace

TEST_CASE("create builds the requested layer chain") {
    const std::array<int, 1> one{100};
    const auto a = Mlp::create(3, one, 1, OutputActivation::identity, 42);
    REQUIRE(a.layers().size() == 2);
    CHECK(a.layers()[0].weight.rows() == 100);
    CHECK(a.layers()[0].weight.cols() == 3);
    CHECK(a.layers()[1].weight.rows() == 1);
    CHECK(a.layers()[1].weight.cols() == 100);
    CHECK(a.parameter_count() == 3 * 100 + 100 + 100 + 1);

    const std::array<int, 2> two{200, 100};
    const auto b = Mlp::create(5, two, 1, OutputActivation::scaled_sigmoid, 7);
    REQUIRE(b.layers().size() == 3);
    CHECK(b.input_dim() == 5);
    CHECK(b.layers()[1].weight.rows() == 100);
    CHECK(b.layers()[1].weight.cols() == 200);
    CHECK(b.output_dim() == 1);
    CHECK(b.output_activation() == OutputActivation::scaled_sigmoid);
}

TEST_CASE("create is deterministic in the seed") {
    const std::array<int, 1> h{16};
    CHECK(same_parameters(Mlp::create(4, h, 2, OutputActivation::identity, 9),
                          Mlp::create(4, h, 2, OutputActivation::identity, 9)));
    CHECK_FALSE(same_parameters(Mlp::create(4, h, 2, OutputActivation::identity, 9),
                                Mlp::create(4, h, 2, OutputActivation::identity, 10)));
}

TEST_CASE("create uses He scaling and zero biases") {
    const std::array<int, 1> h{400};
    const auto net = Mlp::create(50, h, 1, OutputActivation::identity, 3);
    const auto& w = net.layers()[0].weight;
    const double var = w.array().square().mean();
    CHECK(var == doctest::Approx(2.0 / 50.0).epsilon(0.05));
    CHECK(net.layers()[0].bias.isZero(0.0));
    CHECK(net.layers()[1].bias.isZero(0.0));
}

TEST_CASE("create rejects empty dimensions") {
    const std::array<int, 1> h{4};
    const std::array<int, 1> bad{0};
    CHECK(test::error_kind_of([&] { Mlp::create(0, h, 1, OutputActivation::identity, 1); }) ==
          ErrorKind::invalid_argument);
    CHECK(test::error_kind_of([&] { Mlp::create(2, h, -1, OutputActivation::identity, 1); }) ==
          ErrorKind::invalid_argument);
    CHECK(test::error_kind_of([&] { Mlp::create(2, bad, 1, OutputActivation::identity, 1); }) ==
          ErrorKind::invalid_argument);
}

TEST_CASE("forward examples") {
    SUBCASE("zero parameters give zero output") {
        const std::array<int, 1> h{5};
        auto net = Mlp::create(3, h, 2, OutputActivation::identity, 1);
        for (auto& l : net.layers()) {
            l.weight.setZero();
            l.bias.setZero();
        }
        CHECK(net.forward(Matrix::Ones(4, 3)).isZero(0.0));
    }
    SUBCASE("single linear layer") {
        const auto out = linear(2.0, 1.0).forward(Matrix::Constant(1, 1, 3.0));
        CHECK(out(0, 0) == 7.0);
    }
    SUBCASE("scaled sigmoid at zero is one") {
        CHECK(linear(0.0, 0.0, OutputActivation::scaled_sigmoid).forward(Matrix::Zero(1, 1))(0, 0) == 1.0);
        CHECK(linear(0.0, 0.0, OutputActivation::sigmoid).forward(Matrix::Zero(1, 1))(0, 0) == 0.5);
    }
    SUBCASE("hidden ReLU clips negatives") {
        DenseLayer hidden{Matrix::Constant(1, 1, 1.0), Vector::Zero(1)};
        DenseLayer out{Matrix::Constant(1, 1, 1.0), Vector::Zero(1)};
        const Mlp net({hidden, out}, OutputActivation::identity);
        Matrix x(2, 1);
        x << -3.0, 3.0;
        const auto y = net.forward(x);
        CHECK(y(0, 0) == 0.0);
        CHECK(y(1, 0) == 3.0);
    }
    SUBCASE("width mismatch is a shape error") {
        CHECK(test::error_kind_of([] { linear(1, 0).forward(Matrix::Zero(2, 3)); }) == ErrorKind::shape);
    }
}

TEST_CASE("cached and uncached forward agree") {
    Rng rng(5);
    const std::array<int, 2> h{7, 3};
    const auto net = Mlp::create(4, h, 2, OutputActivation::sigmoid, 11);
    const Matrix x = random_matrix(rng, 6, 4);
    ForwardCache cache;
    const Matrix cached = net.forward(x, cache);
    CHECK(test::bit_equal(cached, net.forward(x)));
}

TEST_CASE("scaled sigmoid outputs stay strictly inside (0, 2)") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::array<int, 1> h{test::uniform_int(rng, 1, 12)};
        const int in = test::uniform_int(rng, 1, 6);
        const auto net = Mlp::create(in, h, 1, OutputActivation::scaled_sigmoid, rng());
        const double scale = std::pow(10.0, test::uniform(rng, -2.0, 1.5));
        const Matrix y = net.forward(random_matrix(rng, 20, in, -scale, scale));
        CHECK((y.array() > 0.0).all());
        CHECK((y.array() < 2.0).all());
    }
}

TEST_CASE("backward examples") {
    SUBCASE("zero output gradients give zero parameter gradients") {
        Rng rng(2);
        const std::array<int, 1> h{4};
        const auto net = Mlp::create(3, h, 1, OutputActivation::identity, 2);
        const auto g = net.backward(random_matrix(rng, 5, 3), Matrix::Zero(5, 1));
        for (const auto& l : g.layers) {
            CHECK(l.weight.isZero(0.0));
            CHECK(l.bias.isZero(0.0));
        }
    }
    SUBCASE("single linear layer: weight gradient is g x^T") {
        DenseLayer l{Matrix::Zero(2, 3), Vector::Zero(2)};
        const Mlp net({l}, OutputActivation::identity);
        Matrix x(1, 3);
        x << 1.0, -2.0, 0.5;
        Matrix g(1, 2);
        g << 3.0, -1.0;
        const auto grads = net.backward(x, g);
        const Matrix expected = g.transpose() * x;
        CHECK(test::bit_equal(grads.layers[0].weight, expected));
        CHECK(grads.layers[0].bias(0) == 3.0);
        CHECK(grads.layers[0].bias(1) == -1.0);
    }
    SUBCASE("mismatched gradient shape is a shape error") {
        const auto net = linear(1, 0);
        ForwardCache cache;
        net.forward(Matrix::Zero(3, 1), cache);
        CHECK(test::error_kind_of([&] { net.backward(cache, Matrix::Zero(2, 1)); }) == ErrorKind::shape);
    }
}

TEST_CASE("backward matches central finite differences on a 3-4-1 network") {
    Rng rng(1234);
    const std::array<int, 1> h{4};
    auto net = Mlp::create(3, h, 1, OutputActivation::identity, 77);
    const Matrix x = random_matrix(rng, 5, 3);
    const Matrix g = random_matrix(rng, 5, 1);
    const auto analytic = net.backward(x, g);
    const auto check = check_gradients(net, analytic, [&] { return (net.forward(x).array() * g.array()).sum(); });
    CHECK(check.components == 3 * 4 + 4 + 4 + 1);
    CHECK(check.max_rel_error < 1e-4);
}

TEST_CASE("gradient property: random networks and heads") {
    Rng rng(99);
    const std::array<OutputActivation, 3> heads{OutputActivation::identity, OutputActivation::sigmoid,
                                                OutputActivation::scaled_sigmoid};
    for (int trial = 0; trial < 20; ++trial) {
        const int in = test::uniform_int(rng, 1, 5);
        const int out = test::uniform_int(rng, 1, 3);
        std::vector<int> hidden(static_cast<std::size_t>(test::uniform_int(rng, 1, 2)));
        for (auto& w : hidden) w = test::uniform_int(rng, 2, 6);
        const auto head = heads[static_cast<std::size_t>(trial) % heads.size()];
        auto net = Mlp::create(in, hidden, out, head, rng());
        test::randomize_biases(net, rng);
        const Matrix x = random_matrix(rng, 4, in);
        const Matrix g = random_matrix(rng, 4, out);
        ForwardCache cache;
        net.forward(x, cache);
        Matrix input_grads;
        const auto analytic = net.backward(cache, g, &input_grads);
        const auto check = check_gradients(net, analytic, [&] { return (net.forward(x).array() * g.array()).sum(); });
        INFO("trial " << trial);
        CHECK(check.max_rel_error < 1e-4);

        // input gradient, both through backward() and input_gradient()
        CHECK(test::bit_equal(input_grads, net.input_gradient(cache, g)));
        Matrix xp = x;
        double worst = 0.0;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                const double saved = xp(r, c);
                xp(r, c) = saved + 1e-5;
                const double up = (net.forward(xp).array() * g.array()).sum();
                xp(r, c) = saved - 1e-5;
                const double down = (net.forward(xp).array() * g.array()).sum();
                xp(r, c) = saved;
                worst = std::max(worst, test::relative_error(input_grads(r, c), (up - down) / 2e-5));
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("backward_into reuses storage and matches backward") {
    Rng rng(8);
    const std::array<int, 1> h{6};
    const auto net = Mlp::create(3, h, 2, OutputActivation::identity, 8);
    ForwardCache cache;
    ParamGrads grads;
    for (int step = 0; step < 3; ++step) {
        const Matrix x = random_matrix(rng, 5, 3);
        const Matrix g = random_matrix(rng, 5, 2);
        net.forward(x, cache);
        net.backward_into(cache, g, grads);
        const auto fresh = net.backward(x, g);
        for (std::size_t k = 0; k < grads.layers.size(); ++k) {
            CHECK(test::bit_equal(grads.layers[k].weight, fresh.layers[k].weight));
            CHECK(test::bit_equal(grads.layers[k].bias, fresh.layers[k].bias));
        }
    }
}

TEST_CASE("adam: zero gradients and zero l2 leave parameters unchanged") {
    const std::array<int, 1> h{5};
    auto net = Mlp::create(3, h, 1, OutputActivation::identity, 4);
    const auto before = net;
    AdamState state(net, {0.001, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 5; ++i) adam_step(net, net.zero_grads(), state);
    CHECK(same_parameters(net, before));
    CHECK(state.step_count() == 5);
}

TEST_CASE("adam: first step moves each parameter by about -lr * sign(g)") {
    Rng rng(21);
    const std::array<int, 1> h{4};
    auto net = Mlp::create(2, h, 1, OutputActivation::identity, 5);
    const auto before = net;
    auto grads = net.zero_grads();
    for (auto& l : grads.layers) {
        l.weight = random_matrix(rng, l.weight.rows(), l.weight.cols(), 0.1, 2.0);
        l.bias = random_matrix(rng, l.bias.size(), 1, -2.0, -0.1);
    }
    const double lr = 0.01;
    AdamState state(net, {lr, 0.9, 0.999, 1e-8, 0.0});
    adam_step(net, grads, state);
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
        const Matrix dw = net.layers()[k].weight - before.layers()[k].weight;
        const Vector db = net.layers()[k].bias - before.layers()[k].bias;
        CHECK(((dw.array() + lr).abs() < 1e-8).all());
        CHECK(((db.array() - lr).abs() < 1e-8).all());
    }
}

TEST_CASE("adam: l2 alone shrinks weights toward zero") {
    const std::array<int, 1> h{8};
    auto net = Mlp::create(3, h, 1, OutputActivation::identity, 6);
    const auto before = net;
    AdamState state(net, {0.001, 0.9, 0.999, 1e-8, 1e-4});
    adam_step(net, net.zero_grads(), state);
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
        const auto& w0 = before.layers()[k].weight;
        const auto& w1 = net.layers()[k].weight;
        for (Eigen::Index i = 0; i < w0.size(); ++i) {
            const double a = w0.data()[i];
            const double b = w1.data()[i];
            if (a != 0.0) {
                CHECK(std::abs(b) < std::abs(a));
                CHECK(std::signbit(a) == std::signbit(b));
            }
        }
    }
}

TEST_CASE("adam: non-finite gradients raise a numeric error naming the layer") {
    const std::array<int, 1> h{3};
    auto net = Mlp::create(2, h, 1, OutputActivation::identity, 6);
    const auto before = net;
    AdamState state(net, {});
    auto grads = net.zero_grads();
    grads.layers[1].weight(0, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
        adam_step(net, grads, state);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
    CHECK(same_parameters(net, before));
}

TEST_CASE("adam config validation") {
    const auto net = linear(1, 0);
    CHECK(test::error_kind_of([&] { AdamState(net, {0.0, 0.9, 0.999, 1e-8, 0.0}); }) == ErrorKind::invalid_argument);
    CHECK(test::error_kind_of([&] { AdamState(net, {0.1, 1.0, 0.999, 1e-8, 0.0}); }) == ErrorKind::invalid_argument);
    CHECK(test::error_kind_of([&] { AdamState(net, {0.1, 0.9, 0.999, 1e-8, -1.0}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("training is deterministic") {
    auto run = [] {
        Rng rng(3);
        const std::array<int, 1> h{6};
        auto net = Mlp::create(2, h, 1, OutputActivation::identity, 12);
        AdamState state(net, {});
        const Matrix x = random_matrix(rng, 16, 2);
        const Matrix y = x.col(0) - 0.5 * x.col(1);
        for (int i = 0; i < 20; ++i) {
            const Matrix g = 2.0 * (net.forward(x) - y) / 16.0;
            adam_step(net, net.backward(x, g), state);
        }
        return net;
    };
    CHECK(same_parameters(run(), run()));
}

TEST_CASE("checkpoint round trip is exact") {
    const std::array<int, 2> h{5, 3};
    const auto net = Mlp::create(4, h, 2, OutputActivation::scaled_sigmoid, 31);
    const auto doc = to_json(net);
    CHECK(doc["format"] == "gcmi-mlp");
    CHECK(doc["version"] == 1);
    CHECK(doc["output_activation"] == "scaled_sigmoid_0_2");
    CHECK(doc["layers"].size() == 3);
    CHECK(doc["layers"][0]["weight"].size() == 20);

    const auto back = mlp_from_json(doc);
    CHECK(same_parameters(net, back));
    CHECK(back.output_activation() == net.output_activation());

    test::TempDir dir("ckpt");
    save_checkpoint(net, dir / "net.json");
    CHECK(same_parameters(net, load_checkpoint(dir / "net.json")));
}

TEST_CASE("malformed checkpoints are parse errors") {
    nlohmann::json doc = to_json(linear(1, 0));
    doc["layers"][0]["weight"] = {1.0, 2.0};
    CHECK(test::error_kind_of([&] { mlp_from_json(doc); }) == ErrorKind::parse);
    doc = to_json(linear(1, 0));
    doc["format"] = "other";
    CHECK(test::error_kind_of([&] { mlp_from_json(doc); }) == ErrorKind::parse);
    doc = to_json(linear(1, 0));
    doc.erase("layers");
    CHECK(test::error_kind_of([&] { mlp_from_json(doc); }) == ErrorKind::parse);
}
