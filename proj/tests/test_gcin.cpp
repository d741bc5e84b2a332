#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "gcmi/gcin.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gcmi;
using gcmi::test::error_kind_of;

namespace {

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

TrainConfig quick_config(std::uint64_t seed, int max_epochs = 100) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.max_epochs = max_epochs;
    cfg.hidden_dims = {32};
    return cfg;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

} // namespace

TEST_CASE("discriminator_loss examples") {
    CHECK(discriminator_loss(v({2, 2}), v({0, 0})) == 0.0);
    CHECK(discriminator_loss(v({1}), v({1})) == 1.0);
    CHECK(discriminator_loss(v({2}), v({1})) == 0.5);
    // real and fake terms average over their own counts
    CHECK(discriminator_loss(v({0}), v({0, 0, 0})) == doctest::Approx(2.0));
    CHECK(error_kind_of([] { discriminator_loss({}, v({1})); }) == ErrorKind::invalid_argument);
    CHECK(error_kind_of([] { discriminator_loss(v({1}), {}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("generator_loss examples") {
    CHECK(generator_loss(v({1, 1, 1})) == 0.0);
    CHECK(generator_loss(v({0, 2})) == 0.5);
    CHECK(generator_loss(v({3})) == 2.0);
    CHECK(error_kind_of([] { generator_loss({}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("generator_loss is zero exactly when every output is one") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = test::uniform_int(rng, 1, 8);
        std::vector<double> d(static_cast<std::size_t>(n), 1.0);
        const bool perturb = trial % 2 == 1;
        if (perturb) d[static_cast<std::size_t>(test::uniform_int(rng, 0, n - 1))] = test::uniform(rng, 0.0, 2.0);
        const bool all_one = std::all_of(d.begin(), d.end(), [](double x) { return x == 1.0; });
        CHECK((generator_loss(d) == 0.0) == all_one);
        CHECK(generator_loss(d) >= 0.0);
    }
}

TEST_CASE("accuracy_penalty examples") {
    CHECK(accuracy_penalty(1.0, 1.0, ColumnKind::continuous) == 0.0);
    CHECK(accuracy_penalty(0.0, 2.0, ColumnKind::continuous) == 4.0);
    CHECK(accuracy_penalty(1.0, 0.5, ColumnKind::binary) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(accuracy_penalty(0.0, 0.25, ColumnKind::binary) == doctest::Approx(-std::log(0.75)).epsilon(1e-15));
    CHECK(error_kind_of([] { accuracy_penalty(1.0, 1.0, ColumnKind::binary); }) == ErrorKind::domain);
    CHECK(error_kind_of([] { accuracy_penalty(1.0, 0.0, ColumnKind::binary); }) == ErrorKind::domain);
    CHECK(error_kind_of([] { accuracy_penalty(0.5, 0.5, ColumnKind::binary); }) == ErrorKind::domain);
}

TEST_CASE("DiscreteDist validation") {
    CHECK(DiscreteDist(v({0, 1}), v({0.25, 0.75})).mass_at(1.0) == 0.75);
    CHECK(DiscreteDist(v({0, 1}), v({0.25, 0.75})).mass_at(7.0) == 0.0);
    CHECK(error_kind_of([] { DiscreteDist(v({0, 1}), v({0.5, 0.6})); }) == ErrorKind::invalid_argument);
    CHECK(error_kind_of([] { DiscreteDist(v({0, 1}), v({-0.5, 1.5})); }) == ErrorKind::invalid_argument);
    CHECK(error_kind_of([] { DiscreteDist(v({1, 1}), v({0.5, 0.5})); }) == ErrorKind::invalid_argument);
    CHECK(error_kind_of([] { DiscreteDist(v({1}), v({0.5, 0.5})); }) == ErrorKind::invalid_argument);
}

TEST_CASE("optimal_discriminator examples") {
    const DiscreteDist p(v({0, 1, 2}), v({0.8, 0.2, 0.0}));
    const DiscreteDist g(v({0, 1, 2}), v({0.4, 0.1, 0.5}));
    CHECK(optimal_discriminator(p, g, 0.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(optimal_discriminator(p, g, 2.0) == 0.0);
    CHECK(optimal_discriminator(p, p, 1.0) == 1.0);
    const DiscreteDist q(v({0, 1, 2}), v({1.0, 0.0, 0.0}));
    CHECK(error_kind_of([&] { optimal_discriminator(q, q, 2.0); }) == ErrorKind::undefined_point);
}

TEST_CASE("chi2_generator_objective examples") {
    const DiscreteDist a(v({0, 1}), v({1.0, 0.0}));
    const DiscreteDist b(v({0, 1}), v({0.0, 1.0}));
    CHECK(chi2_generator_objective(a, b) == 1.0);
    CHECK(chi2_generator_objective(a, a) == 0.0);
    const DiscreteDist c(v({0, 1}), v({0.6, 0.4}));
    const DiscreteDist d(v({0, 1}), v({0.4, 0.6}));
    CHECK(chi2_generator_objective(c, d) == doctest::Approx(0.04).epsilon(1e-14));
    const DiscreteDist e(v({0, 2}), v({0.5, 0.5}));
    CHECK(error_kind_of([&] { chi2_generator_objective(c, e); }) == ErrorKind::invalid_argument);
}

TEST_CASE("population losses are the pointwise sums") {
    const DiscreteDist p(v({0, 1}), v({0.3, 0.7}));
    const DiscreteDist g(v({0, 1}), v({0.6, 0.4}));
    const auto d = v({0.5, 1.5});
    CHECK(population_discriminator_loss(p, g, d) ==
          doctest::Approx(0.5 * (0.3 * 2.25 + 0.6 * 0.25 + 0.7 * 0.25 + 0.4 * 2.25)).epsilon(1e-15));
    CHECK(population_generator_objective(p, g, d) == doctest::Approx(0.5 * (0.9 * 0.25 + 1.1 * 0.25)).epsilon(1e-15));
    CHECK(error_kind_of([&] { population_discriminator_loss(p, g, v({1})); }) == ErrorKind::shape);
}

TEST_CASE("optimal discriminator oracle: grid minimisation lands on D* and the chi2 objective") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const auto [p, g] = test::random_dist_pair(rng);
        const auto d = test::grid_minimise_discriminator(p, g);
        INFO("trial " << trial);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p.probabilities()[i] + g.probabilities()[i] == 0.0) continue;
            CHECK(std::abs(d[i] - optimal_discriminator(p, g, p.support()[i])) < 1e-6);
        }
        CHECK(std::abs(population_generator_objective(p, g, d) - chi2_generator_objective(p, g)) < 1e-9);
    }
}

TEST_CASE("chi2 objective is non-negative and zero only for equal distributions") {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        const auto [p, g] = test::random_dist_pair(rng);
        double gap = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            gap = std::max(gap, std::abs(p.probabilities()[i] - g.probabilities()[i]));
        }
        const double chi2 = chi2_generator_objective(p, g);
        CHECK(chi2 >= 0.0);
        CHECK((chi2 == 0.0) == (gap < 1e-12));
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p.probabilities()[i] > 0.0) CHECK(optimal_discriminator(p, p, p.support()[i]) == 1.0);
        }
    }
}

TEST_CASE("scale_architecture examples") {
    CHECK(scale_architecture(10000, 15) == std::vector<int>{100});
    CHECK(scale_architecture(20000, 15) == std::vector<int>{100});
    CHECK(scale_architecture(25000, 30) == std::vector<int>{200, 100});
    CHECK(scale_architecture(40000, 60) == std::vector<int>{400, 200});
    CHECK(scale_architecture(40000, 10) == std::vector<int>{200, 100});
}

TEST_CASE("train config validation") {
    TrainConfig ok;
    CHECK_NOTHROW(ok.validate());
    auto broken = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        return error_kind_of([&] { c.validate(); });
    };
    CHECK(broken([](TrainConfig& c) { c.lr_generator = 0.0; }) == ErrorKind::invalid_argument);
    CHECK(broken([](TrainConfig& c) { c.disc_iters_per_cycle = 0; }) == ErrorKind::invalid_argument);
    CHECK(broken([](TrainConfig& c) { c.noise_dim = 0; }) == ErrorKind::invalid_argument);
    CHECK(broken([](TrainConfig& c) { c.acc_penalty_weight = -1.0; }) == ErrorKind::invalid_argument);
    CHECK(broken([](TrainConfig& c) { c.hidden_dims = {4, 0}; }) == ErrorKind::invalid_argument);
}

TEST_CASE("composed D(G) gradients match finite differences") {
    Rng rng(31);
    const std::array<ColumnKind, 2> kinds{ColumnKind::continuous, ColumnKind::binary};
    for (int trial = 0; trial < 10; ++trial) {
        const auto kind = kinds[static_cast<std::size_t>(trial) % kinds.size()];
        const int cond_dim = test::uniform_int(rng, 1, 4);
        const int k = test::uniform_int(rng, 1, 3);
        const int b = test::uniform_int(rng, 2, 6);
        const std::vector<int> hidden{test::uniform_int(rng, 2, 5)};
        const auto head = kind == ColumnKind::continuous ? nn::OutputActivation::identity : nn::OutputActivation::sigmoid;
        auto gen = nn::Mlp::create(cond_dim + k, hidden, 1, head, rng());
        auto disc = nn::Mlp::create(cond_dim + 1, hidden, 1, nn::OutputActivation::scaled_sigmoid, rng());
        test::randomize_biases(gen, rng);
        test::randomize_biases(disc, rng);
        const Matrix cond = test::gaussian_matrix(rng, b, cond_dim);
        const Matrix noise = test::gaussian_matrix(rng, b, k);
        Matrix target(b, 1);
        for (int r = 0; r < b; ++r) target(r, 0) = kind == ColumnKind::continuous ? test::uniform(rng, -1, 1) : r % 2;
        INFO("trial " << trial);

        nn::ParamGrads gg;
        generator_batch_loss(gen, disc, cond, target, noise, kind, 0.7, &gg);
        const auto gcheck = test::check_gradients(gen, gg, [&] {
            return generator_batch_loss(gen, disc, cond, target, noise, kind, 0.7, nullptr).total;
        });
        CHECK(gcheck.max_rel_error < 1e-4);

        nn::ParamGrads dg;
        discriminator_batch_loss(gen, disc, cond, target, noise, &dg);
        const auto dcheck = test::check_gradients(
            disc, dg, [&] { return discriminator_batch_loss(gen, disc, cond, target, noise, nullptr); });
        CHECK(dcheck.max_rel_error < 1e-4);
    }
}

TEST_CASE("batch losses agree with the scalar loss functions") {
    Rng rng(5);
    const std::vector<int> hidden{4};
    const auto gen = nn::Mlp::create(3, hidden, 1, nn::OutputActivation::identity, 1);
    const auto disc = nn::Mlp::create(3, hidden, 1, nn::OutputActivation::scaled_sigmoid, 2);
    const Matrix cond = test::gaussian_matrix(rng, 5, 2);
    const Matrix noise = test::gaussian_matrix(rng, 5, 1);
    const Matrix target = test::gaussian_matrix(rng, 5, 1);
    Matrix gin(5, 3);
    gin << cond, noise;
    const Matrix fake = gen.forward(gin);
    Matrix real_in(5, 3);
    real_in << cond, target;
    Matrix fake_in(5, 3);
    fake_in << cond, fake;
    const Matrix dr = disc.forward(real_in);
    const Matrix df = disc.forward(fake_in);
    const std::vector<double> real(dr.data(), dr.data() + 5);
    const std::vector<double> gen_out(df.data(), df.data() + 5);

    CHECK(discriminator_batch_loss(gen, disc, cond, target, noise, nullptr) ==
          doctest::Approx(discriminator_loss(real, gen_out)).epsilon(1e-14));
    const auto gl = generator_batch_loss(gen, disc, cond, target, noise, ColumnKind::continuous, 2.0, nullptr);
    CHECK(gl.adversarial == doctest::Approx(generator_loss(gen_out)).epsilon(1e-14));
    double acc = 0.0;
    for (int r = 0; r < 5; ++r) acc += accuracy_penalty(target(r, 0), fake(r, 0), ColumnKind::continuous);
    CHECK(gl.accuracy == doctest::Approx(acc / 5.0).epsilon(1e-14));
    CHECK(gl.total == doctest::Approx(gl.adversarial + 2.0 * gl.accuracy).epsilon(1e-14));
}

TEST_CASE("train_gcin builds pairs with the documented shapes") {
    Rng rng(1);
    const Matrix x = test::gaussian_matrix(rng, 40, 3);
    std::vector<double> y(40);
    for (auto& t : y) t = test::uniform(rng);
    auto cfg = quick_config(4, 2);
    cfg.hidden_dims.clear();
    cfg.noise_dim = 5;
    const auto fit = train_gcin(x, y, ColumnKind::continuous, cfg, 0, 2);
    CHECK(fit.pair.generator.input_dim() == 3 + 5);
    CHECK(fit.pair.discriminator.input_dim() == 4);
    CHECK(fit.pair.generator.output_dim() == 1);
    CHECK(fit.pair.discriminator.output_activation() == nn::OutputActivation::scaled_sigmoid);
    CHECK(fit.pair.generator.layers()[0].weight.rows() == 100);
    CHECK(fit.pair.column_index == 2);
    CHECK(fit.pair.conditioning_dim() == 3);
    CHECK_FALSE(fit.trace.cycles.empty());

    std::vector<double> codes(40);
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = static_cast<double>(i % 3);
    const auto cat = train_gcin(x, codes, ColumnKind::categorical, cfg, 3);
    CHECK(cat.pair.target_width() == 3);
    CHECK(cat.pair.discriminator.input_dim() == 6);
    CHECK(cat.pair.generator.output_activation() == nn::OutputActivation::sigmoid);
}

TEST_CASE("train_gcin rejects bad inputs") {
    Rng rng(1);
    const Matrix x = test::gaussian_matrix(rng, 5, 2);
    const auto cfg = quick_config(1, 1);
    CHECK(error_kind_of([&] { train_gcin(x.topRows(1), v({1.0}), ColumnKind::continuous, cfg); }) ==
          ErrorKind::insufficient_data);
    CHECK(error_kind_of([&] { train_gcin(x, v({1, 2, 3}), ColumnKind::continuous, cfg); }) == ErrorKind::shape);
    Matrix holes = x;
    holes(2, 1) = std::nan("");
    CHECK(error_kind_of([&] { train_gcin(holes, v({1, 2, 3, 4, 5}), ColumnKind::continuous, cfg); }) ==
          ErrorKind::invalid_argument);
    CHECK(error_kind_of([&] { train_gcin(x, v({0, 1, 2, 1, 0}), ColumnKind::binary, cfg); }) ==
          ErrorKind::invalid_argument);
    auto wild = cfg;
    wild.lr_generator = 1e300;
    wild.lr_discriminator = 1e300;
    wild.max_epochs = 50;
    CHECK(error_kind_of([&] { train_gcin(x, v({1, 2, 3, 4, 5}), ColumnKind::continuous, wild); }) ==
          ErrorKind::numeric);
}

TEST_CASE("constant continuous target is reproduced") {
    Rng rng(11);
    const Matrix x = test::gaussian_matrix(rng, 200, 2);
    const std::vector<double> y(200, 3.5);
    const auto fit = train_gcin(x, y, ColumnKind::continuous, quick_config(7, 200));
    const auto out = impute_column(fit.pair, test::gaussian_matrix(rng, 100, 2), 3);
    double mean = 0.0;
    for (double o : out) mean += o;
    mean /= static_cast<double>(out.size());
    CHECK(std::abs(mean - 3.5) < 0.05);
}

TEST_CASE("linear signal beats mean imputation on held-out rows") {
    Rng rng(12);
    std::normal_distribution<double> noise(0.0, 0.1);
    auto make = [&](Eigen::Index n, Matrix& x, std::vector<double>& y) {
        x = test::gaussian_matrix(rng, n, 2);
        y.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = 0.9 * x(i, 0) + noise(rng);
    };
    Matrix x_train, x_test;
    std::vector<double> y_train, y_test;
    make(1000, x_train, y_train);
    make(200, x_test, y_test);
    const auto fit = train_gcin(x_train, y_train, ColumnKind::continuous, quick_config(9, 100));
    const auto pred = impute_column(fit.pair, x_test, 1);
    double mu = 0.0;
    for (double t : y_train) mu += t;
    mu /= static_cast<double>(y_train.size());
    const std::vector<double> mean_pred(y_test.size(), mu);
    const double gcin_rmse = rmse(pred, y_test);
    const double mean_rmse = rmse(mean_pred, y_test);
    INFO("gcin " << gcin_rmse << " mean " << mean_rmse);
    CHECK(gcin_rmse < mean_rmse);
}

TEST_CASE("training is deterministic in the seed") {
    Rng rng(13);
    const Matrix x = test::gaussian_matrix(rng, 80, 3);
    std::vector<double> y(80);
    for (auto& t : y) t = test::uniform(rng);
    const auto a = train_gcin(x, y, ColumnKind::continuous, quick_config(21, 20));
    const auto b = train_gcin(x, y, ColumnKind::continuous, quick_config(21, 20));
    CHECK(a.trace == b.trace);
    const auto c = train_gcin(x, y, ColumnKind::continuous, quick_config(22, 20));
    CHECK_FALSE(a.trace == c.trace);

    std::ostringstream csv;
    write_trace_csv(a.trace, csv);
    const std::string text = csv.str();
    CHECK(text.rfind("cycle,loss_d,loss_g,loss_acc\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') ==
          static_cast<long>(a.trace.cycles.size()) + 1);
}

TEST_CASE("early stopping ends training before the epoch cap") {
    Rng rng(14);
    const Matrix x = test::gaussian_matrix(rng, 30, 1);
    const std::vector<double> y(30, 1.0);
    auto cfg = quick_config(2, 100000);
    cfg.early_stop_patience = 3;
    cfg.early_stop_tolerance = 1e9;
    const auto fit = train_gcin(x, y, ColumnKind::continuous, cfg);
    CHECK(fit.trace.stop == TrainStop::early_stop);
    CHECK(fit.trace.cycles.size() == 4);
}

TEST_CASE("impute_column examples") {
    Rng rng(15);
    const Matrix x = test::gaussian_matrix(rng, 200, 2);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> y(200);
    for (Eigen::Index i = 0; i < 200; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + noise(rng);
    const auto fit = train_gcin(x, y, ColumnKind::continuous, quick_config(3, 50));

    CHECK(impute_column(fit.pair, Matrix(0, 2), 1).empty());
    CHECK(error_kind_of([&] { impute_column(fit.pair, Matrix::Zero(3, 3), 1); }) == ErrorKind::shape);

    const Matrix q = test::gaussian_matrix(rng, 50, 2);
    const auto a = impute_column(fit.pair, q, 42);
    CHECK(a == impute_column(fit.pair, q, 42));
    const auto b = impute_column(fit.pair, q, 43);
    CHECK(a != b);
    double spread = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) spread += std::abs(a[i] - b[i]);
    CHECK(spread > 0.0);
}

TEST_CASE("discrete imputations stay on their levels") {
    Rng rng(16);
    const Matrix x = test::gaussian_matrix(rng, 120, 2);
    std::vector<double> bin(120), cat(120);
    for (Eigen::Index i = 0; i < 120; ++i) {
        bin[static_cast<std::size_t>(i)] = x(i, 0) > 0 ? 1.0 : 0.0;
        cat[static_cast<std::size_t>(i)] = x(i, 1) < -0.5 ? 0.0 : (x(i, 1) < 0.5 ? 1.0 : 2.0);
    }
    const Matrix q = test::gaussian_matrix(rng, 60, 2);
    const auto bfit = train_gcin(x, bin, ColumnKind::binary, quick_config(1, 30));
    const auto cfit = train_gcin(x, cat, ColumnKind::categorical, quick_config(1, 30), 3);
    for (bool det : {false, true}) {
        for (double b : impute_column(bfit.pair, q, 5, {det})) CHECK((b == 0.0 || b == 1.0));
        for (double c : impute_column(cfit.pair, q, 5, {det})) CHECK((c == 0.0 || c == 1.0 || c == 2.0));
    }
    // the threshold option emits p >= 0.5 for the generator probability drawn
    // with the same noise stream
    Rng noise_rng(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix in(q.rows(), 2 + bfit.pair.noise_dim);
    for (Eigen::Index c = 0; c < 2; ++c) in.col(c) = (q.col(c).array() - bfit.pair.predictor_norm[c].shift) / bfit.pair.predictor_norm[c].scale;
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        for (int c = 0; c < bfit.pair.noise_dim; ++c) in(r, 2 + c) = normal(noise_rng);
    }
    const Matrix prob = bfit.pair.generator.forward(in);
    const auto thresholded = impute_column(bfit.pair, q, 5, {true});
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        CHECK(thresholded[static_cast<std::size_t>(r)] == (prob(r, 0) >= 0.5 ? 1.0 : 0.0));
    }
}
