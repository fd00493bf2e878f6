#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "c2bn/cost.hpp"
#include "c2bn/error.hpp"
#include "c2bn/nn.hpp"
#include "c2bn/tape.hpp"
#include "support/gradcheck.hpp"

using namespace c2bn;
using namespace c2bn::nn;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

CbnParamBank bank_with(std::size_t classes, std::vector<double> gamma, std::vector<double> beta,
                       double eps = 1e-12) {
    CbnParamBank b = CbnParamBank::create(classes, 1, eps);
    for (std::size_t c = 0; c < classes; ++c) {
        b.gamma(static_cast<Eigen::Index>(c), 0) = gamma[c];
        b.beta(static_cast<Eigen::Index>(c), 0) = beta[c];
    }
    return b;
}

}  // namespace

TEST_CASE("linear_forward") {
    LinearLayer sum_layer{mat({{1}, {1}}), mat({{0}})};
    CHECK(linear_forward(mat({{1, 2}}), sum_layer)(0, 0) == 3.0);

    LinearLayer bias_only{mat({{0.3}, {-7}}), mat({{5}})};
    CHECK(linear_forward(mat({{0, 0}}), bias_only)(0, 0) == 5.0);

    LinearLayer identity{Matrix::Identity(2, 2), Matrix::Zero(1, 2)};
    const Matrix x = mat({{1, 0}, {0, 1}});
    CHECK(linear_forward(x, identity) == x);

    SUBCASE("shape mismatch names both shapes") {
        try {
            linear_forward(mat({{1, 2, 3}}), sum_layer);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("[1x3]") != std::string::npos);
            CHECK(msg.find("[2x1]") != std::string::npos);
        }
    }
}

TEST_CASE("leaky_relu") {
    CHECK(leaky_relu(mat({{2}}), 0.01)(0, 0) == 2.0);
    CHECK(leaky_relu(mat({{-1}}), 0.01)(0, 0) == doctest::Approx(-0.01).epsilon(1e-15));
    CHECK(leaky_relu(mat({{0}}), 0.3)(0, 0) == 0.0);
}

TEST_CASE("cbn_forward with pooled statistics and per-row affine") {
    SUBCASE("single class, gamma 2 beta 1") {
        auto bank = bank_with(1, {2}, {1});
        const Labels y{0, 0};
        const Matrix out = cbn_forward(mat({{1}, {3}}), y, bank, true);
        CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-10));
        CHECK(out(1, 0) == doctest::Approx(3.0).epsilon(1e-10));
    }
    SUBCASE("two classes share the batch statistics") {
        auto bank = bank_with(2, {1, 3}, {0, -1});
        const Labels y{0, 1};
        const Matrix out = cbn_forward(mat({{0}, {2}}), y, bank, true);
        CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-10));
        CHECK(out(1, 0) == doctest::Approx(2.0).epsilon(1e-10));
    }
    SUBCASE("standardized input with identity affine is unchanged") {
        auto bank = CbnParamBank::create(3, 2, 1e-12);
        const Matrix x = mat({{1, -1}, {-1, 1}, {1, 1}, {-1, -1}});
        const Labels y{0, 1, 2, 1};
        const Matrix out = cbn_forward(x, y, bank, true);
        CHECK((out - x).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("label out of range") {
        auto bank = CbnParamBank::create(2, 1);
        const Labels y{0, 2};
        CHECK_THROWS_AS(cbn_forward(mat({{0}, {1}}), y, bank, true), LabelError);
    }
    SUBCASE("single row in training mode is rejected") {
        auto bank = CbnParamBank::create(2, 1);
        const Labels y{1};
        CHECK_THROWS_AS(cbn_forward(mat({{0.5}}), y, bank, true), ShapeError);
        CHECK_NOTHROW(cbn_forward(mat({{0.5}}), y, bank, false));
    }
}

TEST_CASE("running statistics follow an exponential moving average") {
    auto bank = CbnParamBank::create(1, 1, 1e-5, 0.1);
    const Labels y{0, 0};
    cbn_forward(mat({{1}, {3}}), y, bank, true);
    CHECK(bank.running_mean(0, 0) == doctest::Approx(0.9 * 0.0 + 0.1 * 2.0));
    CHECK(bank.running_var(0, 0) == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0));

    // Evaluation uses the running statistics and leaves them alone.
    const Matrix before = bank.running_mean;
    const Matrix out = cbn_forward(mat({{0.2}}), Labels{0}, bank, false);
    CHECK(out(0, 0) == doctest::Approx((0.2 - 0.2) / std::sqrt(1.0 + 1e-5)));
    CHECK(bank.running_mean == before);
}

TEST_CASE("batchnorm_forward") {
    auto bn = bank_with(1, {2}, {1});
    const Matrix out = batchnorm_forward(mat({{1}, {3}}), bn, true);
    CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(out(1, 0) == doctest::Approx(3.0).epsilon(1e-10));

    auto multi = CbnParamBank::create(2, 1);
    CHECK_THROWS_AS(batchnorm_forward(mat({{1}, {3}}), multi, true), ConfigError);
}

TEST_CASE("CBN with identical banks equals BN exactly") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = testing::random_matrix(7, 5, rng);
        const Matrix g = testing::random_matrix(1, 5, rng);
        const Matrix b = testing::random_matrix(1, 5, rng);
        auto bn = CbnParamBank::create(1, 5);
        bn.gamma = g;
        bn.beta = b;
        auto cbn = CbnParamBank::create(4, 5);
        cbn.gamma = g.replicate(4, 1);
        cbn.beta = b.replicate(4, 1);
        const Labels y{0, 3, 1, 2, 2, 0, 1};
        CHECK(cbn_forward(x, y, cbn, true) == batchnorm_forward(x, bn, true));
    }
}

TEST_CASE("pre-affine normalized activations are standardized") {
    std::mt19937_64 rng(5);
    auto bank = CbnParamBank::create(3, 6, 1e-12);
    const Matrix x = (testing::random_matrix(64, 6, rng, 3.0).array() + 2.0).matrix();
    const NormCache cache = normalize(x, bank, true);
    const Matrix mean = cache.normalized.colwise().mean();
    const Matrix centered = cache.normalized.rowwise() - mean.row(0);
    const Matrix var = centered.array().square().colwise().mean();
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-6);
    CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("he_init") {
    std::mt19937_64 a(42), b(42);
    CHECK(he_init(10, 4, 3, a) == he_init(10, 4, 3, b));

    std::mt19937_64 rng(7);
    const Matrix w = he_init(100, 100, 100, rng);
    const double n = static_cast<double>(w.size());
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / (n - 1.0);
    CHECK(std::abs(var - 0.02) / 0.02 < 0.10);
    CHECK(std::abs(mean) < 5.0 * std::sqrt(0.02 / n));
    CHECK_THROWS_AS(he_init(0, 1, 1, rng), ConfigError);
}

TEST_CASE("adam_step") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        Matrix p = mat({{1.5, -2.0}});
        const Matrix g = Matrix::Zero(1, 2);
        AdamState s;
        Matrix* ps[] = {&p};
        const Matrix* gs[] = {&g};
        for (int i = 0; i < 3; ++i) adam_step(ps, gs, s, 0.1);
        CHECK(p == mat({{1.5, -2.0}}));
        CHECK(s.step_count == 3);
    }
    SUBCASE("two bias-corrected unit steps") {
        Matrix p = mat({{1.0}});
        const Matrix g = mat({{1.0}});
        AdamState s;
        Matrix* ps[] = {&p};
        const Matrix* gs[] = {&g};
        adam_step(ps, gs, s, 0.1);
        CHECK(std::abs(p(0, 0) - 0.9) < 1e-6);
        adam_step(ps, gs, s, 0.1);
        CHECK(std::abs(p(0, 0) - 0.8) < 1e-6);
    }
    SUBCASE("shape mismatch") {
        Matrix p = mat({{1.0, 2.0}});
        const Matrix g = mat({{1.0}});
        AdamState s;
        Matrix* ps[] = {&p};
        const Matrix* gs[] = {&g};
        CHECK_THROWS_AS(adam_step(ps, gs, s, 0.1), ShapeError);
    }
}

TEST_CASE("mse_loss") {
    CHECK(mse_loss(mat({{0.3, 0.1}}), mat({{0.3, 0.1}})) == 0.0);
    CHECK(mse_loss(mat({{0}, {2}}), mat({{1}, {1}})) == 1.0);
    CHECK(mse_loss(mat({{0, 0}}), mat({{3, 4}})) == 12.5);
    CHECK_THROWS_AS(mse_loss(mat({{0, 0}}), mat({{0}})), ShapeError);
}

TEST_CASE("kl_gaussian") {
    CHECK(kl_gaussian(mat({{0}}), mat({{0}})) == 0.0);
    CHECK(std::abs(kl_gaussian(mat({{1}}), mat({{0}})) - 0.5) < 1e-12);
    CHECK(kl_gaussian(mat({{0}}), mat({{std::log(4.0)}})) == doctest::Approx(0.806852819440055));

    SUBCASE("non-negative, zero only at the prior") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 200; ++i) {
            const Matrix mu = testing::random_matrix(4, 3, rng, 2.0);
            const Matrix lv = testing::random_matrix(4, 3, rng, 3.0);
            CHECK(kl_gaussian(mu, lv) > 0.0);
        }
        CHECK(kl_gaussian(Matrix::Zero(5, 4), Matrix::Zero(5, 4)) == 0.0);
    }
    SUBCASE("logvar is clamped before exponentiation") {
        CHECK(kl_gaussian(mat({{0}}), mat({{1e6}})) == kl_gaussian(mat({{0}}), mat({{10}})));
        CHECK(std::isfinite(kl_gaussian(mat({{0}}), mat({{-1e6}}))));
    }
}

TEST_CASE("tape backward basics") {
    SUBCASE("p squared") {
        Matrix p = mat({{3}});
        Tape t;
        const auto v = t.parameter(p);
        const auto loss = t.sum(t.mul(v, v));
        t.backward(loss);
        CHECK(t.gradient(p)(0, 0) == 6.0);
    }
    SUBCASE("constant loss gives zero gradients") {
        Matrix p = mat({{3, 4}});
        Tape t;
        t.parameter(p);
        const auto loss = t.sum(t.constant(mat({{2.0}})));
        t.backward(loss);
        CHECK(t.gradient(p) == Matrix::Zero(1, 2));
    }
    SUBCASE("unknown parameter") {
        Matrix p = mat({{1}});
        Matrix q = mat({{1}});
        Tape t;
        t.backward(t.sum(t.parameter(p)));
        CHECK_THROWS_AS(t.gradient(q), Error);
    }
    SUBCASE("non-scalar loss") {
        Matrix p = mat({{1, 2}});
        Tape t;
        CHECK_THROWS_AS(t.backward(t.parameter(p)), ShapeError);
    }
}

TEST_CASE("tape forwards agree with the pure kernels") {
    auto net = testing::RandomNet::make(99);
    Tape t;
    auto h = t.linear(t.constant(net.x), t.parameter(net.l1.weights), t.parameter(net.l1.bias));
    CHECK(t.value(h) == linear_forward(net.x, net.l1));
    auto bank_copy = net.cbn;
    auto n = t.norm(h, net.labels, t.parameter(net.cbn.gamma), t.parameter(net.cbn.beta), net.cbn,
                    true);
    CHECK(t.value(n) == cbn_forward(t.value(h), net.labels, bank_copy, true));
    CHECK(t.value(t.leaky_relu(n, 0.2)) == leaky_relu(t.value(n), 0.2));
    CHECK(t.value(t.sigmoid(n)) == sigmoid(t.value(n)));
}

TEST_CASE("gradients match central finite differences on random nets") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        auto net = testing::RandomNet::make(seed);
        for (bool training : {true, false}) {
            const auto r = testing::check_gradients(
                net.parameters(), [&net, training](Tape& t) { return net.build(t, training); });
            INFO("seed " << seed << " training " << training << " worst " << r.worst);
            CHECK(r.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("count_params_flops") {
    ArchDescriptor enc{{{"encoder",
                         {LayerSpec::linear(128, 60), LayerSpec::linear(60, 60),
                          LayerSpec::linear(60, 60), LayerSpec::linear(60, 60),
                          LayerSpec::norm(60, 5), LayerSpec::linear(60, 32),
                          LayerSpec::linear(60, 32)}}}};
    auto r = count_params_flops(enc);
    CHECK(r.total.params == 22744);
    CHECK(r.total.flops == 22560);
    CHECK(r.total.trainable_params == 22744 - 120 + 600);

    ArchDescriptor dec{{{"decoder",
                         {LayerSpec::linear(37, 60), LayerSpec::linear(60, 60),
                          LayerSpec::linear(60, 60), LayerSpec::linear(60, 60),
                          LayerSpec::norm(60, 5), LayerSpec::linear(60, 123)}}}};
    r = count_params_flops(dec);
    CHECK(r.total.params == 20883);
    CHECK(r.total.flops == 20640);

    r = count_params_flops(ArchDescriptor{{{"tiny", {LayerSpec::linear(1, 1)}}}});
    CHECK(r.total.params == 2);
    CHECK(r.total.flops == 1);
}
