#include <doctest.h>

#include "model_fixtures.hpp"
#include "unloc/gradcheck.hpp"

#include <numbers>

using namespace unloc;

namespace {

double loss_value(const Tensor& pt, const Tensor& pr, const Tensor& gt, const Tensor& gr, double a, double b, LossMode m) {
    return pose_loss(Var(pt), Var(pr), gt, gr, Var(Tensor::scalar(a)), Var(Tensor::scalar(b)), m, 2.0).total.value()[0];
}

Tensor vec3(double x, double y, double z) { return Tensor({3}, {x, y, z}); }

}  // namespace

TEST_CASE("pose loss values") {
    const Tensor zero = vec3(0, 0, 0);
    CHECK(loss_value(zero, zero, zero, zero, 0, 0, LossMode::stable) == 0.0);
    CHECK(loss_value(vec3(1, 0, 0), zero, zero, zero, 0, 0, LossMode::stable) == 1.0);
    CHECK(loss_value(vec3(0.5, -0.25, 0.25), vec3(0.1, 0, 0), zero, zero, 0, 0, LossMode::stable) ==
          doctest::Approx(1.1).epsilon(1e-15));

    SUBCASE("rotation difference wraps") {
        // 0.99 and -0.99 in units of pi are 0.02 apart
        const PoseLoss l = pose_loss(Var(zero), Var(vec3(0.99, 0, 0)), zero, vec3(-0.99, 0, 0), Var(Tensor::scalar(0)),
                                     Var(Tensor::scalar(0)), LossMode::stable, 2.0);
        CHECK(l.rotation_l1 == doctest::Approx(0.02).epsilon(1e-12));
    }
    SUBCASE("stable minimizer is ln c") {
        for (double c : {0.3, 1.0, 4.5}) {
            const Tensor pt = vec3(c, 0, 0);
            auto f = [&](double a) { return loss_value(pt, zero, zero, zero, a, 0, LossMode::stable); };
            double lo = -10, hi = 10;
            const double g = (std::sqrt(5.0) - 1) / 2;
            for (int it = 0; it < 200; ++it) {
                const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
                (f(m1) < f(m2) ? hi : lo) = (f(m1) < f(m2) ? m2 : m1);
            }
            CHECK(0.5 * (lo + hi) == doctest::Approx(std::log(c)).epsilon(1e-4));
        }
    }
    SUBCASE("literal form keeps decreasing in alpha") {
        const Tensor pt = vec3(0.7, -0.2, 0.1), pr = vec3(0.1, 0.05, 0);
        double prev = INFINITY;
        for (double a : {0.0, -10.0, -20.0}) {
            const double l = loss_value(pt, pr, zero, zero, a, 0, LossMode::paper_literal);
            CHECK(l < prev);
            prev = l;
        }
        // the stable form is bounded below by its value at ln c
        const double c = 1.0, floor_value = 1.0 + std::log(c);
        for (double a : {0.0, -10.0, -20.0, 5.0})
            CHECK(loss_value(vec3(c, 0, 0), zero, zero, zero, a, 0, LossMode::stable) >= floor_value - 1e-15);
    }
    SUBCASE("translation invariance") {
        Rng rng(3);
        std::uniform_int_distribution<int> k(-4096, 4096);
        for (int trial = 0; trial < 20; ++trial) {
            const Tensor pt = vec3(k(rng) / 1024.0, k(rng) / 1024.0, k(rng) / 1024.0);
            const Tensor gt = vec3(k(rng) / 1024.0, k(rng) / 1024.0, k(rng) / 1024.0);
            const Tensor shift = vec3(k(rng) / 16.0, k(rng) / 16.0, k(rng) / 16.0);
            Tensor ps = pt, gs = gt;
            ps.data() += shift.data();
            gs.data() += shift.data();
            CHECK(loss_value(pt, zero, gt, zero, 0.3, -0.2, LossMode::stable) ==
                  loss_value(ps, zero, gs, zero, 0.3, -0.2, LossMode::stable));
        }
    }
}

TEST_CASE("pose loss gradients") {
    Rng rng(5);
    const Tensor gt = normal({3}, 1.0, rng), gr = uniform({3}, -0.9, 0.9, rng);
    for (LossMode mode : {LossMode::stable, LossMode::paper_literal}) {
        const auto op = [&](std::span<const Var> v) {
            return pose_loss(v[0], v[1], gt, gr, v[2], v[3], mode, 2.0).total;
        };
        const Tensor pt = normal({3}, 1.0, rng), pr = uniform({3}, -0.5, 0.5, rng);
        CHECK(gradient_check(op, {pt, pr, Tensor::scalar(0.3), Tensor::scalar(-0.4)}).max_rel_error < 1e-6);
    }
}

TEST_CASE("net loss") {
    auto losses = [](std::array<double, 6> v) {
        std::map<SensorId, Var> m;
        for (std::size_t i = 0; i < 6; ++i) m[kAllSensors[i]] = Var(Tensor::scalar(v[i]));
        return m;
    };
    CHECK(net_loss(losses({1, 1, 1, 1, 1, 1})).value()[0] == 6.0);
    CHECK(net_loss(losses({0, 0, 0, 3.25, 0, 0})).value()[0] == 3.25);
    Rng rng(6);
    std::normal_distribution<double> n(0.0, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 6> v{};
        for (double& x : v) x = n(rng);
        double direct = 0.0;
        for (double x : v) direct += x;
        CHECK(net_loss(losses(v)).value()[0] == direct);
    }
    auto partial = losses({1, 1, 1, 1, 1, 1});
    partial.erase(SensorId::R);
    CHECK_THROWS_AS(net_loss(partial), ConfigError);
}

TEST_CASE("net loss gradients through the model") {
    const ModelConfig cfg = fixtures::tiny_config();
    UnlocModel model(cfg, 11);
    Rng rng(7);
    const SensorSample sample = fixtures::random_sample(cfg, rng);
    ParamList ps = model.parameters();

    const auto per = model.sensor_losses(sample, kAllSensors, 3);
    std::map<SensorId, Var> vars;
    for (const auto& [s, l] : per) vars[s] = l.total;
    for (Parameter* p : ps) p->zero_grad();
    Gradients g = backward(net_loss(vars));
    for (Parameter* p : ps) p->accumulate(g);

    for (Modality m : {Modality::point_cloud, Modality::image, Modality::radar}) {
        CHECK(model.balance.alpha(m).grad[0] != 0.0);
        CHECK(model.balance.beta(m).grad[0] != 0.0);
    }

    std::vector<Tensor> joint;
    for (Parameter* p : ps) joint.push_back(p->grad);
    for (Parameter* p : ps) p->zero_grad();
    for (SensorId s : kAllSensors) {
        const auto one = model.sensor_losses(sample, std::vector<SensorId>{s}, 3);
        Gradients gs = backward(one.at(s).total);
        for (Parameter* p : ps) p->accumulate(gs);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i)
        worst = std::max(worst, (ps[i]->grad.data() - joint[i].data()).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-12);
}
