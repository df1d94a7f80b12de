#include <doctest.h>

#include <cmath>
#include <random>

#include "diffconst/objective.hpp"
#include "diffconst/tape.hpp"
#include "support.hpp"

using namespace diffconst;

namespace {

// Two planes of two satellites sharing RAAN and shape, per-satellite MA.
ParamSpec two_plane_spec() {
    ParamSpec spec;
    for (int p = 0; p < 2; ++p) {
        const int raan = spec.add_periodic("plane" + std::to_string(p) + ".raan");
        const auto [rp, dr] = spec.add_shape("plane" + std::to_string(p) + ".shape", 400.0, 600.0, 1500.0);
        for (int s = 0; s < 2; ++s) {
            SatelliteParams sat;
            sat.plane = p;
            sat.raan = ElementSource::from_slot(raan);
            sat.perigee_slot = rp;
            sat.excess_slot = dr;
            sat.inc = ElementSource::fixed(60.0 * kDeg);
            sat.ma = ElementSource::from_slot(spec.add_periodic("sat" + std::to_string(2 * p + s) + ".ma"));
            spec.add_satellite(sat);
        }
    }
    return spec;
}

}  // namespace

TEST_CASE("interval map stays strictly inside its bounds") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = apply_interval(u(rng), 30.0 * kDeg, 90.0 * kDeg);
        CHECK(x > 30.0 * kDeg);
        CHECK(x < 90.0 * kDeg);
    }
    CHECK(apply_interval(0.0, 2.0, 4.0) == 3.0);
    CHECK(apply_interval_derivative(0.0, 2.0, 4.0) == doctest::Approx(0.5));
    CHECK(inverse_interval(apply_interval(1.3, -1.0, 5.0), -1.0, 5.0) == doctest::Approx(1.3).epsilon(1e-12));
    CHECK_THROWS_AS(inverse_interval(5.0, -1.0, 5.0), SpecError);
}

TEST_CASE("perigee/excess map hits the perigee exactly and keeps e >= 0") {
    const ShapeBounds b;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int i = 0; i < 10000; ++i) {
        const double trp = u(rng), tdr = u(rng);
        const auto [a, e] = apply_perigee_excess(trp, tdr, b);
        const double rp = apply_interval(trp, b.rp_min, b.rp_max);
        CHECK(e >= 0.0);
        CHECK(a * (1.0 - e) - kEarthRadius >= b.rp_min);
        CHECK(std::fabs(a * (1.0 - e) - kEarthRadius - rp) < 1e-9);
    }
    const auto [a0, e0] = apply_perigee_excess(0.0, 0.0, b);
    CHECK(a0 == doctest::Approx(7253.137));
    CHECK(e0 == doctest::Approx(750.0 / (2.0 * 7253.137)));
    CHECK(e0 == doctest::Approx(0.0517).epsilon(1e-3));
}

TEST_CASE("unpack shares plane slots across members") {
    const ParamSpec spec = two_plane_spec();
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.slot_count() == 10);
    std::vector<double> theta{0.5, 0.1, -1.0, 1.0, 2.0, 2.5, -0.2, 0.3, 3.0, 4.0};
    const auto els = unpack<double>(spec, theta);
    REQUIRE(els.size() == 4);
    CHECK(els[0].raan == els[1].raan);
    CHECK(els[2].raan == 2.5);
    CHECK(els[0].a == els[1].a);
    CHECK(els[0].ma == 1.0);
    CHECK(els[3].ma == 4.0);
    CHECK(els[1].inc == doctest::Approx(60.0 * kDeg));
    const std::vector<int> counts = spec.member_counts();
    CHECK(counts == std::vector<int>{2, 2, 2, 1, 1, 2, 2, 2, 1, 1});
}

TEST_CASE("plane-averaged gradients divide by the member count") {
    const ParamSpec spec = two_plane_spec();
    const std::vector<double> g{4.0, 2.0, 6.0, 1.0, 1.0, -8.0, 3.0, 5.0, 7.0, 9.0};
    const std::vector<double> avg = plane_average_grads(g, spec);
    CHECK(avg == std::vector<double>{2.0, 1.0, 3.0, 1.0, 1.0, -4.0, 1.5, 2.5, 7.0, 9.0});
    CHECK_THROWS_AS(plane_average_grads(std::vector<double>{1.0}, spec), SpecError);
}

TEST_CASE("spec validation names the offending slot or satellite") {
    ParamSpec unread;
    unread.add_periodic("orphan");
    SatelliteParams s;
    s.ma = ElementSource::fixed(0.0);
    unread.add_satellite(s);
    CHECK_THROWS_WITH_AS(unread.validate(), doctest::Contains("orphan"), SpecError);

    ParamSpec wrong_kind;
    const auto [rp, dr] = wrong_kind.add_shape("x", 400.0, 600.0, 100.0);
    SatelliteParams t;
    t.perigee_slot = rp;
    t.excess_slot = dr;
    t.ma = ElementSource::from_slot(rp);
    wrong_kind.add_satellite(t);
    CHECK_THROWS_AS(wrong_kind.validate(), SpecError);

    ParamSpec inverted;
    inverted.add_interval("i", 1.0, 0.5);
    CHECK_THROWS_AS(inverted.validate(), SpecError);

    ParamSpec underground;
    SatelliteParams u;
    u.a = 6000.0;
    underground.add_satellite(u);
    CHECK_THROWS_AS(underground.validate(), SpecError);

    CHECK_THROWS_AS(ParamSpec{}.validate(), SpecError);
    CHECK(slot_kind_from_string("excess") == SlotKind::excess);
    CHECK_THROWS_AS(slot_kind_from_string("angle"), SpecError);
}

TEST_CASE("loss gradient matches the independent oracle") {
    for (std::uint32_t seed = 100; seed < 104; ++seed) {
        const auto rp = testing::random_problem(seed, 1 + static_cast<int>(seed % 3), 24, 64);
        const LossResult r = loss(rp.problem, rp.theta, true);
        const std::vector<double> ref = testing::oracle_gradient(rp.problem, rp.theta);
        CHECK(testing::worst_relative_error(r.grad, ref) < 1e-4);
        CHECK(r.loss == doctest::Approx(reference_loss<double>(rp.problem, std::span<const double>(rp.theta))).epsilon(1e-11));
    }
}

TEST_CASE("fused gradient equals the full-tape gradient of the reference") {
    const auto rp = testing::random_problem(200, 2, 20, 40);
    ad::Tape tape;
    const auto vars = tape.seed(rp.theta);
    const ad::Var l = reference_loss<ad::Var>(rp.problem, std::span<const ad::Var>(vars));
    const std::vector<double> g_ref = tape.gradient(l);
    const LossResult r = loss(rp.problem, rp.theta, true);
    for (std::size_t i = 0; i < g_ref.size(); ++i) CHECK(r.grad[i] == doctest::Approx(g_ref[i]).epsilon(1e-9));
}

TEST_CASE("loss without gradient returns the same value") {
    const auto rp = testing::random_problem(300, 3, 24, 64);
    const LossResult a = loss(rp.problem, rp.theta, true);
    const LossResult b = loss(rp.problem, rp.theta, false);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
    CHECK(b.grad.empty());
    CHECK(a.grad.size() == rp.theta.size());
}
