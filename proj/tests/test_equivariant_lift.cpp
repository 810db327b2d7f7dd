#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hmhf/equivariant_lift.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/evolution.hpp"
#include "hmhf/harmonic_map.hpp"
#include "support.hpp"

using namespace hmhf;

namespace {

RadialField gaussian(GridPtr const& g, int m, double t)
{
    return RadialField::from_offsets(g, [&](double r) { return forced_linear_gaussian(m, r, t); });
}

double lifted_error(int m, double dt, std::size_t n)
{
    auto g = build_grid(1e-3, 50.0, n);
    const int steps = static_cast<int>(std::lround(0.5 / dt));
    auto u = unlift(lifted_heat_evolve(lift(gaussian(g, m, 0.0), m), dt, steps));
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
    {
        e = std::max(e, std::abs(u.offset(i) - forced_linear_gaussian(m, (*g)[i], 0.5)));
    }
    return e;
}

}  // namespace

TEST_SUITE("equivariant_lift")
{
    TEST_CASE("lift of r^m exp(-r^2) is the Gaussian")
    {
        auto g = default_grid();
        for (int m = 1; m <= 4; ++m)
        {
            auto v = lift(RadialField::from_offsets(g, [&](double r) { return std::pow(r, m) * std::exp(-r * r); }), m);
            CHECK(v.dimension() == 2 * m + 2);
            for (std::size_t i = 0; i < g->size(); i += 3)
            {
                const double r = (*g)[i];
                CHECK(v.values[i] == doctest::Approx(std::exp(-r * r)).epsilon(1e-14));
            }
        }
    }

    TEST_CASE("round trip and linearity")
    {
        auto g = default_grid();
        const int m = 3;
        auto a = RadialField::from_offsets(g, test::random_smooth(m));
        auto b = RadialField::from_offsets(g, test::random_smooth(m));
        auto back = unlift(lift(a, m));
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            CHECK(back.offset(i) == doctest::Approx(a.offset(i)).epsilon(1e-15));
        }
        auto lin = lift(2.0 * a + (-3.0) * b, m);
        auto la = lift(a, m), lb = lift(b, m);
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            CHECK(lin.values[i] == doctest::Approx(2.0 * la.values[i] - 3.0 * lb.values[i]).epsilon(1e-13));
        }
    }

    TEST_CASE("0.1 h lifts to 0.2 / (1 + r^4)")
    {
        auto g = default_grid();
        auto v = lift(RadialField::from_offsets(g, [](double r) { return 0.1 * eval_h({2, 1.0}, r); }), 2);
        for (double r : {1e-3, 0.5, 1.0, 2.0, 30.0})
        {
            const std::size_t i = g->cell_index(r);
            const double ri = (*g)[i];
            CHECK(std::abs(v.values[i] - 0.2 / (1 + std::pow(ri, 4))) < 1e-12);
        }
    }

    TEST_CASE("E1 data cannot be lifted")
    {
        CHECK_THROWS_AS(lift(sample_Q(default_grid(), {2, 1.0}), 2), PreconditionError);
    }

    TEST_CASE("commutation residual: second order, exact on r^m, zero on zero")
    {
        const int m = 2;
        auto res = [&](std::size_t n) {
            auto g = build_grid(1e-3, 50.0, n);
            return commutation_residual(gaussian(g, m, 0.0), m);
        };
        const double e1 = res(512), e2 = res(1024), e3 = res(2048);
        CHECK(e1 / e2 >= 3.5);
        CHECK(e2 / e3 >= 3.5);

        auto g = build_grid(1e-2, 1e2, 512);
        auto p = RadialField::from_offsets(g, [&](double r) { return 0.3 * std::pow(r, m); });
        // scaled by the size of the individual terms (~ r^{m-2})
        CHECK(commutation_residual(p, m, 0.1, 10.0) < 1e-10);
        CHECK(commutation_residual(RadialField::zeros(g), m) == 0.0);
    }

    TEST_CASE("norm identity against the closed form")
    {
        // m=2: p = 4, d = 6, int_0^inf r^5 e^{-4 r^2} dr = Gamma(3) / (2 4^3) = 1/64
        auto g = default_grid();
        auto u = RadialField::from_offsets(g, [](double r) { return r * r * std::exp(-r * r); });
        auto id = norm_identity_check(u, 2);
        CHECK(id.p == 4.0);
        CHECK(id.lhs == doctest::Approx(id.rhs).epsilon(1e-3));
        CHECK(id.rhs == doctest::Approx(std::pow(1.0 / 64, 0.25)).epsilon(1e-3));
        CHECK(id.angular_constant == doctest::Approx(std::pow(std::numbers::pi, 3)));

        auto z = norm_identity_check(RadialField::zeros(g), 2);
        CHECK(z.lhs == 0.0);
        CHECK(z.rhs == 0.0);
        CHECK_THROWS_AS(norm_identity_check(u, 1), PreconditionError);
    }

    TEST_CASE("norm identity ratio is scale invariant")
    {
        auto g = default_grid();
        for (int m : {2, 3})
        {
            for (double lam : {0.5, 2.0})
            {
                auto u = RadialField::from_offsets(g, [&](double r) { return std::pow(lam * r, m) * std::exp(-lam * lam * r * r); });
                auto id = norm_identity_check(u, m);
                CHECK(id.lhs / id.rhs == doctest::Approx(1.0).epsilon(1e-12));
                // u(lam r) / r = lam (u/r)(lam r), so both sides scale as lam^{1 - 2/p}
                auto id1 = norm_identity_check(
                    RadialField::from_offsets(g, [&](double r) { return std::pow(r, m) * std::exp(-r * r); }), m);
                CHECK(id.lhs / id1.lhs == doctest::Approx(std::pow(lam, 1.0 - 2.0 / id.p)).epsilon(1e-6));
            }
        }
    }

    TEST_CASE("sphere areas")
    {
        CHECK(unit_sphere_area(2) == doctest::Approx(2 * std::numbers::pi));
        CHECK(unit_sphere_area(3) == doctest::Approx(4 * std::numbers::pi));
    }

    TEST_CASE("lifted heat flow matches the closed form and halves its error with dt")
    {
        for (int m : {1, 2, 3})
        {
            const double e1 = lifted_error(m, 4e-3, 2048);
            const double e2 = lifted_error(m, 2e-3, 2048);
            CAPTURE(m);
            CHECK(e1 < 5e-3);
            CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
        }
        CHECK_THROWS_AS(lifted_heat_step(lift(gaussian(default_grid(), 2, 0.0), 2), 0.0), ConfigError);
    }

    TEST_CASE("direct and lifted linear evolutions agree within O(dt) + O(h^2)")
    {
        const int m = 2;
        auto g = build_grid(1e-3, 50.0, 2048);
        auto u0 = gaussian(g, m, 0.0);
        StepperConfig c;
        c.dt = 2e-3;
        c.linear_only = true;
        c.cfl_like_safety = 1e9;
        SamplingPolicy sp;
        sp.interval = 0.1;
        auto rec = evolve(u0, m, 0.5, c, sp);
        auto v = lift(u0, m);
        double t = 0.0;
        for (std::size_t k = 1; k < rec.samples.size(); ++k)
        {
            const int steps = static_cast<int>(std::lround((rec.samples[k].t - t) / c.dt));
            v = lifted_heat_evolve(v, c.dt, steps);
            t = rec.samples[k].t;
            auto diff = rec.snapshots[k] - unlift(v);
            CHECK(test::max_abs(diff) < 2e-4);
        }
    }
}
