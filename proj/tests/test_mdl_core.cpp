#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mdlsim/mdl_core.hpp"
#include "mdlsim/rng.hpp"

using namespace mdlsim;

TEST_CASE("snr value converts between db and linear") {
    CHECK(SnrValue::from_db(10.0).linear() == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(SnrValue::from_db(0.0).linear() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(SnrValue::from_linear(100.0).db() == doctest::Approx(20.0).epsilon(1e-12));
    CHECK_THROWS_AS(SnrValue::from_linear(0.0), std::domain_error);
    CHECK_THROWS_AS(SnrValue::from_linear(-1.0), std::domain_error);
    CHECK_THROWS_AS(SnrValue::from_linear(std::nan("")), std::domain_error);
}

TEST_CASE("eigenvalue profile sorts descending and validates") {
    EigenvalueProfile p{0.25, 1.0, 0.5};
    CHECK(p.values()(0) == 1.0);
    CHECK(p.values()(1) == 0.5);
    CHECK(p.values()(2) == 0.25);
    CHECK(p.largest() == 1.0);
    CHECK(p.smallest() == 0.25);
    CHECK_THROWS_AS(EigenvalueProfile(VectorR{}), InvalidProfileError);
    CHECK_THROWS_AS(EigenvalueProfile({1.0, 0.0}), InvalidProfileError);
    CHECK_THROWS_AS(EigenvalueProfile({1.0, -0.5}), InvalidProfileError);
    CHECK_THROWS_AS(EigenvalueProfile({1.0, std::nan("")}), InvalidProfileError);
}

TEST_CASE("peak-to-peak mdl of a profile") {
    CHECK(mdl_db(EigenvalueProfile{1.0, 0.25}).db ==
          doctest::Approx(6.0205999132796239).epsilon(1e-12));
    // equal eigenvalues give exactly zero spread
    CHECK(mdl_db(EigenvalueProfile{1.0, 1.0, 1.0}).db == 0.0);
    CHECK(mdl_db(EigenvalueProfile{2.0, 2.0}).db == 0.0);
}

TEST_CASE("forward map hand values") {
    // 1/(S^2 x) + 2/S + x at S = 10, x = 1: 0.01 + 0.2 + 1
    CHECK(mmse_forward(1.0, 10.0) == doctest::Approx(1.21).epsilon(1e-15));
    // the minimum sits at x = 1/S and equals 4/S
    CHECK(mmse_forward(0.1, 10.0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(correction_floor(10.0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(mmse_forward(1.0, SnrValue::from_linear(10.0)) ==
          doctest::Approx(1.21).epsilon(1e-15));
    CHECK_THROWS_AS(mmse_forward(0.0, 10.0), std::domain_error);
    CHECK_THROWS_AS(mmse_forward(1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(mmse_forward(-1.0, 10.0), std::domain_error);
}

TEST_CASE("forward map is symmetric around its floor") {
    Rng rng(42);
    for (int i = 0; i < 2000; ++i) {
        const double s = std::pow(10.0, rng.uniform(0.0, 5.0));
        const double x = std::pow(10.0, rng.uniform(-6.0, 6.0));
        const double mirror = 1.0 / (s * s * x);
        const double a = mmse_forward(x, s);
        const double b = mmse_forward(mirror, s);
        CHECK(std::abs(a - b) <= 8.0 * std::numeric_limits<double>::epsilon() *
                                     std::max(std::abs(a), std::abs(b)));
    }
}

TEST_CASE("correction hand values") {
    // ((101) + (99)) / 200 with the discriminant factored as m(m - 4/S)
    CHECK(correct_eigenvalue(1.21, 10.0) == doctest::Approx(1.0).epsilon(1e-15));
    // zero discriminant: the floor maps back to exactly 1/S
    CHECK(correct_eigenvalue(0.4, 10.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(correct_eigenvalue(1.21, SnrValue::from_linear(10.0)) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(correct_eigenvalue(0.39, 10.0), NoiseDominatedBin);
    try {
        correct_eigenvalue(0.39, 10.0);
    } catch (const NoiseDominatedBin& e) {
        CHECK(e.deficit() == doctest::Approx(0.01).epsilon(1e-9));
    }
}

TEST_CASE("correction returns the upper branch") {
    Rng rng(7);
    for (int i = 0; i < 5000; ++i) {
        const double s = std::pow(10.0, rng.uniform(0.0, 4.0));
        const double m = 4.0 / s * std::pow(10.0, rng.uniform(1e-3, 5.0));
        CHECK(correct_eigenvalue(m, s) >= 1.0 / s * (1.0 - 1e-12));
    }
    // inputs below 1/S come back as their mirror image above 1/S
    const double s = 100.0;
    const double x = 1e-4;  // far below 1/S = 0.01
    const double mirror = 1.0 / (s * s * x);
    CHECK(correct_eigenvalue(mmse_forward(x, s), s) ==
          doctest::Approx(mirror).epsilon(1e-9));
}

TEST_CASE("round trip is exact to 1e-9 above the floor") {
    Rng rng(3);
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double s = std::pow(10.0, rng.uniform(0.0, 6.0));
        // keep x·S log-uniform in [1.001, 1e6]: at the floor the forward
        // derivative vanishes and the inversion loses digits by design
        const double x = std::pow(10.0, rng.uniform(std::log10(1.001), 6.0)) / s;
        const double back = correct_eigenvalue(mmse_forward(x, s), s);
        worst = std::max(worst, std::abs(back - x) / x);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("profile correction applies policies") {
    const SnrValue snr = SnrValue::from_linear(10.0);

    SUBCASE("strict on clean input") {
        const EigenvalueProfile out =
            correct_profile(EigenvalueProfile{1.21, 0.49}, snr, ClampPolicy::Strict);
        REQUIRE(out.size() == 2);
        CHECK(out.values()(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out.values()(1) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("strict propagates the failure") {
        CHECK_THROWS_AS(
            correct_profile(EigenvalueProfile({1.21, 0.39}, 17), snr, ClampPolicy::Strict),
            NoiseDominatedBin);
        try {
            correct_profile(EigenvalueProfile({1.21, 0.39}, 17), snr, ClampPolicy::Strict);
        } catch (const NoiseDominatedBin& e) {
            REQUIRE(e.bin().has_value());
            CHECK(*e.bin() == 17);
        }
    }
    SUBCASE("clamp replaces with 1/snr") {
        int adjusted = -1;
        const EigenvalueProfile out = correct_profile(
            EigenvalueProfile{1.21, 0.39}, snr, ClampPolicy::ClampToFloor, &adjusted);
        REQUIRE(out.size() == 2);
        CHECK(out.values()(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out.values()(1) == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(adjusted == 1);
    }
    SUBCASE("skip drops the failing entries") {
        int adjusted = -1;
        const EigenvalueProfile out = correct_profile(
            EigenvalueProfile{1.21, 0.39}, snr, ClampPolicy::SkipBin, &adjusted);
        REQUIRE(out.size() == 1);
        CHECK(out.values()(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(adjusted == 1);
        CHECK_THROWS_AS(
            correct_profile(EigenvalueProfile{0.39, 0.38}, snr, ClampPolicy::SkipBin),
            NoiseDominatedBin);
    }
}

TEST_CASE("osnr to snr at the reference bandwidth") {
    // 12.5 GHz reference over a 25 GBd symbol rate costs 10·log10(2)
    CHECK(osnr_to_snr(40.1, 25e9).db() == doctest::Approx(37.0897).epsilon(1e-5));
    CHECK(osnr_to_snr(38.4, 25e9).db() == doctest::Approx(35.3897).epsilon(1e-5));
    // equal bandwidths change nothing
    CHECK(osnr_to_snr(20.0, 12.5e9).db() == doctest::Approx(20.0).epsilon(1e-12));
    CHECK_THROWS_AS(osnr_to_snr(20.0, 0.0), std::domain_error);
}

TEST_CASE("estimation error is reference minus estimate") {
    CHECK(estimation_error(MdlValue{6.0}, MdlValue{3.9}) ==
          doctest::Approx(2.1).epsilon(1e-12));
    CHECK(estimation_error(MdlValue{6.0}, MdlValue{6.5}) ==
          doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("forward map in single precision") {
    // templated on the scalar: float evaluation stays close to double
    const float m = mmse_forward(1.0f, 10.0f);
    CHECK(m == doctest::Approx(1.21).epsilon(1e-6));
    CHECK(correct_eigenvalue(m, 10.0f) == doctest::Approx(1.0).epsilon(1e-5));
}
