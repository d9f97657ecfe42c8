#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wsl/stability.hpp"

using namespace wsl;

TEST_CASE("closed-form rates for Z=2, F=1")
{
    const SystemParams sp(2.0, 1.0);
    CHECK(mu_squared(sp) == Catch::Approx(1.47351987057582055).epsilon(1e-14));
    CHECK(nu_squared(sp) == Catch::Approx(2.45910678730361829).epsilon(1e-14));
    CHECK(threshold_exponent(2.0) == Catch::Approx(1.29184585441072237).epsilon(1e-14));
}

TEST_CASE("rates scale as F^(3/2) and the exponent not at all")
{
    const double charges[] = {1.0, 2.0, 6.0};
    const double fields[] = {1e-5, 0.3, 2.0, 50.0};
    for (double Z : charges) {
        const double mu2_ref = mu_squared(SystemParams(Z, 1.0));
        const double nu2_ref = nu_squared(SystemParams(Z, 1.0));
        for (double F : fields) {
            const SystemParams sp(Z, F);
            CHECK(mu_squared(sp) == Catch::Approx(mu2_ref * std::pow(F, 1.5)).epsilon(1e-12));
            CHECK(nu_squared(sp) == Catch::Approx(nu2_ref * std::pow(F, 1.5)).epsilon(1e-12));
            CHECK(std::sqrt(nu_squared(sp) / mu_squared(sp))
                  == Catch::Approx(threshold_exponent(Z)).epsilon(1e-13));
        }
    }
}

TEST_CASE("exponent table for the first five charges")
{
    // reference values, rounded to three decimals in the published table
    const double alpha_ref[] = {1.351, 1.292, 1.273, 1.263, 1.257};
    const double wannier_ref[] = {1.127, 1.056, 1.036, 1.026, 1.021};
    const std::vector<ExponentRecord> table = exponent_table({1, 2, 3, 4, 5});
    REQUIRE(table.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(table[i].Z == double(i + 1));
        CHECK(std::abs(table[i].alpha - alpha_ref[i]) < 5e-4);
        CHECK(std::abs(table[i].wannier_alpha - wannier_ref[i]) < 5e-4);
    }
}

TEST_CASE("exponent table edge cases")
{
    CHECK(exponent_table({}).empty());
    const std::vector<ExponentRecord> dup = exponent_table({2, 2, 1});
    REQUIRE(dup.size() == 3);
    CHECK(dup[0].Z == 2.0);
    CHECK(dup[1].Z == 2.0);
    CHECK(dup[2].Z == 1.0);
    CHECK(dup[0].alpha == dup[1].alpha);
}

TEST_CASE("exponent decreases with Z toward the large-charge limit")
{
    double prev = threshold_exponent(1.0);
    for (double Z = 2.0; Z <= 40.0; Z += 1.0) {
        const double cur = threshold_exponent(Z);
        REQUIRE(cur < prev);
        prev = cur;
    }
    CHECK(std::abs(threshold_exponent(1e6) - std::sqrt(1.5)) < 1e-3);
    CHECK(threshold_exponent(1e6) > std::sqrt(1.5));
}

TEST_CASE("wannier comparison values stay below the field-present exponent")
{
    for (double Z = 1.0; Z <= 20.0; Z += 0.5)
        CHECK(wannier_exponent(Z) < threshold_exponent(Z));
    CHECK_THROWS_AS(wannier_exponent(0.2), std::domain_error);
}

TEST_CASE("hessian spectrum matches the closed forms")
{
    std::mt19937_64 rng(333);
    std::uniform_real_distribution<double> zdist(1.0, 10.0);
    std::uniform_real_distribution<double> lf(-6.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        const SystemParams sp(zdist(rng), std::pow(10.0, lf(rng)));
        const StabilitySpectrum spec = stability_spectrum(sp);
        REQUIRE(spec.mu2_numeric == Catch::Approx(spec.mu2_closed).epsilon(1e-9));
        REQUIRE(spec.nu2_numeric == Catch::Approx(spec.nu2_closed).epsilon(1e-9));
        const double unit = std::pow(sp.F, 1.5);
        REQUIRE(std::abs(spec.zero_mode) / unit < 1e-10);
        REQUIRE(spec.eigenvalues[3] > 0.0);
        REQUIRE(spec.eigenvalues[4] > 0.0);
        REQUIRE(spec.eigenvalues[5] > 0.0);
    }
}

TEST_CASE("spectrum eigenvectors respect the mirror structure")
{
    const SystemParams sp(2.0, 1.0);
    const StabilitySpectrum spec = stability_spectrum(sp);

    // rotation mode is the normalized rigid rotation about the field axis
    Vec6 rot = rotation_generator(spec.saddle.q);
    rot.normalize();
    CHECK(std::abs(rot.dot(spec.eigenvectors.col(StabilitySpectrum::i_rot)))
          == Catch::Approx(1.0).epsilon(1e-10));

    // escape mode lives in the mirror-symmetric subspace: u2 = (-x, -y, +z) of u1
    const Vec6 ex = spec.eigenvectors.col(StabilitySpectrum::i_mu);
    CHECK(ex[3] == Catch::Approx(-ex[0]).margin(1e-10));
    CHECK(ex[4] == Catch::Approx(-ex[1]).margin(1e-10));
    CHECK(ex[5] == Catch::Approx(ex[2]).margin(1e-10));

    // symmetry-breaking mode is mirror-antisymmetric: u2 = (+x, +y, -z) of u1
    const Vec6 ey = spec.eigenvectors.col(StabilitySpectrum::i_nu);
    CHECK(ey[3] == Catch::Approx(ey[0]).margin(1e-10));
    CHECK(ey[4] == Catch::Approx(ey[1]).margin(1e-10));
    CHECK(ey[5] == Catch::Approx(-ey[2]).margin(1e-10));

    // both in-plane modes have no out-of-plane component
    CHECK(std::abs(ex[1]) < 1e-10);
    CHECK(std::abs(ey[1]) < 1e-10);

    // columns are orthonormal
    const Mat6 gram = spec.eigenvectors.transpose() * spec.eigenvectors;
    CHECK((gram - Mat6::Identity()).norm() < 1e-12);
}
