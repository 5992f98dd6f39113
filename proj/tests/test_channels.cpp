#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "keybuf/channels.hpp"
#include "keybuf/errors.hpp"

using namespace keybuf;

namespace {

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double row_sum(const WiretapChannel& ch, int x) {
    double s = 0.0;
    for (int y = 0; y < ch.bob_size(); ++y) {
        for (int z = 0; z < ch.eve_size(); ++z) s += ch.joint(x, y, z);
    }
    return s;
}

} // namespace

TEST_CASE("erasure pair construction and marginals") {
    const auto ch = WiretapChannel::erasure_pair(0.1, 0.5);
    for (int x = 0; x < 2; ++x) CHECK(row_sum(ch, x) == doctest::Approx(1.0).epsilon(1e-12));
    // Eve erasure marginal from the transition table.
    CHECK(ch.eve_marginal(0, kErasureSymbol) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ch.eve_marginal(1, kErasureSymbol) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ch.bob_marginal(0, kErasureSymbol) == doctest::Approx(0.1).epsilon(1e-12));

    const auto same = WiretapChannel::erasure_pair(0.3, 0.3);
    for (int x = 0; x < 2; ++x) {
        for (int s = 0; s < 3; ++s) {
            CHECK(same.eve_marginal(x, s) == doctest::Approx(same.bob_marginal(x, s)).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(WiretapChannel::erasure_pair(0.5, 0.2), ConfigError);
    CHECK_THROWS_AS(WiretapChannel::erasure_pair(-0.1, 0.2), ConfigError);
    CHECK_THROWS_AS(WiretapChannel::erasure_pair(0.2, 1.2), ConfigError);
}

TEST_CASE("flip pair cascade probability") {
    const auto ch = WiretapChannel::flip_pair(0.05, 0.2);
    // q solves p1 * q = p2; 1/6 for (0.05, 0.2). Read it off the joint law.
    const double q = ch.joint(0, 0, 1) / ch.bob_marginal(0, 0);
    CHECK(q == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(ch.eve_marginal(0, 1) == doctest::Approx(0.2).epsilon(1e-12));

    const auto same = WiretapChannel::flip_pair(0.1, 0.1);
    CHECK(same.joint(0, 0, 1) == 0.0);

    CHECK_THROWS_AS(WiretapChannel::flip_pair(0.2, 0.1), ConfigError);
    CHECK_THROWS_AS(WiretapChannel::flip_pair(0.1, 0.6), ConfigError);
}

TEST_CASE("transmit degenerate channels") {
    const std::vector<int> x{0, 1, 1};
    std::vector<int> y, z;
    Rng rng(1);

    WiretapChannel::erasure_pair(0.0, 0.0).transmit(x, rng, y, z);
    CHECK(y == x);
    CHECK(z == x);

    WiretapChannel::erasure_pair(1.0, 1.0).transmit(x, rng, y, z);
    for (const int s : y) CHECK(s == kErasureSymbol);
    for (const int s : z) CHECK(s == kErasureSymbol);
}

TEST_CASE("transmit matches channel parameters (Monte Carlo)") {
    const auto ch = WiretapChannel::flip_pair(0.1, 0.3);
    const int n = 100000;
    std::vector<int> x(n, 0), y, z;
    Rng rng(42);
    ch.transmit(x, rng, y, z);
    int bob_flips = 0, eve_flips = 0;
    for (int i = 0; i < n; ++i) {
        bob_flips += y[i];
        eve_flips += z[i];
    }
    CHECK(std::abs(bob_flips / double(n) - 0.1) < 0.01);
    CHECK(std::abs(eve_flips / double(n) - 0.3) < 0.01);
}

TEST_CASE("transmit is reproducible from the seed") {
    const auto ch = WiretapChannel::erasure_pair(0.2, 0.6);
    std::vector<int> x(64);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<int>(i % 2);
    std::vector<int> y1, z1, y2, z2;
    Rng a(9), b(9);
    ch.transmit(x, a, y1, z1);
    ch.transmit(x, b, y2, z2);
    CHECK(y1 == y2);
    CHECK(z1 == z2);
}

TEST_CASE("input symbol validation") {
    const auto ch = WiretapChannel::erasure_pair(0.2, 0.6);
    std::vector<int> bad{0, 2};
    std::vector<int> y, z;
    Rng rng(1);
    CHECK_THROWS_AS(ch.transmit(bad, rng, y, z), ConfigError);
}

TEST_CASE("capacities of erasure pairs") {
    // Closed forms: C = 1 - eps1, Cs = eps2 - eps1.
    CHECK(std::abs(main_capacity(WiretapChannel::erasure_pair(0.1, 0.5)) - 0.9) < 1e-6);
    CHECK(std::abs(secrecy_capacity(WiretapChannel::erasure_pair(0.1, 0.5)) - 0.4) < 1e-6);
    CHECK(secrecy_capacity(WiretapChannel::erasure_pair(0.3, 0.3)) == 0.0);
    CHECK(main_capacity(WiretapChannel::erasure_pair(1.0, 1.0)) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("capacities of flip pairs") {
    const auto ch = WiretapChannel::flip_pair(0.05, 0.2);
    CHECK(std::abs(main_capacity(ch) - (1.0 - binary_entropy(0.05))) < 1e-6);
    CHECK(std::abs(secrecy_capacity(ch) - (binary_entropy(0.2) - binary_entropy(0.05))) < 1e-6);
}

TEST_CASE("degradedness: I(X;Y) >= I(X;Z) for all inputs") {
    const std::vector<WiretapChannel> chans{
        WiretapChannel::erasure_pair(0.1, 0.5),
        WiretapChannel::erasure_pair(0.0, 0.9),
        WiretapChannel::erasure_pair(0.45, 0.5),
        WiretapChannel::flip_pair(0.05, 0.2),
        WiretapChannel::flip_pair(0.0, 0.5),
        WiretapChannel::flip_pair(0.25, 0.4),
    };
    for (const auto& ch : chans) {
        for (double q = 0.05; q < 1.0; q += 0.05) {
            CHECK(mutual_info_bob(ch, q) >= mutual_info_eve(ch, q) - 1e-12);
        }
        CHECK(secrecy_capacity(ch) <= main_capacity(ch) + 1e-12);
    }
}

TEST_CASE("gaussian fading transmit") {
    const auto ch = WiretapChannel::gaussian_fading(1.0, 4.0);
    CHECK_FALSE(ch.discrete());
    const int n = 50000;
    std::vector<double> x(n, 1.0), y, z;
    Rng rng(5);
    ch.transmit(x, ChannelState{4.0, 1.0}, rng, y, z);
    double my = 0, mz = 0;
    for (int i = 0; i < n; ++i) {
        my += y[i];
        mz += z[i];
    }
    my /= n;
    mz /= n;
    CHECK(std::abs(my - 2.0) < 0.05);  // sqrt(H) x
    CHECK(std::abs(mz - 1.0) < 0.05);  // sqrt(G) x
    double vy = 0, vz = 0;
    for (int i = 0; i < n; ++i) {
        vy += (y[i] - my) * (y[i] - my);
        vz += (z[i] - mz) * (z[i] - mz);
    }
    CHECK(std::abs(vy / n - 1.0) < 0.1);
    CHECK(std::abs(vz / n - 4.0) < 0.3);

    // discrete-only operations refuse the Gaussian kind
    CHECK_THROWS_AS(main_capacity(ch), ConfigError);
    std::vector<int> xi{0, 1};
    std::vector<int> yi, zi;
    CHECK_THROWS_AS(ch.transmit(xi, rng, yi, zi), ConfigError);
}

TEST_CASE("degenerate full-erasure and half-flip parameters") {
    // eps1 = 1 forces eps2 = 1; the cascade division by zero must not occur.
    const auto ch = WiretapChannel::erasure_pair(1.0, 1.0);
    CHECK(ch.joint(0, kErasureSymbol, kErasureSymbol) == doctest::Approx(1.0));
    const auto fp = WiretapChannel::flip_pair(0.5, 0.5);
    CHECK(fp.eve_marginal(0, 1) == doctest::Approx(0.5));
}
