#include "keybuf/channels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "keybuf/errors.hpp"

namespace keybuf {

namespace {

void check_prob(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream os;
        os << name << " = " << p << " is not a probability";
        throw ConfigError(os.str());
    }
}

double xlog2x(double p) {
    return p > 0.0 ? p * std::log2(p) : 0.0;
}

} // namespace

WiretapChannel WiretapChannel::erasure_pair(double eps1, double eps2) {
    check_prob(eps1, "eps1");
    check_prob(eps2, "eps2");
    if (eps2 < eps1) throw ConfigError("degradedness violated: eps2 < eps1");

    WiretapChannel ch;
    ch.kind_ = ChannelKind::ErasurePair;
    ch.a_ = eps1;
    ch.b_ = eps2;
    // Eve = Bob's output passed through a second erasure stage. A symbol that
    // survives the first stage is erased again with probability delta so that
    // Eve's marginal erasure probability is exactly eps2.
    ch.cascade_ = eps1 < 1.0 ? (eps2 - eps1) / (1.0 - eps1) : 0.0;
    ch.bob_size_ = 3;
    ch.eve_size_ = 3;
    ch.table_.assign(2 * 3 * 3, 0.0);
    const double delta = ch.cascade_;
    for (int x = 0; x < 2; ++x) {
        auto at = [&](int y, int z) -> double& { return ch.table_[(x * 3 + y) * 3 + z]; };
        at(x, x) = (1.0 - eps1) * (1.0 - delta);
        at(x, kErasureSymbol) = (1.0 - eps1) * delta;
        at(kErasureSymbol, kErasureSymbol) = eps1;
    }
    return ch;
}

WiretapChannel WiretapChannel::flip_pair(double p1, double p2) {
    check_prob(p1, "p1");
    check_prob(p2, "p2");
    if (p2 > 0.5) throw ConfigError("p2 > 1/2");
    if (p1 > p2) throw ConfigError("degradedness violated: p1 > p2");

    WiretapChannel ch;
    ch.kind_ = ChannelKind::FlipPair;
    ch.a_ = p1;
    ch.b_ = p2;
    // Cascade flip probability q solving p1 * q = p2 (binary convolution).
    ch.cascade_ = p1 < 0.5 ? (p2 - p1) / (1.0 - 2.0 * p1) : 0.0;
    ch.bob_size_ = 2;
    ch.eve_size_ = 2;
    ch.table_.assign(2 * 2 * 2, 0.0);
    const double q = ch.cascade_;
    for (int x = 0; x < 2; ++x) {
        for (int y = 0; y < 2; ++y) {
            const double py = (y == x) ? 1.0 - p1 : p1;
            for (int z = 0; z < 2; ++z) {
                const double pz = (z == y) ? 1.0 - q : q;
                ch.table_[(x * 2 + y) * 2 + z] = py * pz;
            }
        }
    }
    return ch;
}

WiretapChannel WiretapChannel::gaussian_fading(double sigma1_sq, double sigma2_sq) {
    if (!(sigma1_sq > 0.0) || !(sigma2_sq > 0.0)) {
        throw ConfigError("noise variances must be positive");
    }
    WiretapChannel ch;
    ch.kind_ = ChannelKind::GaussianFading;
    ch.a_ = sigma1_sq;
    ch.b_ = sigma2_sq;
    return ch;
}

double WiretapChannel::joint(int x, int y, int z) const {
    if (!discrete()) throw ConfigError("joint(): not a discrete channel");
    return table_[(x * bob_size_ + y) * eve_size_ + z];
}

double WiretapChannel::bob_marginal(int x, int y) const {
    double s = 0.0;
    for (int z = 0; z < eve_size_; ++z) s += joint(x, y, z);
    return s;
}

double WiretapChannel::eve_marginal(int x, int z) const {
    double s = 0.0;
    for (int y = 0; y < bob_size_; ++y) s += joint(x, y, z);
    return s;
}

void WiretapChannel::transmit(std::span<const int> x, Rng& rng,
                              std::vector<int>& y, std::vector<int>& z) const {
    if (!discrete()) throw ConfigError("transmit(int): needs a discrete channel; Gaussian kind takes a ChannelState");
    y.resize(x.size());
    z.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const int xi = x[i];
        if (xi != 0 && xi != 1) throw ConfigError("transmit: input symbol outside {0,1}");
        if (kind_ == ChannelKind::ErasurePair) {
            const bool e1 = uniform01(rng) < a_;
            const bool e2 = uniform01(rng) < cascade_;
            y[i] = e1 ? kErasureSymbol : xi;
            z[i] = (e1 || e2) ? kErasureSymbol : xi;
        } else {
            const bool f1 = uniform01(rng) < a_;
            const bool f2 = uniform01(rng) < cascade_;
            y[i] = xi ^ (f1 ? 1 : 0);
            z[i] = y[i] ^ (f2 ? 1 : 0);
        }
    }
}

void WiretapChannel::transmit(std::span<const double> x, const ChannelState& state, Rng& rng,
                              std::vector<double>& y, std::vector<double>& z) const {
    if (kind_ != ChannelKind::GaussianFading) throw ConfigError("transmit(double): Gaussian kind only");
    if (state.h < 0.0 || state.g < 0.0) throw ConfigError("channel gains must be >= 0");
    y.resize(x.size());
    z.resize(x.size());
    const double sh = std::sqrt(state.h);
    const double sg = std::sqrt(state.g);
    const double s1 = std::sqrt(a_);
    const double s2 = std::sqrt(b_);
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = sh * x[i] + s1 * standard_normal(rng);
        z[i] = sg * x[i] + s2 * standard_normal(rng);
    }
}

namespace {

// I(X; output) for a binary-input channel given by marginal(x, sym).
template <typename Marginal>
double mutual_info(int out_size, double q, Marginal&& marginal) {
    const double px[2] = {1.0 - q, q};
    double mi = 0.0;
    for (int s = 0; s < out_size; ++s) {
        const double p0 = marginal(0, s);
        const double p1 = marginal(1, s);
        const double ps = px[0] * p0 + px[1] * p1;
        mi += xlog2x(px[0] * p0) + xlog2x(px[1] * p1) - xlog2x(ps);
        // subtract p(x) H-terms later via the closed form below
    }
    // mi currently holds sum p(x,s) log2 p(x,s) - sum p(s) log2 p(s)
    // = -H(X,S) + H(S); add H(X) to get I = H(X) + H(S) - H(X,S).
    mi += -(xlog2x(px[0]) + xlog2x(px[1]));
    return mi;
}

template <typename Objective>
double maximize_over_input(Objective&& f) {
    // Coarse grid, then golden-section inside the best bracket.
    const double step = 1e-4;
    double best_q = 0.0;
    double best = f(0.0);
    for (int i = 1; i <= 10000; ++i) {
        const double q = i * step;
        const double v = f(q);
        if (v > best) {
            best = v;
            best_q = q;
        }
    }
    double lo = std::max(0.0, best_q - step);
    double hi = std::min(1.0, best_q + step);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = f(c), fd = f(d);
    while (hi - lo > 1e-12) {
        if (fc > fd) {
            hi = d; d = c; fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c; c = d; fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    return std::max(best, std::max(fc, fd));
}

} // namespace

double mutual_info_bob(const WiretapChannel& ch, double q) {
    return mutual_info(ch.bob_size(), q, [&](int x, int y) { return ch.bob_marginal(x, y); });
}

double mutual_info_eve(const WiretapChannel& ch, double q) {
    return mutual_info(ch.eve_size(), q, [&](int x, int z) { return ch.eve_marginal(x, z); });
}

double main_capacity(const WiretapChannel& ch) {
    if (!ch.discrete()) throw ConfigError("main_capacity: discrete kinds only");
    return maximize_over_input([&](double q) { return mutual_info_bob(ch, q); });
}

double secrecy_capacity(const WiretapChannel& ch) {
    if (!ch.discrete()) throw ConfigError("secrecy_capacity: discrete kinds only");
    const double v = maximize_over_input(
        [&](double q) { return mutual_info_bob(ch, q) - mutual_info_eve(ch, q); });
    return std::max(0.0, v);
}

} // namespace keybuf
