#pragma once

#include <span>
#include <vector>

#include "keybuf/random.hpp"

namespace keybuf {

enum class ChannelKind { ErasurePair, FlipPair, GaussianFading };

// Output symbol used for an erasure in traces. Binary inputs are 0/1.
inline constexpr int kErasureSymbol = 2;

// Fading state for the Gaussian kind: power gains of the two links.
struct ChannelState {
    double h = 1.0; // main (Bob) power gain, >= 0
    double g = 1.0; // eavesdropper (Eve) power gain, >= 0
};

// A degraded wiretap channel pair p(y,z|x). The discrete kinds are built as an
// explicit Markov cascade X -> Y -> Z, so the joint law is well defined and
// both marginals can be enumerated exactly. Immutable after construction.
class WiretapChannel {
public:
    static WiretapChannel erasure_pair(double eps1, double eps2);
    static WiretapChannel flip_pair(double p1, double p2);
    static WiretapChannel gaussian_fading(double sigma1_sq, double sigma2_sq);

    ChannelKind kind() const { return kind_; }
    bool discrete() const { return kind_ != ChannelKind::GaussianFading; }

    int input_size() const { return 2; }
    int bob_size() const { return bob_size_; }
    int eve_size() const { return eve_size_; }

    // Transition probabilities (discrete kinds only).
    double joint(int x, int y, int z) const;        // p(y,z|x)
    double bob_marginal(int x, int y) const;        // p(y|x)
    double eve_marginal(int x, int z) const;        // p(z|x)

    double eps1() const { return a_; }
    double eps2() const { return b_; }
    double p1() const { return a_; }
    double p2() const { return b_; }
    double sigma1_sq() const { return a_; }
    double sigma2_sq() const { return b_; }

    // Sends x through the pair, drawing (y,z) i.i.d. per coordinate from
    // p(y,z|x). Same seed, same output.
    void transmit(std::span<const int> x, Rng& rng,
                  std::vector<int>& y, std::vector<int>& z) const;

    // Gaussian kind: Y = sqrt(H) x + N1, Z = sqrt(G) x + N2.
    void transmit(std::span<const double> x, const ChannelState& state, Rng& rng,
                  std::vector<double>& y, std::vector<double>& z) const;

private:
    WiretapChannel() = default;

    ChannelKind kind_ = ChannelKind::ErasurePair;
    double a_ = 0.0; // eps1 / p1 / sigma1_sq
    double b_ = 0.0; // eps2 / p2 / sigma2_sq
    double cascade_ = 0.0; // extra erasure or flip probability of the Y->Z leg
    int bob_size_ = 0;
    int eve_size_ = 0;
    // p(y,z|x) indexed [x][y][z], sizes 2 x bob_size_ x eve_size_.
    std::vector<double> table_;
};

// Mutual informations of a binary-input discrete pair at input P(X=1) = q.
double mutual_info_bob(const WiretapChannel& ch, double q);
double mutual_info_eve(const WiretapChannel& ch, double q);

// Capacity of the Alice->Bob marginal, bits per channel use.
// Grid search (step 1e-4) over the binary input distribution refined by
// golden-section; rate tolerance well below 1e-6.
double main_capacity(const WiretapChannel& ch);

// max over p(x) of I(X;Y) - I(X;Z), clamped at 0. Discrete kinds only.
double secrecy_capacity(const WiretapChannel& ch);

} // namespace keybuf
