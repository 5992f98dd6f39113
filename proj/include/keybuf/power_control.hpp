#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "keybuf/channels.hpp"
#include "keybuf/random.hpp"

namespace keybuf {

// Fading law of the (H, G) power-gain pair; H and G are independent for the
// continuous kinds, the discrete kind takes an explicit joint support.
struct FadingDistribution {
    enum class Kind { Discrete, Rayleigh, Deterministic };
    struct Point {
        double h = 0.0;
        double g = 0.0;
        double prob = 0.0;
    };

    Kind kind = Kind::Deterministic;
    std::vector<Point> support; // Discrete
    double mean_h = 1.0;        // Rayleigh: power gains are exponential
    double mean_g = 1.0;
    double det_h = 1.0;         // Deterministic
    double det_g = 1.0;
    int grid = 10000;           // quantization for exact-expectation paths

    void validate() const;
    std::pair<double, double> sample(Rng& rng) const;

    // Support for expectation sums: the discrete support itself, or the
    // equal-probability quantization of the continuous law.
    std::vector<Point> h_support() const;       // marginal over H
    std::vector<Point> joint_support() const;   // product grid for 2-D sums
};

// Water-filling transmit policy P(H) = max(0, 1/lambda - sigma1^2/H).
struct PowerPolicy {
    double water_level = 0.0; // 1/lambda
    double sigma1_sq = 1.0;
    double avg_power = 0.0;   // E[P(H)] over the distribution it was fit to
    // Single-state policies carry their closed form so P(H) = pbar holds
    // exactly in floating point.
    std::optional<std::pair<double, double>> exact_point;

    double power(double h) const {
        if (exact_point && h == exact_point->first) return exact_point->second;
        if (h <= 0.0) return 0.0;
        const double p = water_level - sigma1_sq / h;
        return p > 0.0 ? p : 0.0;
    }
};

// Fits the water level by bisection until E[P(H)] matches pbar to 1e-9
// relative (expectation by exact sum over the discrete or quantized support).
PowerPolicy water_fill(const FadingDistribution& dist, double pbar, double sigma1_sq);

struct InstRates {
    double main = 0.0;   // C(P)  = 1/2 log2(1 + H P / sigma1^2)
    double eve = 0.0;    // Ce(P) = 1/2 log2(1 + G P / sigma2^2)
    double excess = 0.0; // [C - Ce]+
};

InstRates inst_rates(const ChannelState& state, double p, double sigma1_sq, double sigma2_sq);

// E_H[C(P(H))], bits per channel use.
double ergodic_main_rate(const PowerPolicy& policy, const FadingDistribution& dist);

// 1/2 E_{H,G}[log2(1+H P(H)/s1) - log2(1+G P(H)/s2)]+ with H independent of G.
double no_csi_secrecy_rate(const PowerPolicy& policy, const FadingDistribution& dist,
                           double sigma2_sq);

// Quadrature prediction of the slotted scheme's steady rate:
// (M E[C(P(H))] + E[1{H>G} (C-Ce)+]) / (M+1).
double fading_steady_rate(const PowerPolicy& policy, const FadingDistribution& dist,
                          double sigma2_sq, int M);

struct FadingConfig {
    int n = 100;
    int M = 9;
    int N1 = 1;
    double pbar = 1.0;
    double sigma1_sq = 1.0;
    double sigma2_sq = 1.0;
    FadingDistribution dist;
    std::optional<std::int64_t> key_cap_bits;      // M bar
    std::optional<std::int64_t> buffer_capacity_bits;
    std::int64_t prefill_bits = 0;                 // pre-session key stock

    void validate() const;
};

struct FadingSlotRecord {
    std::int64_t slot = 0;
    double h = 0.0;
    double g = 0.0;
    double p = 0.0;              // power spent (0 when nothing is sent)
    double rate = 0.0;
    std::int64_t delivered_bits = 0;
    std::int64_t level_start = 0;
    std::int64_t pushed = 0;
    std::int64_t taken = 0;
    std::int64_t dropped = 0;
    std::int64_t oldest_origin = -1;
    std::int64_t max_taken_origin = INT64_MIN;
    bool wiretap_used = false;
};

struct FadingSessionReport {
    std::vector<FadingSlotRecord> slots;
    std::int64_t total_delivered_bits = 0;
    double long_run_rate = 0.0;
    double avg_power = 0.0;
    std::int64_t first_tx_slot = 0; // 0 if never started
};

// Slot loop of the fading scheme: wait for H > G, then wiretap minislot at
// rate [C-Ce]+ whenever H > G plus keyed minislots at rate C(P(H)), key draw
// min(B, Mbar, floor(n M C)). Bits are accounted at rate level and floored.
FadingSessionReport simulate_fading_session(const FadingConfig& cfg, std::int64_t slots,
                                            Rng& rng);
FadingSessionReport simulate_fading_session(const FadingConfig& cfg, std::int64_t slots,
                                            std::uint64_t seed);

} // namespace keybuf
