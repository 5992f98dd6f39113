#include "keybuf/power_control.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "keybuf/errors.hpp"
#include "keybuf/key_buffer.hpp"

namespace keybuf {

void FadingDistribution::validate() const {
    switch (kind) {
        case Kind::Discrete: {
            if (support.empty()) throw ConfigError("discrete fading law needs support points");
            double total = 0.0;
            for (const Point& pt : support) {
                if (pt.h < 0.0 || pt.g < 0.0) throw ConfigError("gains must be >= 0");
                if (pt.prob < 0.0) throw ConfigError("probabilities must be >= 0");
                total += pt.prob;
            }
            if (std::abs(total - 1.0) > 1e-9) throw ConfigError("support probabilities must sum to 1");
            break;
        }
        case Kind::Rayleigh:
            if (!(mean_h > 0.0) || !(mean_g >= 0.0)) throw ConfigError("Rayleigh means must be positive");
            if (grid < 2) throw ConfigError("quantization grid too small");
            break;
        case Kind::Deterministic:
            if (det_h < 0.0 || det_g < 0.0) throw ConfigError("gains must be >= 0");
            break;
    }
}

std::pair<double, double> FadingDistribution::sample(Rng& rng) const {
    switch (kind) {
        case Kind::Discrete: {
            const double u = uniform01(rng);
            double acc = 0.0;
            for (const Point& pt : support) {
                acc += pt.prob;
                if (u < acc) return {pt.h, pt.g};
            }
            return {support.back().h, support.back().g};
        }
        case Kind::Rayleigh: {
            // Power gains of Rayleigh amplitudes are exponential.
            const double h = -mean_h * std::log1p(-uniform01(rng));
            const double g = -mean_g * std::log1p(-uniform01(rng));
            return {h, g};
        }
        case Kind::Deterministic:
        default:
            return {det_h, det_g};
    }
}

namespace {

// Equal-probability quantization of an exponential law (mid-bin quantiles).
std::vector<double> exponential_grid(double mean, int n) {
    std::vector<double> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = (i + 0.5) / n;
        pts[static_cast<std::size_t>(i)] = -mean * std::log1p(-u);
    }
    return pts;
}

} // namespace

std::vector<FadingDistribution::Point> FadingDistribution::h_support() const {
    switch (kind) {
        case Kind::Discrete: {
            // Collapse the joint support to the H marginal.
            std::vector<Point> pts;
            for (const Point& pt : support) {
                bool merged = false;
                for (Point& q : pts) {
                    if (q.h == pt.h) {
                        q.prob += pt.prob;
                        merged = true;
                        break;
                    }
                }
                if (!merged) pts.push_back(Point{pt.h, 0.0, pt.prob});
            }
            return pts;
        }
        case Kind::Rayleigh: {
            std::vector<Point> pts;
            pts.reserve(static_cast<std::size_t>(grid));
            for (const double h : exponential_grid(mean_h, grid)) {
                pts.push_back(Point{h, 0.0, 1.0 / grid});
            }
            return pts;
        }
        case Kind::Deterministic:
        default:
            return {Point{det_h, 0.0, 1.0}};
    }
}

std::vector<FadingDistribution::Point> FadingDistribution::joint_support() const {
    switch (kind) {
        case Kind::Discrete:
            return support;
        case Kind::Rayleigh: {
            const std::vector<double> hs = exponential_grid(mean_h, grid);
            const std::vector<double> gs = exponential_grid(mean_g, grid);
            std::vector<Point> pts;
            pts.reserve(hs.size() * gs.size());
            const double w = 1.0 / (static_cast<double>(grid) * grid);
            for (const double h : hs) {
                for (const double g : gs) pts.push_back(Point{h, g, w});
            }
            return pts;
        }
        case Kind::Deterministic:
        default:
            return {Point{det_h, det_g, 1.0}};
    }
}

PowerPolicy water_fill(const FadingDistribution& dist, double pbar, double sigma1_sq) {
    dist.validate();
    if (!(pbar > 0.0)) throw ConfigError("water_fill: average power must be positive");
    if (!(sigma1_sq > 0.0)) throw ConfigError("water_fill: sigma1^2 must be positive");

    PowerPolicy policy;
    policy.sigma1_sq = sigma1_sq;

    if (dist.kind == FadingDistribution::Kind::Deterministic) {
        if (!(dist.det_h > 0.0)) throw ConfigError("water_fill: zero main gain");
        policy.water_level = pbar + sigma1_sq / dist.det_h;
        policy.avg_power = pbar;
        policy.exact_point = {dist.det_h, pbar};
        return policy;
    }

    const std::vector<FadingDistribution::Point> pts = dist.h_support();
    double mean_h = 0.0;
    for (const auto& pt : pts) mean_h += pt.prob * pt.h;
    if (!(mean_h > 0.0)) throw ConfigError("water_fill: E[H] must be positive");

    auto avg_power_at = [&](double level) {
        double e = 0.0;
        for (const auto& pt : pts) {
            if (pt.h <= 0.0) continue;
            const double p = level - sigma1_sq / pt.h;
            if (p > 0.0) e += pt.prob * p;
        }
        return e;
    };

    double lo = 0.0, hi = 1.0;
    while (avg_power_at(hi) < pbar) hi *= 2.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (avg_power_at(mid) < pbar) lo = mid; else hi = mid;
    }
    policy.water_level = 0.5 * (lo + hi);
    policy.avg_power = avg_power_at(policy.water_level);
    // 1e-9 relative, with an epsilon floor for budgets near the noise level
    // of the water-level subtraction.
    const double tol = 1e-9 * pbar + 16.0 * DBL_EPSILON * std::max(1.0, policy.water_level);
    if (std::abs(policy.avg_power - pbar) > tol) {
        throw ConfigError("water_fill: bisection failed to meet the power constraint");
    }
    return policy;
}

InstRates inst_rates(const ChannelState& state, double p, double sigma1_sq, double sigma2_sq) {
    if (p < 0.0) throw ConfigError("inst_rates: power must be >= 0");
    InstRates r;
    r.main = 0.5 * std::log2(1.0 + state.h * p / sigma1_sq);
    r.eve = 0.5 * std::log2(1.0 + state.g * p / sigma2_sq);
    r.excess = std::max(0.0, r.main - r.eve);
    return r;
}

double ergodic_main_rate(const PowerPolicy& policy, const FadingDistribution& dist) {
    double rate = 0.0;
    for (const auto& pt : dist.h_support()) {
        const double p = policy.power(pt.h);
        rate += pt.prob * 0.5 * std::log2(1.0 + pt.h * p / policy.sigma1_sq);
    }
    return rate;
}

double no_csi_secrecy_rate(const PowerPolicy& policy, const FadingDistribution& dist,
                           double sigma2_sq) {
    double rate = 0.0;
    for (const auto& pt : dist.joint_support()) {
        const double p = policy.power(pt.h);
        const double diff = 0.5 * (std::log2(1.0 + pt.h * p / policy.sigma1_sq) -
                                   std::log2(1.0 + pt.g * p / sigma2_sq));
        if (diff > 0.0) rate += pt.prob * diff;
    }
    return rate;
}

double fading_steady_rate(const PowerPolicy& policy, const FadingDistribution& dist,
                          double sigma2_sq, int M) {
    double keyed = 0.0;   // E[C(P(H))]
    double wiretap = 0.0; // E[1{H>G} (C-Ce)+]
    for (const auto& pt : dist.joint_support()) {
        const double p = policy.power(pt.h);
        const double c = 0.5 * std::log2(1.0 + pt.h * p / policy.sigma1_sq);
        keyed += pt.prob * c;
        if (pt.h > pt.g) {
            const double ce = 0.5 * std::log2(1.0 + pt.g * p / sigma2_sq);
            if (c > ce) wiretap += pt.prob * (c - ce);
        }
    }
    return (M * keyed + wiretap) / (M + 1);
}

void FadingConfig::validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (M < 0) throw ConfigError("M must be >= 0");
    if (N1 < 0) throw ConfigError("N1 must be >= 0");
    if (!(pbar > 0.0)) throw ConfigError("pbar must be positive");
    if (!(sigma1_sq > 0.0) || !(sigma2_sq > 0.0)) throw ConfigError("noise variances must be positive");
    if (prefill_bits < 0) throw ConfigError("prefill_bits must be >= 0");
    if (key_cap_bits && *key_cap_bits < 0) throw ConfigError("key cap must be >= 0");
    dist.validate();
}

FadingSessionReport simulate_fading_session(const FadingConfig& cfg, std::int64_t slots,
                                            Rng& rng) {
    cfg.validate();
    if (slots < 1) throw ConfigError("slots must be >= 1");

    const PowerPolicy policy = water_fill(cfg.dist, cfg.pbar, cfg.sigma1_sq);
    KeyBuffer buffer(cfg.buffer_capacity_bits);
    if (cfg.prefill_bits > 0) {
        // Stock from before the session; tagged far in the past so the key-age
        // check treats it as arbitrarily old.
        std::vector<std::uint8_t> stock(static_cast<std::size_t>(cfg.prefill_bits));
        for (auto& b : stock) b = static_cast<std::uint8_t>(uniform_bit(rng));
        buffer.push(stock, INT64_MIN / 2);
    }

    FadingSessionReport report;
    report.slots.reserve(static_cast<std::size_t>(slots));
    bool started = cfg.prefill_bits > 0;
    double power_spent = 0.0;
    std::vector<std::uint8_t> key_bits, fresh;
    std::vector<std::int64_t> origins;

    for (std::int64_t k = 1; k <= slots; ++k) {
        FadingSlotRecord rec;
        rec.slot = k;
        rec.level_start = buffer.level();
        const auto [h, g] = cfg.dist.sample(rng);
        rec.h = h;
        rec.g = g;
        const double p = policy.power(h);
        const InstRates rates = inst_rates(ChannelState{h, g}, p, cfg.sigma1_sq, cfg.sigma2_sq);

        std::int64_t wiretap_bits = 0;
        std::int64_t keyed_bits = 0;
        if (!started) {
            // First transmission: a slot with H > G, wiretap coding in all
            // M+1 minislots.
            wiretap_bits = h > g
                ? static_cast<std::int64_t>(std::floor(cfg.n * (cfg.M + 1) * rates.excess))
                : 0;
            if (wiretap_bits > 0) {
                started = true;
                report.first_tx_slot = k;
            } else {
                wiretap_bits = 0;
            }
        } else {
            if (h > g) {
                wiretap_bits = static_cast<std::int64_t>(std::floor(cfg.n * rates.excess));
            }
            std::int64_t draw = static_cast<std::int64_t>(std::floor(cfg.n * cfg.M * rates.main));
            draw = std::min(draw, buffer.level());
            if (cfg.key_cap_bits) draw = std::min(draw, *cfg.key_cap_bits);
            keyed_bits = draw;
        }
        rec.wiretap_used = wiretap_bits > 0;

        if (keyed_bits > 0) {
            buffer.take(keyed_bits, key_bits, origins);
            rec.taken = keyed_bits;
            for (const std::int64_t o : origins) {
                rec.max_taken_origin = std::max(rec.max_taken_origin, o);
            }
        }

        rec.delivered_bits = wiretap_bits + keyed_bits;
        if (rec.delivered_bits > 0) {
            power_spent += p;
            rec.p = p;
            // Everything delivered this slot is future key material.
            fresh.resize(static_cast<std::size_t>(rec.delivered_bits));
            for (auto& b : fresh) b = static_cast<std::uint8_t>(uniform_bit(rng));
            rec.dropped = buffer.push(fresh, k);
            rec.pushed = rec.delivered_bits;
        }
        rec.rate = static_cast<double>(rec.delivered_bits) /
                   (static_cast<double>(cfg.n) * (cfg.M + 1));
        rec.oldest_origin = buffer.oldest_origin().value_or(-1);
        report.total_delivered_bits += rec.delivered_bits;
        report.slots.push_back(rec);
    }
    report.long_run_rate = static_cast<double>(report.total_delivered_bits) /
                           (static_cast<double>(slots) * cfg.n * (cfg.M + 1));
    report.avg_power = power_spent / static_cast<double>(slots);
    return report;
}

FadingSessionReport simulate_fading_session(const FadingConfig& cfg, std::int64_t slots,
                                            std::uint64_t seed) {
    Rng rng(seed);
    return simulate_fading_session(cfg, slots, rng);
}

} // namespace keybuf
