#include "keybuf/scheme.hpp"

#include <algorithm>
#include <cmath>

#include "keybuf/errors.hpp"

namespace keybuf {

namespace {

// Hamming(7,4), positions 1..7 with parity bits at 1, 2, 4; the syndrome is
// the 1-based index of a single flipped position.
std::uint8_t h74_encode(std::uint8_t data) {
    const int d1 = data & 1, d2 = (data >> 1) & 1, d3 = (data >> 2) & 1, d4 = (data >> 3) & 1;
    const int p1 = d1 ^ d2 ^ d4;
    const int p2 = d1 ^ d3 ^ d4;
    const int p3 = d2 ^ d3 ^ d4;
    return static_cast<std::uint8_t>(p1 | (p2 << 1) | (d1 << 2) | (p3 << 3) |
                                     (d2 << 4) | (d3 << 5) | (d4 << 6));
}

std::uint8_t h74_decode(std::uint8_t word) {
    auto bit = [&](int pos) { return (word >> (pos - 1)) & 1; };
    const int s1 = bit(1) ^ bit(3) ^ bit(5) ^ bit(7);
    const int s2 = bit(2) ^ bit(3) ^ bit(6) ^ bit(7);
    const int s3 = bit(4) ^ bit(5) ^ bit(6) ^ bit(7);
    const int syndrome = s1 | (s2 << 1) | (s3 << 2);
    if (syndrome != 0) word = static_cast<std::uint8_t>(word ^ (1u << (syndrome - 1)));
    auto b = [&](int pos) { return (word >> (pos - 1)) & 1; };
    return static_cast<std::uint8_t>(b(3) | (b(5) << 1) | (b(6) << 2) | (b(7) << 3));
}

void index_to_bits(std::uint64_t v, int bits, std::vector<std::uint8_t>& out) {
    for (int i = 0; i < bits; ++i) out.push_back(static_cast<std::uint8_t>((v >> i) & 1u));
}

} // namespace

double ChannelCodeSpec::rate() const {
    switch (kind) {
        case Kind::IdealBitPipe: return rate_c;
        case Kind::Repetition: return 1.0 / repeat;
        case Kind::Hamming74: return 4.0 / 7.0;
    }
    return 0.0;
}

std::int64_t ChannelCodeSpec::payload_bits(int n) const {
    switch (kind) {
        case Kind::IdealBitPipe: return static_cast<std::int64_t>(std::floor(n * rate_c + 1e-9));
        case Kind::Repetition: return n / repeat;
        case Kind::Hamming74: return 4 * (n / 7);
    }
    return 0;
}

int SchemeConfig::secrecy_bits() const {
    return static_cast<int>(std::llround(n * Rs));
}

void SchemeConfig::validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (M < 0) throw ConfigError("M must be >= 0");
    if (N1 < 0) throw ConfigError("N1 must be >= 0");
    if (restart_period < 0) throw ConfigError("restart_period must be >= 0");
    if (!(Rs > 0.0)) throw ConfigError("Rs must be positive");
    if (secrecy_bits() < 1) throw ConfigError("n*Rs rounds to zero message bits");
    if (channel_code.kind == ChannelCodeSpec::Kind::Repetition) {
        if (channel_code.repeat < 1) throw ConfigError("repetition factor must be >= 1");
        if (n % channel_code.repeat != 0) throw ConfigError("n must be divisible by the repetition factor");
    }
    if (channel_code.kind == ChannelCodeSpec::Kind::Hamming74 && n % 7 != 0) {
        throw ConfigError("Hamming(7,4) needs n divisible by 7");
    }
    if (channel_code.kind == ChannelCodeSpec::Kind::IdealBitPipe && !(channel_code.rate_c > 0.0)) {
        throw ConfigError("ideal pipe rate must be positive");
    }
    const std::int64_t payload = channel_code.payload_bits(n);
    if (M > 0 && payload < 1) throw ConfigError("minislot payload is empty");
    if (M > 0 && payload % secrecy_bits() != 0 && !allow_fractional_ratio) {
        throw ConfigError("C/Rs is not an integer (payload per minislot not divisible by "
                          "message size); set allow_fractional_ratio to floor it");
    }
    if (key_cap_bits && *key_cap_bits < 0) throw ConfigError("key cap must be >= 0");
    if (buffer_capacity_bits && *buffer_capacity_bits <= 0) throw ConfigError("buffer capacity must be positive");
}

SlotPlan plan_slot(const SchemeConfig& cfg, const SchemeState& state) {
    SlotPlan plan;
    plan.slot = state.slot;
    plan.ramp = state.ramp;
    plan.wiretap_messages = 1;
    const int ks = cfg.secrecy_bits();
    const std::int64_t per_mini = cfg.M > 0 ? cfg.channel_code.payload_bits(cfg.n) / ks : 0;
    std::int64_t avail_bits = state.buffer_level;
    if (cfg.key_cap_bits) avail_bits = std::min(avail_bits, *cfg.key_cap_bits);
    plan.keyed_messages = std::min({state.ramp - 1, cfg.M * per_mini, avail_bits / ks});
    plan.key_bits_needed = plan.keyed_messages * ks;
    plan.restart = restart_due(cfg, state.slot);
    return plan;
}

bool restart_due(const SchemeConfig& cfg, std::int64_t slot) {
    return cfg.restart_period > 0 && slot % cfg.restart_period == 0;
}

double error_bound(std::int64_t k, double eps_n, double delta_n) {
    return static_cast<double>(k) * eps_n + static_cast<double>(k - 1) * delta_n;
}

BufferSizing min_buffer_for_window(const SchemeConfig& cfg) {
    const double c = cfg.channel_code.rate();
    BufferSizing sizing;
    sizing.min_bits = static_cast<std::int64_t>(std::ceil(c * cfg.M * cfg.N1 * cfg.n - 1e-9));
    sizing.fill_slots = c * cfg.M * cfg.N1 / cfg.Rs;
    return sizing;
}

SchemeSession::SchemeSession(const SchemeConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), tx_buf_(cfg.buffer_capacity_bits), rx_buf_(cfg.buffer_capacity_bits), rng_(seed) {
    cfg_.validate();
}

SchemeSession::SchemeSession(const SchemeConfig& cfg, const WiretapChannel& ch, std::uint64_t seed)
    : cfg_(cfg), channel_(ch), tx_buf_(cfg.buffer_capacity_bits),
      rx_buf_(cfg.buffer_capacity_bits), rng_(seed) {
    cfg_.validate();
    if (!channel_->discrete()) throw ConfigError("scheme sessions need a discrete channel");
    if (cfg_.channel_code.kind == ChannelCodeSpec::Kind::Hamming74 &&
        channel_->kind() != ChannelKind::FlipPair) {
        throw ConfigError("Hamming(7,4) transport is defined over a flip pair");
    }
    // The wiretap code is part of the session contract; derive its draw from
    // the session seed unless the config pins it.
    const std::uint64_t code_seed = cfg_.code_seed.value_or(seed ^ 0x9e3779b97f4a7c15ull);
    code_ = build_binning_code(cfg_.n, cfg_.Rs, cfg_.Rr, cfg_.structure, code_seed);
}

std::vector<std::uint8_t> SchemeSession::encode_keyed_payload(std::span<const std::uint8_t> cipher,
                                                              std::int64_t minislots) const {
    const std::int64_t payload = cfg_.channel_code.payload_bits(cfg_.n);
    std::vector<std::uint8_t> stream(cipher.begin(), cipher.end());
    stream.resize(static_cast<std::size_t>(payload * minislots), 0);
    std::vector<std::uint8_t> tx;
    tx.reserve(static_cast<std::size_t>(cfg_.n * minislots));
    if (cfg_.channel_code.kind == ChannelCodeSpec::Kind::Repetition) {
        for (const std::uint8_t b : stream) {
            for (int r = 0; r < cfg_.channel_code.repeat; ++r) tx.push_back(b);
        }
    } else { // Hamming74
        for (std::size_t i = 0; i < stream.size(); i += 4) {
            std::uint8_t d = 0;
            for (int j = 0; j < 4; ++j) d |= static_cast<std::uint8_t>((stream[i + j] & 1u) << j);
            const std::uint8_t cw = h74_encode(d);
            for (int j = 0; j < 7; ++j) tx.push_back((cw >> j) & 1u);
        }
    }
    return tx;
}

std::vector<std::uint8_t> SchemeSession::decode_keyed_payload(std::span<const int> received,
                                                              std::int64_t cipher_bits) const {
    std::vector<std::uint8_t> stream;
    if (cfg_.channel_code.kind == ChannelCodeSpec::Kind::Repetition) {
        const int r = cfg_.channel_code.repeat;
        for (std::size_t i = 0; i < received.size(); i += static_cast<std::size_t>(r)) {
            int votes[2] = {0, 0};
            for (int j = 0; j < r; ++j) {
                const int sym = received[i + static_cast<std::size_t>(j)];
                if (sym == 0 || sym == 1) ++votes[sym];
            }
            stream.push_back(votes[1] > votes[0] ? 1 : 0);
        }
    } else { // Hamming74 over a flip pair: symbols are bits
        for (std::size_t i = 0; i < received.size(); i += 7) {
            std::uint8_t word = 0;
            for (int j = 0; j < 7; ++j) {
                word |= static_cast<std::uint8_t>((received[i + static_cast<std::size_t>(j)] & 1) << j);
            }
            const std::uint8_t d = h74_decode(word);
            for (int j = 0; j < 4; ++j) stream.push_back((d >> j) & 1u);
        }
    }
    stream.resize(static_cast<std::size_t>(cipher_bits));
    return stream;
}

SlotRecord SchemeSession::step() {
    const int ks = cfg_.secrecy_bits();
    state_.buffer_level = tx_buf_.level();
    const SlotPlan plan = plan_slot(cfg_, state_);

    SlotRecord rec;
    rec.slot = state_.slot;
    rec.ramp = state_.ramp;
    rec.level_start = state_.buffer_level;

    // Fresh source messages for this slot.
    const std::uint64_t w = uniform_below(rng_, 1ull << ks);
    std::vector<std::uint8_t> wiretap_bits;
    index_to_bits(w, ks, wiretap_bits);
    std::vector<std::uint8_t> keyed_plain;
    keyed_plain.reserve(static_cast<std::size_t>(plan.key_bits_needed));
    for (std::int64_t i = 0; i < plan.key_bits_needed; ++i) {
        keyed_plain.push_back(static_cast<std::uint8_t>(uniform_bit(rng_)));
    }

    // Keys are drawn at the beginning of the slot, oldest first, on both sides.
    std::vector<std::uint8_t> key_tx, key_rx;
    std::vector<std::int64_t> origins_tx, origins_rx;
    tx_buf_.take(plan.key_bits_needed, key_tx, origins_tx);
    rx_buf_.take(plan.key_bits_needed, key_rx, origins_rx);
    if (pending_key_fault_ && !key_rx.empty()) {
        key_rx[0] ^= 1u;
        pending_key_fault_ = false;
    }
    for (const std::int64_t o : origins_tx) rec.max_taken_origin = std::max(rec.max_taken_origin, o);
    rec.taken = plan.key_bits_needed;

    // Minislot 1: wiretap-coded message.
    std::uint64_t w_hat = w;
    if (channel_) {
        const std::vector<int> x = wiretap_encode(*code_, w, rng_);
        std::vector<int> y, z;
        channel_->transmit(x, rng_, y, z);
        w_hat = wiretap_decode(*code_, *channel_, y);
    }
    rec.wiretap_error = (w_hat != w);
    std::vector<std::uint8_t> wiretap_bits_hat;
    index_to_bits(w_hat, ks, wiretap_bits_hat);

    // Minislots 2..M+1: one-time-pad then the channel code.
    std::vector<std::uint8_t> cipher(keyed_plain.size());
    for (std::size_t i = 0; i < cipher.size(); ++i) cipher[i] = keyed_plain[i] ^ key_tx[i];
    std::vector<std::uint8_t> cipher_hat = cipher;
    if (channel_ && cfg_.channel_code.kind != ChannelCodeSpec::Kind::IdealBitPipe && !cipher.empty()) {
        const std::vector<std::uint8_t> coded = encode_keyed_payload(cipher, cfg_.M);
        std::vector<int> tx_syms(coded.begin(), coded.end());
        std::vector<int> y, z;
        channel_->transmit(tx_syms, rng_, y, z);
        cipher_hat = decode_keyed_payload(y, static_cast<std::int64_t>(cipher.size()));
    }
    std::vector<std::uint8_t> keyed_plain_hat(cipher_hat.size());
    for (std::size_t i = 0; i < cipher_hat.size(); ++i) keyed_plain_hat[i] = cipher_hat[i] ^ key_rx[i];
    for (std::int64_t m = 0; m < plan.keyed_messages; ++m) {
        bool wrong = false;
        for (int b = 0; b < ks; ++b) {
            const std::size_t i = static_cast<std::size_t>(m * ks + b);
            if (keyed_plain_hat[i] != keyed_plain[i]) wrong = true;
        }
        if (wrong) ++rec.keyed_errors;
    }
    rec.errors = (rec.wiretap_error ? 1 : 0) + rec.keyed_errors;

    // All message bits of the slot become future key material, wiretap part
    // first so FIFO order matches transmission order.
    rec.dropped += tx_buf_.push(wiretap_bits, state_.slot);
    rec.dropped += tx_buf_.push(keyed_plain, state_.slot);
    rx_buf_.push(wiretap_bits_hat, state_.slot);
    rx_buf_.push(keyed_plain_hat, state_.slot);
    rec.pushed = static_cast<std::int64_t>(wiretap_bits.size() + keyed_plain.size());

    rec.delivered_bits = static_cast<std::int64_t>(ks) * (1 + plan.keyed_messages);
    rec.rate = static_cast<double>(rec.delivered_bits) /
               (static_cast<double>(cfg_.n) * (cfg_.M + 1));
    rec.oldest_origin = tx_buf_.oldest_origin().value_or(-1);
    rec.digest_match = tx_buf_.digest() == rx_buf_.digest();

    state_.slot += 1;
    state_.ramp = plan.restart ? 1 : state_.ramp + 1;
    return rec;
}

SlotPlan SchemeSession::next_plan() const {
    SchemeState st = state_;
    st.buffer_level = tx_buf_.level();
    return plan_slot(cfg_, st);
}

namespace {

SessionReport collect(SchemeSession& session, std::int64_t slots, const SchemeConfig& cfg) {
    SessionReport report;
    report.slots.reserve(static_cast<std::size_t>(slots));
    for (std::int64_t k = 0; k < slots; ++k) {
        report.slots.push_back(session.step());
        const SlotRecord& rec = report.slots.back();
        report.total_delivered_bits += rec.delivered_bits;
        if (rec.wiretap_error) ++report.wiretap_error_slots;
        if (rec.keyed_errors > 0) ++report.keyed_error_slots;
        if (rec.errors > 0) ++report.slots_with_errors;
    }
    report.long_run_rate = static_cast<double>(report.total_delivered_bits) /
                           (static_cast<double>(slots) * cfg.n * (cfg.M + 1));
    return report;
}

} // namespace

SessionReport run_session(const SchemeConfig& cfg, std::int64_t slots, std::uint64_t seed) {
    if (slots < 1) throw ConfigError("slots must be >= 1");
    SchemeSession session(cfg, seed);
    return collect(session, slots, cfg);
}

SessionReport run_session(const SchemeConfig& cfg, const WiretapChannel& ch,
                          std::int64_t slots, std::uint64_t seed) {
    if (slots < 1) throw ConfigError("slots must be >= 1");
    SchemeSession session(cfg, ch, seed);
    return collect(session, slots, cfg);
}

} // namespace keybuf
