#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "keybuf/channels.hpp"
#include "keybuf/key_buffer.hpp"
#include "keybuf/random.hpp"
#include "keybuf/wiretap_code.hpp"

namespace keybuf {

// Transport used for the keyed minislots 2..M+1 of each slot.
struct ChannelCodeSpec {
    enum class Kind { IdealBitPipe, Repetition, Hamming74 };
    Kind kind = Kind::IdealBitPipe;
    double rate_c = 1.0; // IdealBitPipe: error-free bits per channel use
    int repeat = 3;      // Repetition factor

    double rate() const;
    std::int64_t payload_bits(int n) const; // bits carried by one minislot
};

struct SchemeConfig {
    int n = 16;          // minislot length in channel uses
    int M = 3;           // keyed minislots per slot
    int N1 = 1;          // secrecy window in slots
    std::int64_t restart_period = 0; // 0 = never restart
    ChannelCodeSpec channel_code;
    double Rs = 0.25;
    double Rr = 0.5;
    std::optional<std::int64_t> key_cap_bits; // per-slot key draw cap (M bar)
    std::optional<std::int64_t> buffer_capacity_bits;
    CodeStructure structure = CodeStructure::RandomBinning;
    // Pins the wiretap code draw across sessions; defaults to a value derived
    // from the session seed.
    std::optional<std::uint64_t> code_seed;
    // The planner wants payload-per-minislot divisible by the message size
    // (the integer C/Rs assumption); set this to floor instead of reject.
    bool allow_fractional_ratio = false;

    int secrecy_bits() const; // ks = round(n * Rs)
    void validate() const;
};

struct SchemeState {
    std::int64_t slot = 1; // global index, 1-based
    std::int64_t ramp = 1; // planning counter, returns to 1 after a restart
    std::int64_t buffer_level = 0; // B_k at the beginning of the slot
};

struct SlotPlan {
    std::int64_t slot = 1;
    std::int64_t ramp = 1;
    int wiretap_messages = 1;
    std::int64_t keyed_messages = 0;
    std::int64_t key_bits_needed = 0;
    bool restart = false; // next slot starts a fresh ramp
};

// Slot k carries 1 wiretap-coded message plus min(ramp-1, (C/Rs) M, floor(
// min(B_k, key cap)/ks) keyed messages.
SlotPlan plan_slot(const SchemeConfig& cfg, const SchemeState& state);

bool restart_due(const SchemeConfig& cfg, std::int64_t slot);

// Union bound on P(slot-k message error) from component error rates:
// k*eps + (k-1)*delta.
double error_bound(std::int64_t k, double eps_n, double delta_n);

struct BufferSizing {
    std::int64_t min_bits = 0; // C * M * N1 * n
    double fill_slots = 0.0;   // C * M * N1 / Rs
};

// Buffer size needed before every key drawn in slot k can predate slot k-N1,
// and the slot count after which the ramp has stored that much.
BufferSizing min_buffer_for_window(const SchemeConfig& cfg);

struct SlotRecord {
    std::int64_t slot = 0;
    std::int64_t ramp = 0;
    double rate = 0.0;               // delivered_bits / (n (M+1))
    std::int64_t delivered_bits = 0; // message bits transmitted this slot
    int errors = 0;                  // messages decoded wrong this slot
    std::int64_t level_start = 0;    // B_k
    std::int64_t pushed = 0;         // bits offered to the buffer (incl. dropped)
    std::int64_t taken = 0;
    std::int64_t dropped = 0;
    std::int64_t oldest_origin = -1; // head origin after the slot, -1 if empty
    bool wiretap_error = false;
    int keyed_errors = 0;
    bool digest_match = true;        // tx vs rx buffer digests at slot end
    // Largest origin tag among key bits drawn this slot; INT64_MIN when none.
    std::int64_t max_taken_origin = INT64_MIN;
};

struct SessionReport {
    std::vector<SlotRecord> slots;
    std::int64_t total_delivered_bits = 0;
    double long_run_rate = 0.0;
    std::int64_t wiretap_error_slots = 0;
    std::int64_t keyed_error_slots = 0;
    std::int64_t slots_with_errors = 0;
};

// One transmitter/receiver pair, stepped a slot at a time. Deterministic given
// the seed. The ideal-pipe constructor models both minislot kinds as error-free
// transport at their nominal rates; the channel constructor runs a real
// binning code and channel code over the given discrete channel.
class SchemeSession {
public:
    SchemeSession(const SchemeConfig& cfg, std::uint64_t seed);
    SchemeSession(const SchemeConfig& cfg, const WiretapChannel& ch, std::uint64_t seed);

    SlotRecord step();
    SlotPlan next_plan() const;

    std::int64_t slot() const { return state_.slot; }
    std::int64_t ramp() const { return state_.ramp; }
    const KeyBuffer& tx_buffer() const { return tx_buf_; }
    const KeyBuffer& rx_buffer() const { return rx_buf_; }
    const BinningCode* code() const { return code_ ? &*code_ : nullptr; }

    // Test hook: corrupts the first key bit the receiver draws next, modelling
    // a stale decoding error already sitting in its buffer.
    void inject_key_fault_once() { pending_key_fault_ = true; }

private:
    SchemeConfig cfg_;
    std::optional<WiretapChannel> channel_;
    std::optional<BinningCode> code_;
    SchemeState state_;
    KeyBuffer tx_buf_;
    KeyBuffer rx_buf_;
    Rng rng_;
    bool pending_key_fault_ = false;

    std::vector<std::uint8_t> encode_keyed_payload(std::span<const std::uint8_t> cipher,
                                                   std::int64_t minislots) const;
    std::vector<std::uint8_t> decode_keyed_payload(std::span<const int> received,
                                                   std::int64_t cipher_bits) const;
};

SessionReport run_session(const SchemeConfig& cfg, std::int64_t slots, std::uint64_t seed);
SessionReport run_session(const SchemeConfig& cfg, const WiretapChannel& ch,
                          std::int64_t slots, std::uint64_t seed);

} // namespace keybuf
