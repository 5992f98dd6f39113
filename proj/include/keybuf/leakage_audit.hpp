#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "keybuf/channels.hpp"
#include "keybuf/random.hpp"
#include "keybuf/wiretap_code.hpp"

namespace keybuf {

// Where a keyed-part key bit comes from. Message sources must be strictly
// earlier slots; fresh sources model key stock from before the scenario.
struct KeySourceRef {
    enum class Kind { WiretapBit, KeyedBit, FreshUniform, FreshBiased };
    Kind kind = Kind::FreshUniform;
    int slot = 0;      // 1-based source slot for message sources
    int bit = 0;       // bit index within the source message
    double bias = 0.5; // P(key bit = 0), FreshBiased only
};

// A small multi-slot run of the protocol, explicit enough to enumerate its
// exact joint law: per slot an optional wiretap-coded message over the shared
// binning code plus up to 4 one-time-padded bits whose keys are named
// explicitly. This forward map is deliberately independent of the scheme
// module: it is the oracle the scheme is audited against.
struct AuditScenario {
    int n1 = 1;
    WiretapChannel channel = WiretapChannel::erasure_pair(0.0, 0.0);
    BinningCode code;
    std::vector<bool> wiretap_present;
    std::vector<int> keyed_bits;
    std::vector<std::vector<KeySourceRef>> key_schedule;

    int slots() const { return static_cast<int>(wiretap_present.size()); }
    void validate() const; // caps: slots <= 4, n <= 8, keyed <= 4, state <= 2^34
};

struct JointLeakageReport {
    double i_joint = 0.0;        // I(window messages ; all Eve outputs)
    double i_wiretap_part = 0.0; // I(window wiretap messages ; all Eve outputs)
    double i_keyed_part = 0.0;   // same for keyed messages, given the wiretap ones
    double single_slot_eps = 0.0; // max_j I(W_j1; Z_j1) / n
    int n = 0;
    int n1 = 0;
    int slots = 0;
};

// Exact joint leakage over the window of the last N1+1 slots, by forward
// enumeration of messages, code randomness, fresh keys and Eve's outputs.
JointLeakageReport joint_leakage_exhaustive(const AuditScenario& scn);

struct BoundCheck {
    bool pass = false;
    double lhs = 0.0;   // i_joint / n
    double rhs = 0.0;   // (2 N1 + 1) * single_slot_eps
    double slack = 0.0; // rhs - lhs
};

// Checks i_joint/n <= (2 N1 + 1) single_slot_eps + 1e-9. Failure is a
// finding, not an error.
BoundCheck leakage_bound_check(const JointLeakageReport& report);

// Exact I(keyed window messages ; Eve's view of the keyed coordinates).
// Zero to machine precision whenever keys are uniform, unreused, and
// independent of Eve's view.
double otp_component_leakage(const AuditScenario& scn);

// Rewrites the key schedule into a violating one: every keyed bit of a slot
// reuses bit 0 of the nearest earlier wiretap message (in-window reuse).
AuditScenario make_negative_control(const AuditScenario& scn);

// One forward sample of the scenario: (window message index, encoded Eve
// output). Feeds the Monte Carlo MI estimator below.
std::pair<std::uint64_t, std::uint64_t> sample_scenario_observation(const AuditScenario& scn,
                                                                    Rng& rng);

struct MiEstimate {
    double mi_bits = 0.0;
    double std_err = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t cells = 0;   // occupied joint histogram cells
    bool underfilled = false;  // cells * 10 > samples
};

// Plug-in mutual information over the empirical joint histogram with
// Miller-Madow bias correction; standard error from batch means.
MiEstimate mc_mi_estimate(const std::function<std::pair<std::uint64_t, std::uint64_t>(Rng&)>& gen,
                          std::uint64_t samples, Rng& rng, int batches = 10);

} // namespace keybuf
