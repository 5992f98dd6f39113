#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "keybuf/channels.hpp"
#include "keybuf/random.hpp"

namespace keybuf {

enum class CodeStructure { RandomBinning, LinearCoset };
enum class LeakageMethod { Exhaustive, RankBased, MonteCarlo };

struct LeakageReport {
    double mutual_info_bits = 0.0; // I(W; Z^n)
    double per_symbol = 0.0;       // mutual_info_bits / n
    LeakageMethod method = LeakageMethod::Exhaustive;
    std::uint64_t samples = 0;     // Monte Carlo only
    double std_err = 0.0;          // Monte Carlo only
};

// Blocklength-n binning code: 2^ks message bins, local randomness picks the
// codeword within the bin. Codewords are bit-packed, coordinate i = bit i.
//
// RandomBinning holds an explicit i.i.d. codebook of 2^(ks+kr) words, bin w
// owning rows [w*2^kr, (w+1)*2^kr). LinearCoset is defined by a full-row-rank
// ks x n parity-check matrix; the message is the syndrome, the codebook is all
// of GF(2)^n and bins are the cosets of the kernel (so kr = n - ks).
class BinningCode {
public:
    int n() const { return n_; }
    int secrecy_bits() const { return ks_; }
    int randomization_bits() const { return kr_; }
    CodeStructure structure() const { return structure_; }

    std::uint64_t num_messages() const { return 1ull << ks_; }
    std::uint64_t codebook_size() const;
    std::uint64_t bin_size() const { return codebook_size() >> ks_; }

    std::uint32_t codeword(std::uint64_t index) const;
    std::uint64_t bin_of_index(std::uint64_t index) const;
    std::uint64_t syndrome(std::uint32_t word) const; // LinearCoset only

    // Deterministic enumeration of bin w: member index v in [0, bin_size).
    std::uint32_t member(std::uint64_t w, std::uint64_t v) const;

    const std::vector<std::uint32_t>& parity_rows() const { return parity_; }
    const std::vector<std::uint32_t>& codebook() const { return codebook_; }

    std::uint32_t encode_packed(std::uint64_t w, Rng& rng) const;

    std::uint64_t build_seed = 0; // provenance of the draw, kept for serialization

private:
    friend BinningCode build_binning_code(int, double, double, CodeStructure, Rng&);
    friend BinningCode code_from_parts(int, int, int, CodeStructure,
                                       std::vector<std::uint32_t>, std::uint64_t);
    void prepare_coset_solver();

    int n_ = 0;
    int ks_ = 0;
    int kr_ = 0;
    CodeStructure structure_ = CodeStructure::RandomBinning;
    std::vector<std::uint32_t> codebook_; // RandomBinning
    std::vector<std::uint32_t> parity_;   // LinearCoset rows
    // Coset solver: particular solutions per syndrome unit vector + kernel basis.
    std::vector<std::uint32_t> syndrome_unit_solution_;
    std::vector<std::uint32_t> kernel_basis_;
};

// Draws a code. Random binning: codewords i.i.d. uniform. Linear coset:
// parity check redrawn until full row rank (at most 100 attempts).
// Requires n <= 16 and Rs + Rr <= 1; ks = round(n Rs), kr = round(n Rr)
// except that a linear coset forces kr = n - ks.
BinningCode build_binning_code(int n, double Rs, double Rr, CodeStructure structure, Rng& rng);
BinningCode build_binning_code(int n, double Rs, double Rr, CodeStructure structure,
                               std::uint64_t seed);

// Reassembles a code from serialized parts (rows or codebook).
BinningCode code_from_parts(int n, int ks, int kr, CodeStructure structure,
                            std::vector<std::uint32_t> words, std::uint64_t seed);

// Uniformly random codeword of bin w.
std::vector<int> wiretap_encode(const BinningCode& code, std::uint64_t w, Rng& rng);

// Maximum-likelihood decoding over the whole codebook against the Bob
// marginal; ties broken by lowest codeword index. Always returns a message.
std::uint64_t wiretap_decode(const BinningCode& code, const WiretapChannel& ch,
                             std::span<const int> y);

// Exact I(W; Z^n) of the code over Eve's marginal channel, by enumeration of
// the joint law. Refuses when codebook x output patterns exceeds 2^30 states.
LeakageReport exact_leakage(const BinningCode& code, const WiretapChannel& ch);

// Equivalent leakage for LinearCoset over ErasurePair via GF(2) ranks of the
// parity check restricted to Eve's erased coordinates:
//   I(W; Z^n) = ks - sum_e P(e) rank(H_e).
LeakageReport rank_leakage(const BinningCode& code, const WiretapChannel& ch);

struct ErrorEstimate {
    double p = 0.0;
    double ci_low = 0.0;  // Wilson 95%
    double ci_high = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t errors = 0;
};

// Monte Carlo P(decoded bin != W) with a Wilson 95% interval.
ErrorEstimate error_probability(const BinningCode& code, const WiretapChannel& ch,
                                std::uint64_t trials, Rng& rng);

// Exact P(decoded bin != W) by enumeration (discrete kinds, budget-checked).
double exact_error_probability(const BinningCode& code, const WiretapChannel& ch);

} // namespace keybuf
