#include "keybuf/wiretap_code.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "keybuf/errors.hpp"

namespace keybuf {

namespace {

int parity32(std::uint32_t v) { return std::popcount(v) & 1; }

// Rank over GF(2) of the given rows (each a bitmask).
int gf2_rank(std::vector<std::uint32_t> rows) {
    int rank = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::uint32_t row = rows[i];
        if (row == 0) continue;
        const int pivot = std::countr_zero(row);
        for (std::size_t j = 0; j < rows.size(); ++j) {
            if (j != i && ((rows[j] >> pivot) & 1u)) rows[j] ^= row;
        }
        ++rank;
    }
    return rank;
}

double wilson_low(double phat, double nt, double z) {
    if (phat == 0.0) return 0.0;
    const double denom = 1.0 + z * z / nt;
    const double center = phat + z * z / (2.0 * nt);
    const double half = z * std::sqrt(phat * (1.0 - phat) / nt + z * z / (4.0 * nt * nt));
    return std::max(0.0, (center - half) / denom);
}

double wilson_high(double phat, double nt, double z) {
    const double denom = 1.0 + z * z / nt;
    const double center = phat + z * z / (2.0 * nt);
    const double half = z * std::sqrt(phat * (1.0 - phat) / nt + z * z / (4.0 * nt * nt));
    return std::min(1.0, (center + half) / denom);
}

constexpr double kZ95 = 1.959963984540054;

} // namespace

std::uint64_t BinningCode::codebook_size() const {
    return structure_ == CodeStructure::RandomBinning ? codebook_.size()
                                                      : (1ull << n_);
}

std::uint32_t BinningCode::codeword(std::uint64_t index) const {
    return structure_ == CodeStructure::RandomBinning ? codebook_[index]
                                                      : static_cast<std::uint32_t>(index);
}

std::uint64_t BinningCode::bin_of_index(std::uint64_t index) const {
    return structure_ == CodeStructure::RandomBinning ? (index >> kr_)
                                                      : syndrome(static_cast<std::uint32_t>(index));
}

std::uint64_t BinningCode::syndrome(std::uint32_t word) const {
    std::uint64_t s = 0;
    for (int j = 0; j < ks_; ++j) {
        s |= static_cast<std::uint64_t>(parity32(parity_[j] & word)) << j;
    }
    return s;
}

void BinningCode::prepare_coset_solver() {
    // Reduced row echelon form, tracking the row transform in bits n.. of the
    // work words: work = (U | R) with R = U * H.
    std::vector<std::uint64_t> work(static_cast<std::size_t>(ks_));
    for (int i = 0; i < ks_; ++i) {
        work[i] = parity_[i] | (1ull << (n_ + i));
    }
    const std::uint64_t row_mask = (1ull << n_) - 1;
    std::vector<int> pivot_of_row;
    int r = 0;
    for (int col = 0; col < n_ && r < ks_; ++col) {
        int sel = -1;
        for (int i = r; i < ks_; ++i) {
            if ((work[i] >> col) & 1u) { sel = i; break; }
        }
        if (sel < 0) continue;
        std::swap(work[r], work[sel]);
        for (int i = 0; i < ks_; ++i) {
            if (i != r && ((work[i] >> col) & 1u)) work[i] ^= work[r];
        }
        pivot_of_row.push_back(col);
        ++r;
    }
    if (r != ks_) throw ConfigError("parity check is not full row rank");

    std::vector<bool> is_pivot(static_cast<std::size_t>(n_), false);
    for (int c : pivot_of_row) is_pivot[static_cast<std::size_t>(c)] = true;

    syndrome_unit_solution_.assign(static_cast<std::size_t>(ks_), 0);
    for (int b = 0; b < ks_; ++b) {
        std::uint32_t x = 0;
        for (int j = 0; j < ks_; ++j) {
            if ((work[j] >> (n_ + b)) & 1u) x |= 1u << pivot_of_row[j];
        }
        syndrome_unit_solution_[b] = x;
    }
    kernel_basis_.clear();
    for (int f = 0; f < n_; ++f) {
        if (is_pivot[static_cast<std::size_t>(f)]) continue;
        std::uint32_t v = 1u << f;
        for (int j = 0; j < ks_; ++j) {
            if ((work[j] >> f) & 1u) v |= 1u << pivot_of_row[j];
        }
        kernel_basis_.push_back(v & static_cast<std::uint32_t>(row_mask));
    }
}

std::uint32_t BinningCode::member(std::uint64_t w, std::uint64_t v) const {
    if (structure_ == CodeStructure::RandomBinning) {
        return codebook_[(w << kr_) + v];
    }
    std::uint32_t x = 0;
    for (int b = 0; b < ks_; ++b) {
        if ((w >> b) & 1u) x ^= syndrome_unit_solution_[b];
    }
    for (std::size_t i = 0; i < kernel_basis_.size(); ++i) {
        if ((v >> i) & 1u) x ^= kernel_basis_[i];
    }
    return x;
}

std::uint32_t BinningCode::encode_packed(std::uint64_t w, Rng& rng) const {
    if (w >= num_messages()) throw ConfigError("wiretap_encode: message out of range");
    return member(w, uniform_below(rng, bin_size()));
}

BinningCode build_binning_code(int n, double Rs, double Rr, CodeStructure structure, Rng& rng) {
    if (n < 1 || n > 16) throw ConfigError("blocklength n must be in [1,16] for auditable codes");
    if (Rs + Rr > 1.0 + 1e-12) throw ConfigError("rate overflow: Rs + Rr > 1 for binary input");
    const int ks = static_cast<int>(std::llround(n * Rs));
    int kr = static_cast<int>(std::llround(n * Rr));
    if (ks < 1) throw ConfigError("Rs too small: no secrecy bits at this blocklength");
    if (structure == CodeStructure::LinearCoset) {
        kr = n - ks; // encoding is uniform over the whole coset
    }
    if (ks + kr > n) throw ConfigError("rate overflow: ks + kr > n");

    BinningCode code;
    code.n_ = n;
    code.ks_ = ks;
    code.kr_ = kr;
    code.structure_ = structure;
    const std::uint32_t word_mask = static_cast<std::uint32_t>((1ull << n) - 1);
    if (structure == CodeStructure::RandomBinning) {
        // Uniform draw without replacement: duplicate codewords would make the
        // bins fail to partition the codebook and break maximum-likelihood
        // decoding on clean channels.
        code.codebook_.resize(1ull << (ks + kr));
        std::vector<bool> used(1ull << n, false);
        for (auto& cw : code.codebook_) {
            std::uint32_t w;
            do {
                w = static_cast<std::uint32_t>(rng()) & word_mask;
            } while (used[w]);
            used[w] = true;
            cw = w;
        }
    } else {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100) {
                throw BudgetError("parity check not full row rank after 100 redraws");
            }
            std::vector<std::uint32_t> rows(static_cast<std::size_t>(ks));
            for (auto& row : rows) row = static_cast<std::uint32_t>(rng()) & word_mask;
            if (gf2_rank(rows) != ks) continue;
            code.parity_ = std::move(rows);
            break;
        }
        code.prepare_coset_solver();
    }
    return code;
}

BinningCode build_binning_code(int n, double Rs, double Rr, CodeStructure structure,
                               std::uint64_t seed) {
    Rng rng(seed);
    BinningCode code = build_binning_code(n, Rs, Rr, structure, rng);
    code.build_seed = seed;
    return code;
}

BinningCode code_from_parts(int n, int ks, int kr, CodeStructure structure,
                            std::vector<std::uint32_t> words, std::uint64_t seed) {
    if (n < 1 || n > 16) throw ConfigError("blocklength n must be in [1,16]");
    if (ks < 1 || ks + kr > n) throw ConfigError("invalid ks/kr");
    BinningCode code;
    code.n_ = n;
    code.ks_ = ks;
    code.kr_ = kr;
    code.structure_ = structure;
    code.build_seed = seed;
    if (structure == CodeStructure::RandomBinning) {
        if (words.size() != (1ull << (ks + kr))) throw ConfigError("codebook size mismatch");
        code.codebook_ = std::move(words);
    } else {
        if (kr != n - ks) throw ConfigError("linear coset requires kr = n - ks");
        if (words.size() != static_cast<std::size_t>(ks)) throw ConfigError("parity row count mismatch");
        code.parity_ = std::move(words);
        code.prepare_coset_solver();
    }
    return code;
}

std::vector<int> wiretap_encode(const BinningCode& code, std::uint64_t w, Rng& rng) {
    const std::uint32_t x = code.encode_packed(w, rng);
    std::vector<int> out(static_cast<std::size_t>(code.n()));
    for (int i = 0; i < code.n(); ++i) out[static_cast<std::size_t>(i)] = (x >> i) & 1u;
    return out;
}

std::uint64_t wiretap_decode(const BinningCode& code, const WiretapChannel& ch,
                             std::span<const int> y) {
    if (!ch.discrete()) throw ConfigError("wiretap_decode: discrete channel required");
    if (static_cast<int>(y.size()) != code.n()) throw ConfigError("wiretap_decode: length mismatch");
    double lut[2][3];
    for (int x = 0; x < 2; ++x) {
        for (int s = 0; s < ch.bob_size(); ++s) lut[x][s] = ch.bob_marginal(x, s);
    }
    for (const int s : y) {
        if (s < 0 || s >= ch.bob_size()) throw ConfigError("wiretap_decode: symbol outside alphabet");
    }
    double best = -1.0;
    std::uint64_t best_bin = 0;
    const std::uint64_t count = code.codebook_size();
    for (std::uint64_t idx = 0; idx < count; ++idx) {
        const std::uint32_t cw = code.codeword(idx);
        double p = 1.0;
        for (int i = 0; i < code.n(); ++i) {
            p *= lut[(cw >> i) & 1u][y[static_cast<std::size_t>(i)]];
            if (p == 0.0) break;
        }
        if (p > best) {
            best = p;
            best_bin = code.bin_of_index(idx);
        }
    }
    return best_bin;
}

namespace {

void check_leakage_budget(const BinningCode& code, const WiretapChannel& ch) {
    const double states = code.n() * std::log2(static_cast<double>(ch.eve_size())) +
                          std::log2(static_cast<double>(code.codebook_size()));
    if (states > 30.0) {
        std::ostringstream os;
        os << "exact_leakage: enumeration of 2^" << states << " states exceeds the 2^30 budget";
        throw BudgetError(os.str());
    }
}

// Erasure pair: Eve's output is (erasure pattern, surviving input symbols) and
// the pattern is independent of the codeword, so
//   I(W; Z^n) = sum over visible masks P(vis) * I(W; X & vis).
double erasure_leakage(const BinningCode& code, double eps2) {
    const int n = code.n();
    const int ks = code.secrecy_bits();
    const std::uint64_t rows = code.codebook_size();
    const double row_weight = 1.0 / static_cast<double>(rows);
    const double pw = 1.0 / static_cast<double>(code.num_messages());

    std::vector<double> cell(static_cast<std::size_t>(1) << (n + ks), 0.0);
    std::vector<double> px(static_cast<std::size_t>(1) << n, 0.0);
    std::vector<std::uint32_t> touched_cells, touched_px;
    touched_cells.reserve(rows);
    touched_px.reserve(rows);

    std::vector<double> pow_keep(static_cast<std::size_t>(n + 1)), pow_erase(static_cast<std::size_t>(n + 1));
    pow_keep[0] = pow_erase[0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        pow_keep[static_cast<std::size_t>(i)] = pow_keep[static_cast<std::size_t>(i - 1)] * (1.0 - eps2);
        pow_erase[static_cast<std::size_t>(i)] = pow_erase[static_cast<std::size_t>(i - 1)] * eps2;
    }

    double total = 0.0;
    const std::uint32_t nvis = 1u << n;
    for (std::uint32_t vis = 0; vis < nvis; ++vis) {
        const int kept = std::popcount(vis);
        const double pvis = pow_keep[static_cast<std::size_t>(kept)] *
                            pow_erase[static_cast<std::size_t>(n - kept)];
        touched_cells.clear();
        touched_px.clear();
        for (std::uint64_t idx = 0; idx < rows; ++idx) {
            const std::uint32_t xv = code.codeword(idx) & vis;
            const std::uint64_t w = code.bin_of_index(idx);
            const std::uint32_t ci = (xv << ks) | static_cast<std::uint32_t>(w);
            if (cell[ci] == 0.0) touched_cells.push_back(ci);
            cell[ci] += row_weight;
            if (px[xv] == 0.0) touched_px.push_back(xv);
            px[xv] += row_weight;
        }
        double mi = 0.0;
        for (const std::uint32_t ci : touched_cells) {
            const double p = cell[ci];
            const std::uint32_t xv = ci >> ks;
            mi += p * std::log2(p / (pw * px[xv]));
            cell[ci] = 0.0;
        }
        for (const std::uint32_t xv : touched_px) px[xv] = 0.0;
        total += pvis * mi;
    }
    return total;
}

// Flip pair: direct enumeration of Eve's binary outputs.
double flip_leakage(const BinningCode& code, double p2) {
    const int n = code.n();
    const std::uint64_t rows = code.codebook_size();
    const std::uint64_t bins = code.num_messages();
    const double row_weight = 1.0 / static_cast<double>(rows);
    const double pw = 1.0 / static_cast<double>(bins);

    std::vector<double> pt(static_cast<std::size_t>(n + 1));
    for (int d = 0; d <= n; ++d) {
        pt[static_cast<std::size_t>(d)] = std::pow(p2, d) * std::pow(1.0 - p2, n - d);
    }
    std::vector<double> joint(bins);
    double total = 0.0;
    const std::uint32_t nz = 1u << n;
    for (std::uint32_t z = 0; z < nz; ++z) {
        std::fill(joint.begin(), joint.end(), 0.0);
        for (std::uint64_t idx = 0; idx < rows; ++idx) {
            const int d = std::popcount(code.codeword(idx) ^ z);
            joint[code.bin_of_index(idx)] += row_weight * pt[static_cast<std::size_t>(d)];
        }
        double pz = 0.0;
        for (const double j : joint) pz += j;
        if (pz == 0.0) continue;
        for (const double j : joint) {
            if (j > 0.0) total += j * std::log2(j / (pw * pz));
        }
    }
    return total;
}

} // namespace

LeakageReport exact_leakage(const BinningCode& code, const WiretapChannel& ch) {
    if (!ch.discrete()) throw ConfigError("exact_leakage: discrete channel required");
    check_leakage_budget(code, ch);
    LeakageReport rep;
    rep.method = LeakageMethod::Exhaustive;
    rep.mutual_info_bits = ch.kind() == ChannelKind::ErasurePair
                               ? erasure_leakage(code, ch.eps2())
                               : flip_leakage(code, ch.p2());
    // Clamp enumeration noise at the boundary of the valid range.
    rep.mutual_info_bits = std::clamp(rep.mutual_info_bits, 0.0,
                                      static_cast<double>(code.secrecy_bits()));
    rep.per_symbol = rep.mutual_info_bits / code.n();
    return rep;
}

LeakageReport rank_leakage(const BinningCode& code, const WiretapChannel& ch) {
    if (code.structure() != CodeStructure::LinearCoset || ch.kind() != ChannelKind::ErasurePair) {
        throw ConfigError("rank_leakage: linear coset over an erasure pair required");
    }
    const int n = code.n();
    const double eps2 = ch.eps2();
    std::vector<double> pow_keep(static_cast<std::size_t>(n + 1)), pow_erase(static_cast<std::size_t>(n + 1));
    pow_keep[0] = pow_erase[0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        pow_keep[static_cast<std::size_t>(i)] = pow_keep[static_cast<std::size_t>(i - 1)] * (1.0 - eps2);
        pow_erase[static_cast<std::size_t>(i)] = pow_erase[static_cast<std::size_t>(i - 1)] * eps2;
    }
    std::vector<std::uint32_t> masked(code.parity_rows().size());
    double expected_rank = 0.0;
    const std::uint32_t ne = 1u << n;
    for (std::uint32_t erased = 0; erased < ne; ++erased) {
        const int ecount = std::popcount(erased);
        const double pe = pow_erase[static_cast<std::size_t>(ecount)] *
                          pow_keep[static_cast<std::size_t>(n - ecount)];
        for (std::size_t j = 0; j < masked.size(); ++j) {
            masked[j] = code.parity_rows()[j] & erased;
        }
        expected_rank += pe * gf2_rank(masked);
    }
    LeakageReport rep;
    rep.method = LeakageMethod::RankBased;
    rep.mutual_info_bits = code.secrecy_bits() - expected_rank;
    rep.per_symbol = rep.mutual_info_bits / n;
    return rep;
}

ErrorEstimate error_probability(const BinningCode& code, const WiretapChannel& ch,
                                std::uint64_t trials, Rng& rng) {
    if (trials < 1) throw ConfigError("error_probability: trials >= 1 required");
    std::vector<int> x, y, z;
    std::uint64_t errors = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const std::uint64_t w = uniform_below(rng, code.num_messages());
        x = wiretap_encode(code, w, rng);
        ch.transmit(x, rng, y, z);
        if (wiretap_decode(code, ch, y) != w) ++errors;
    }
    ErrorEstimate est;
    est.trials = trials;
    est.errors = errors;
    est.p = static_cast<double>(errors) / static_cast<double>(trials);
    est.ci_low = wilson_low(est.p, static_cast<double>(trials), kZ95);
    est.ci_high = wilson_high(est.p, static_cast<double>(trials), kZ95);
    return est;
}

double exact_error_probability(const BinningCode& code, const WiretapChannel& ch) {
    if (!ch.discrete()) throw ConfigError("exact_error_probability: discrete channel required");
    const int n = code.n();
    const std::uint64_t rows = code.codebook_size();
    const double row_weight = 1.0 / static_cast<double>(rows);

    if (ch.kind() == ChannelKind::ErasurePair) {
        const double eps1 = ch.eps1();
        std::vector<double> pow_keep(static_cast<std::size_t>(n + 1)), pow_erase(static_cast<std::size_t>(n + 1));
        pow_keep[0] = pow_erase[0] = 1.0;
        for (int i = 1; i <= n; ++i) {
            pow_keep[static_cast<std::size_t>(i)] = pow_keep[static_cast<std::size_t>(i - 1)] * (1.0 - eps1);
            pow_erase[static_cast<std::size_t>(i)] = pow_erase[static_cast<std::size_t>(i - 1)] * eps1;
        }
        const std::uint32_t ne = 1u << n;
        if (code.structure() == CodeStructure::LinearCoset) {
            // The lowest-index consistent codeword is y with erased bits set to
            // zero, so the decoded bin is wrong exactly when the syndrome of the
            // erased part of x is nonzero.
            std::vector<std::uint32_t> masked(code.parity_rows().size());
            double err = 0.0;
            for (std::uint32_t erased = 0; erased < ne; ++erased) {
                const int ecount = std::popcount(erased);
                const double pe = pow_erase[static_cast<std::size_t>(ecount)] *
                                  pow_keep[static_cast<std::size_t>(n - ecount)];
                for (std::size_t j = 0; j < masked.size(); ++j) {
                    masked[j] = code.parity_rows()[j] & erased;
                }
                err += pe * (1.0 - std::pow(2.0, -gf2_rank(masked)));
            }
            return err;
        }
        const double states = std::log2(static_cast<double>(ne)) +
                              2.0 * std::log2(static_cast<double>(rows));
        if (states > 30.0) throw BudgetError("exact_error_probability: enumeration exceeds 2^30");
        double err = 0.0;
        for (std::uint32_t erased = 0; erased < ne; ++erased) {
            const std::uint32_t vis = ~erased & ((1u << n) - 1);
            const int ecount = std::popcount(erased);
            const double pe = pow_erase[static_cast<std::size_t>(ecount)] *
                              pow_keep[static_cast<std::size_t>(n - ecount)];
            std::uint64_t wrong = 0;
            for (std::uint64_t r = 0; r < rows; ++r) {
                const std::uint32_t xr = code.codeword(r);
                for (std::uint64_t c = 0; c < rows; ++c) {
                    if (((code.codeword(c) ^ xr) & vis) == 0) {
                        if (code.bin_of_index(c) != code.bin_of_index(r)) ++wrong;
                        break;
                    }
                }
            }
            err += pe * row_weight * static_cast<double>(wrong);
        }
        return err;
    }

    // Flip pair: enumerate Bob outputs, precomputing the decode table.
    const double states = n + std::log2(static_cast<double>(rows));
    if (states > 30.0) throw BudgetError("exact_error_probability: enumeration exceeds 2^30");
    const double p1 = ch.p1();
    std::vector<double> pt(static_cast<std::size_t>(n + 1));
    for (int d = 0; d <= n; ++d) {
        pt[static_cast<std::size_t>(d)] = std::pow(p1, d) * std::pow(1.0 - p1, n - d);
    }
    const std::uint32_t ny = 1u << n;
    std::vector<std::uint64_t> decoded(ny);
    for (std::uint32_t y = 0; y < ny; ++y) {
        int best_d = n + 1;
        std::uint64_t best_bin = 0;
        for (std::uint64_t idx = 0; idx < rows; ++idx) {
            const int d = std::popcount(code.codeword(idx) ^ y);
            if (d < best_d) {
                best_d = d;
                best_bin = code.bin_of_index(idx);
            }
        }
        decoded[y] = best_bin;
    }
    double err = 0.0;
    for (std::uint64_t r = 0; r < rows; ++r) {
        const std::uint32_t xr = code.codeword(r);
        const std::uint64_t wr = code.bin_of_index(r);
        for (std::uint32_t y = 0; y < ny; ++y) {
            if (decoded[y] != wr) {
                err += row_weight * pt[static_cast<std::size_t>(std::popcount(xr ^ y))];
            }
        }
    }
    return err;
}

} // namespace keybuf
