#include "keybuf/leakage_audit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "keybuf/errors.hpp"

namespace keybuf {

namespace {

constexpr double kChainTol = 1e-9;

struct Var {
    enum class Kind { WiretapMsg, BinChoice, KeyedMsg, FreshKey };
    Kind kind;
    int slot = 0;      // 1-based
    int sched_pos = 0; // FreshKey: position in that slot's schedule
    std::uint64_t cardinality = 2;
    double bias = 0.5; // FreshKey: P(value 0)
};

struct Layout {
    std::vector<Var> vars;
    std::vector<int> wmsg_var;   // per slot, -1 when absent
    std::vector<int> bin_var;
    std::vector<int> kmsg_var;
    std::vector<std::vector<int>> fresh_var; // per slot, per schedule position (-1)
    std::vector<int> wiretap_coord_base;     // per slot, -1 when absent
    std::vector<int> keyed_coord_base;
    int total_coords = 0;
    double log2_assignments = 0.0;
};

Layout build_layout(const AuditScenario& scn) {
    Layout lay;
    const int k = scn.slots();
    lay.wmsg_var.assign(static_cast<std::size_t>(k), -1);
    lay.bin_var.assign(static_cast<std::size_t>(k), -1);
    lay.kmsg_var.assign(static_cast<std::size_t>(k), -1);
    lay.fresh_var.resize(static_cast<std::size_t>(k));
    lay.wiretap_coord_base.assign(static_cast<std::size_t>(k), -1);
    lay.keyed_coord_base.assign(static_cast<std::size_t>(k), -1);

    for (int j = 0; j < k; ++j) {
        if (scn.wiretap_present[static_cast<std::size_t>(j)]) {
            lay.wmsg_var[static_cast<std::size_t>(j)] = static_cast<int>(lay.vars.size());
            lay.vars.push_back(Var{Var::Kind::WiretapMsg, j + 1, 0, scn.code.num_messages(), 0.5});
            lay.bin_var[static_cast<std::size_t>(j)] = static_cast<int>(lay.vars.size());
            lay.vars.push_back(Var{Var::Kind::BinChoice, j + 1, 0, scn.code.bin_size(), 0.5});
            lay.wiretap_coord_base[static_cast<std::size_t>(j)] = lay.total_coords;
            lay.total_coords += scn.code.n();
        }
        const int nb = scn.keyed_bits[static_cast<std::size_t>(j)];
        lay.fresh_var[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(nb), -1);
        if (nb > 0) {
            lay.kmsg_var[static_cast<std::size_t>(j)] = static_cast<int>(lay.vars.size());
            lay.vars.push_back(Var{Var::Kind::KeyedMsg, j + 1, 0, 1ull << nb, 0.5});
            for (int b = 0; b < nb; ++b) {
                const KeySourceRef& ref = scn.key_schedule[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)];
                if (ref.kind == KeySourceRef::Kind::FreshUniform ||
                    ref.kind == KeySourceRef::Kind::FreshBiased) {
                    lay.fresh_var[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] =
                        static_cast<int>(lay.vars.size());
                    const double bias =
                        ref.kind == KeySourceRef::Kind::FreshBiased ? ref.bias : 0.5;
                    lay.vars.push_back(Var{Var::Kind::FreshKey, j + 1, b, 2, bias});
                }
            }
            lay.keyed_coord_base[static_cast<std::size_t>(j)] = lay.total_coords;
            lay.total_coords += nb;
        }
    }
    for (const Var& v : lay.vars) {
        lay.log2_assignments += std::log2(static_cast<double>(v.cardinality));
    }
    return lay;
}

// Joint index over a selected set of message variables, mixed-radix.
struct GroupSpec {
    std::vector<int> var_idx;
    std::vector<std::uint64_t> stride;
    std::uint64_t size = 1;

    void add(int var, std::uint64_t cardinality) {
        var_idx.push_back(var);
        stride.push_back(size);
        size *= cardinality;
    }
    std::uint64_t index_of(const std::vector<std::uint64_t>& vals) const {
        std::uint64_t a = 0;
        for (std::size_t i = 0; i < var_idx.size(); ++i) {
            a += vals[static_cast<std::size_t>(var_idx[i])] * stride[i];
        }
        return a;
    }
};

struct Entries {
    std::vector<std::uint64_t> x; // packed channel input over all coords
    std::vector<double> weight;
    std::vector<std::uint32_t> a;
    std::vector<std::uint32_t> c;
    std::uint64_t a_size = 1;
    std::uint64_t c_size = 1;
};

int resolve_key_bit(const AuditScenario& scn, const Layout& lay,
                    const std::vector<std::uint64_t>& vals, int slot0, int pos) {
    const KeySourceRef& ref = scn.key_schedule[static_cast<std::size_t>(slot0)][static_cast<std::size_t>(pos)];
    switch (ref.kind) {
        case KeySourceRef::Kind::WiretapBit: {
            const int var = lay.wmsg_var[static_cast<std::size_t>(ref.slot - 1)];
            return static_cast<int>((vals[static_cast<std::size_t>(var)] >> ref.bit) & 1u);
        }
        case KeySourceRef::Kind::KeyedBit: {
            const int var = lay.kmsg_var[static_cast<std::size_t>(ref.slot - 1)];
            return static_cast<int>((vals[static_cast<std::size_t>(var)] >> ref.bit) & 1u);
        }
        case KeySourceRef::Kind::FreshUniform:
        case KeySourceRef::Kind::FreshBiased: {
            const int var = lay.fresh_var[static_cast<std::size_t>(slot0)][static_cast<std::size_t>(pos)];
            return static_cast<int>(vals[static_cast<std::size_t>(var)] & 1u);
        }
    }
    return 0;
}

std::uint64_t forward_map(const AuditScenario& scn, const Layout& lay,
                          const std::vector<std::uint64_t>& vals) {
    std::uint64_t x = 0;
    for (int j = 0; j < scn.slots(); ++j) {
        if (scn.wiretap_present[static_cast<std::size_t>(j)]) {
            const std::uint64_t w = vals[static_cast<std::size_t>(lay.wmsg_var[static_cast<std::size_t>(j)])];
            const std::uint64_t v = vals[static_cast<std::size_t>(lay.bin_var[static_cast<std::size_t>(j)])];
            const std::uint32_t cw = scn.code.member(w, v);
            x |= static_cast<std::uint64_t>(cw) << lay.wiretap_coord_base[static_cast<std::size_t>(j)];
        }
        const int nb = scn.keyed_bits[static_cast<std::size_t>(j)];
        if (nb > 0) {
            const std::uint64_t m = vals[static_cast<std::size_t>(lay.kmsg_var[static_cast<std::size_t>(j)])];
            for (int b = 0; b < nb; ++b) {
                const int key = resolve_key_bit(scn, lay, vals, j, b);
                const int cipher = static_cast<int>((m >> b) & 1u) ^ key;
                x |= static_cast<std::uint64_t>(cipher)
                     << (lay.keyed_coord_base[static_cast<std::size_t>(j)] + b);
            }
        }
    }
    return x;
}

template <typename Fn>
void for_each_assignment(const Layout& lay, Fn&& fn) {
    std::vector<std::uint64_t> vals(lay.vars.size(), 0);
    while (true) {
        double w = 1.0;
        for (std::size_t i = 0; i < lay.vars.size(); ++i) {
            const Var& v = lay.vars[i];
            if (v.kind == Var::Kind::FreshKey) {
                w *= vals[i] == 0 ? v.bias : 1.0 - v.bias;
            } else {
                w *= 1.0 / static_cast<double>(v.cardinality);
            }
        }
        fn(vals, w);
        std::size_t pos = 0;
        for (; pos < lay.vars.size(); ++pos) {
            if (++vals[pos] < lay.vars[pos].cardinality) break;
            vals[pos] = 0;
        }
        if (pos == lay.vars.size()) break;
        if (lay.vars.empty()) break;
    }
}

Entries enumerate_entries(const AuditScenario& scn, const Layout& lay,
                          const GroupSpec& group_a, const GroupSpec& group_c) {
    Entries e;
    e.a_size = group_a.size;
    e.c_size = group_c.size;
    for_each_assignment(lay, [&](const std::vector<std::uint64_t>& vals, double w) {
        if (w == 0.0) return;
        e.x.push_back(forward_map(scn, lay, vals));
        e.weight.push_back(w);
        e.a.push_back(static_cast<std::uint32_t>(group_a.index_of(vals)));
        e.c.push_back(static_cast<std::uint32_t>(group_c.index_of(vals)));
    });
    return e;
}

// Open-addressing accumulator with O(1) epoch clear, reused across patterns.
class ProbeMap {
public:
    void reset(std::size_t max_entries) {
        std::size_t cap = 16;
        while (cap < 2 * max_entries) cap <<= 1;
        keys_.assign(cap, 0);
        vals_.assign(cap, 0.0);
        stamp_.assign(cap, 0);
        used_.clear();
        used_.reserve(max_entries);
        epoch_ = 1;
        mask_ = cap - 1;
    }
    void clear() {
        ++epoch_;
        used_.clear();
    }
    static std::uint64_t mix(std::uint64_t k) {
        k ^= k >> 33;
        k *= 0xff51afd7ed558ccdull;
        k ^= k >> 33;
        return k;
    }
    void add(std::uint64_t key, double w) {
        std::size_t i = static_cast<std::size_t>(mix(key)) & mask_;
        while (true) {
            if (stamp_[i] != epoch_) {
                stamp_[i] = epoch_;
                keys_[i] = key;
                vals_[i] = w;
                used_.push_back(static_cast<std::uint32_t>(i));
                return;
            }
            if (keys_[i] == key) {
                vals_[i] += w;
                return;
            }
            i = (i + 1) & mask_;
        }
    }
    double get(std::uint64_t key) const {
        std::size_t i = static_cast<std::size_t>(mix(key)) & mask_;
        while (stamp_[i] == epoch_) {
            if (keys_[i] == key) return vals_[i];
            i = (i + 1) & mask_;
        }
        return 0.0;
    }
    const std::vector<std::uint32_t>& used() const { return used_; }
    std::uint64_t key_at(std::uint32_t i) const { return keys_[i]; }
    double val_at(std::uint32_t i) const { return vals_[i]; }

private:
    std::vector<std::uint64_t> keys_;
    std::vector<double> vals_;
    std::vector<std::uint32_t> stamp_;
    std::vector<std::uint32_t> used_;
    std::uint32_t epoch_ = 0;
    std::uint64_t mask_ = 0;
};

// I(A; Eve view of coords in bmask | C) over the enumerated joint law.
double mutual_info_query(const AuditScenario& scn, const Entries& e, std::uint64_t bmask) {
    // Bucket by conditioning value.
    std::vector<std::vector<std::uint32_t>> buckets(e.c_size);
    for (std::uint32_t i = 0; i < e.x.size(); ++i) buckets[e.c[i]].push_back(i);

    const int nb = std::popcount(bmask);
    std::vector<int> bpos;
    for (int i = 0; i < 64; ++i) {
        if ((bmask >> i) & 1u) bpos.push_back(i);
    }

    double total = 0.0;
    std::vector<double> pa(e.a_size);
    ProbeMap cells, px;

    for (const auto& bucket : buckets) {
        if (bucket.empty()) continue;
        double pc = 0.0;
        std::fill(pa.begin(), pa.end(), 0.0);
        for (const std::uint32_t i : bucket) {
            pc += e.weight[i];
            pa[e.a[i]] += e.weight[i];
        }

        double mi_cond = 0.0; // sum over Eve outputs of the conditional MI mass
        if (scn.channel.kind() == ChannelKind::ErasurePair) {
            const double eps2 = scn.channel.eps2();
            std::vector<double> pk(static_cast<std::size_t>(nb + 1)), pe(static_cast<std::size_t>(nb + 1));
            pk[0] = pe[0] = 1.0;
            for (int i = 1; i <= nb; ++i) {
                pk[static_cast<std::size_t>(i)] = pk[static_cast<std::size_t>(i - 1)] * (1.0 - eps2);
                pe[static_cast<std::size_t>(i)] = pe[static_cast<std::size_t>(i - 1)] * eps2;
            }
            cells.reset(bucket.size());
            px.reset(bucket.size());
            std::uint64_t vis = bmask;
            while (true) {
                const int kept = std::popcount(vis);
                const double pvis = pk[static_cast<std::size_t>(kept)] *
                                    pe[static_cast<std::size_t>(nb - kept)];
                cells.clear();
                px.clear();
                for (const std::uint32_t i : bucket) {
                    const std::uint64_t xv = e.x[i] & vis;
                    cells.add(xv * e.a_size + e.a[i], e.weight[i]);
                    px.add(xv, e.weight[i]);
                }
                double mi = 0.0;
                for (const std::uint32_t slot : cells.used()) {
                    const std::uint64_t key = cells.key_at(slot);
                    const double p = cells.val_at(slot);
                    const double pav = pa[key % e.a_size];
                    const double pxv = px.get(key / e.a_size);
                    mi += p * std::log2(p * pc / (pav * pxv));
                }
                mi_cond += pvis * mi;
                if (vis == 0) break;
                vis = (vis - 1) & bmask;
            }
        } else { // FlipPair: enumerate Eve's binary outputs on the masked coords
            const double p2 = scn.channel.p2();
            std::vector<double> pt(static_cast<std::size_t>(nb + 1));
            for (int d = 0; d <= nb; ++d) {
                pt[static_cast<std::size_t>(d)] = std::pow(p2, d) * std::pow(1.0 - p2, nb - d);
            }
            std::vector<std::uint64_t> xb(bucket.size());
            for (std::size_t i = 0; i < bucket.size(); ++i) {
                std::uint64_t v = 0;
                for (std::size_t b = 0; b < bpos.size(); ++b) {
                    v |= ((e.x[bucket[i]] >> bpos[b]) & 1u) << b;
                }
                xb[i] = v;
            }
            std::vector<double> joint(e.a_size);
            const std::uint64_t nz = 1ull << nb;
            for (std::uint64_t z = 0; z < nz; ++z) {
                std::fill(joint.begin(), joint.end(), 0.0);
                for (std::size_t i = 0; i < bucket.size(); ++i) {
                    const int d = std::popcount(xb[i] ^ z);
                    joint[e.a[bucket[i]]] += e.weight[bucket[i]] * pt[static_cast<std::size_t>(d)];
                }
                double pz = 0.0;
                for (const double j : joint) pz += j;
                if (pz <= 0.0) continue;
                for (std::uint64_t av = 0; av < e.a_size; ++av) {
                    const double j = joint[av];
                    if (j > 0.0) mi_cond += j * std::log2(j * pc / (pa[av] * pz));
                }
            }
        }
        // mi_cond already carries the p(.|c) mass times pc; dividing by pc and
        // multiplying back by p(c) cancels.
        total += mi_cond;
    }
    return std::max(0.0, total);
}

GroupSpec window_group(const AuditScenario& scn, const Layout& lay, int lo_slot,
                       bool include_wiretap, bool include_keyed) {
    GroupSpec g;
    for (int j = lo_slot; j <= scn.slots(); ++j) {
        if (include_wiretap && lay.wmsg_var[static_cast<std::size_t>(j - 1)] >= 0) {
            g.add(lay.wmsg_var[static_cast<std::size_t>(j - 1)], scn.code.num_messages());
        }
        if (include_keyed && lay.kmsg_var[static_cast<std::size_t>(j - 1)] >= 0) {
            g.add(lay.kmsg_var[static_cast<std::size_t>(j - 1)],
                  1ull << scn.keyed_bits[static_cast<std::size_t>(j - 1)]);
        }
    }
    return g;
}

std::uint64_t coords_mask(const Layout& lay, int slot_lo, int slot_hi, bool wiretap, bool keyed,
                          const AuditScenario& scn) {
    std::uint64_t mask = 0;
    for (int j = slot_lo; j <= slot_hi; ++j) {
        if (wiretap && lay.wiretap_coord_base[static_cast<std::size_t>(j - 1)] >= 0) {
            const std::uint64_t block = (1ull << scn.code.n()) - 1;
            mask |= block << lay.wiretap_coord_base[static_cast<std::size_t>(j - 1)];
        }
        const int nb = scn.keyed_bits[static_cast<std::size_t>(j - 1)];
        if (keyed && nb > 0) {
            const std::uint64_t block = (1ull << nb) - 1;
            mask |= block << lay.keyed_coord_base[static_cast<std::size_t>(j - 1)];
        }
    }
    return mask;
}

} // namespace

void AuditScenario::validate() const {
    const int k = slots();
    if (k < 1 || k > 4) throw ConfigError("audit scenario: 1..4 slots");
    if (!channel.discrete()) throw ConfigError("audit scenario: discrete channel required");
    if (code.n() > 8) throw ConfigError("audit scenario: code blocklength must be <= 8");
    if (n1 < 0) throw ConfigError("audit scenario: N1 must be >= 0");
    if (keyed_bits.size() != static_cast<std::size_t>(k) ||
        key_schedule.size() != static_cast<std::size_t>(k)) {
        throw ConfigError("audit scenario: per-slot lists must have one entry per slot");
    }
    for (int j = 0; j < k; ++j) {
        const int nb = keyed_bits[static_cast<std::size_t>(j)];
        if (nb < 0 || nb > 4) throw ConfigError("audit scenario: keyed part is 0..4 bits per slot");
        if (key_schedule[static_cast<std::size_t>(j)].size() != static_cast<std::size_t>(nb)) {
            throw ConfigError("audit scenario: key schedule must name one source per keyed bit");
        }
        for (const KeySourceRef& ref : key_schedule[static_cast<std::size_t>(j)]) {
            switch (ref.kind) {
                case KeySourceRef::Kind::WiretapBit:
                    if (ref.slot < 1 || ref.slot > j) {
                        throw ConfigError("audit scenario: key source slot must be earlier");
                    }
                    if (!wiretap_present[static_cast<std::size_t>(ref.slot - 1)]) {
                        throw ConfigError("audit scenario: key source slot has no wiretap part");
                    }
                    if (ref.bit < 0 || ref.bit >= code.secrecy_bits()) {
                        throw ConfigError("audit scenario: key source bit out of range");
                    }
                    break;
                case KeySourceRef::Kind::KeyedBit:
                    if (ref.slot < 1 || ref.slot > j) {
                        throw ConfigError("audit scenario: key source slot must be earlier");
                    }
                    if (ref.bit < 0 || ref.bit >= keyed_bits[static_cast<std::size_t>(ref.slot - 1)]) {
                        throw ConfigError("audit scenario: key source bit out of range");
                    }
                    break;
                case KeySourceRef::Kind::FreshBiased:
                    if (!(ref.bias >= 0.0 && ref.bias <= 1.0)) {
                        throw ConfigError("audit scenario: key bias must be a probability");
                    }
                    break;
                case KeySourceRef::Kind::FreshUniform:
                    break;
            }
        }
    }
    const Layout lay = build_layout(*this);
    const double state = lay.log2_assignments +
                         lay.total_coords * std::log2(static_cast<double>(channel.eve_size()));
    if (state > 34.0) {
        std::ostringstream os;
        os << "audit scenario: joint state space 2^" << state << " exceeds the 2^34 budget";
        throw BudgetError(os.str());
    }
}

JointLeakageReport joint_leakage_exhaustive(const AuditScenario& scn) {
    scn.validate();
    const Layout lay = build_layout(scn);
    const int k = scn.slots();
    const int lo = std::max(1, k - scn.n1);
    const std::uint64_t all_coords = coords_mask(lay, 1, k, true, true, scn);

    JointLeakageReport rep;
    rep.n = scn.code.n();
    rep.n1 = scn.n1;
    rep.slots = k;

    const GroupSpec none;
    {
        const GroupSpec a = window_group(scn, lay, lo, true, true);
        const Entries e = enumerate_entries(scn, lay, a, none);
        rep.i_joint = mutual_info_query(scn, e, all_coords);
    }
    {
        const GroupSpec a = window_group(scn, lay, lo, true, false);
        const Entries e = enumerate_entries(scn, lay, a, none);
        rep.i_wiretap_part = mutual_info_query(scn, e, all_coords);
    }
    {
        const GroupSpec a = window_group(scn, lay, lo, false, true);
        const GroupSpec c = window_group(scn, lay, lo, true, false);
        const Entries e = enumerate_entries(scn, lay, a, c);
        rep.i_keyed_part = mutual_info_query(scn, e, all_coords);
    }
    for (int j = 1; j <= k; ++j) {
        if (lay.wmsg_var[static_cast<std::size_t>(j - 1)] < 0) continue;
        GroupSpec a;
        a.add(lay.wmsg_var[static_cast<std::size_t>(j - 1)], scn.code.num_messages());
        const Entries e = enumerate_entries(scn, lay, a, none);
        const std::uint64_t mask = coords_mask(lay, j, j, true, false, scn);
        const double eps = mutual_info_query(scn, e, mask) / scn.code.n();
        rep.single_slot_eps = std::max(rep.single_slot_eps, eps);
    }
    return rep;
}

BoundCheck leakage_bound_check(const JointLeakageReport& report) {
    BoundCheck chk;
    chk.lhs = report.i_joint / report.n;
    chk.rhs = (2.0 * report.n1 + 1.0) * report.single_slot_eps;
    chk.slack = chk.rhs - chk.lhs;
    chk.pass = chk.lhs <= chk.rhs + kChainTol;
    return chk;
}

double otp_component_leakage(const AuditScenario& scn) {
    scn.validate();
    const Layout lay = build_layout(scn);
    const int k = scn.slots();
    const int lo = std::max(1, k - scn.n1);
    const GroupSpec a = window_group(scn, lay, lo, false, true);
    const GroupSpec none;
    const Entries e = enumerate_entries(scn, lay, a, none);
    const std::uint64_t mask = coords_mask(lay, lo, k, false, true, scn);
    return mutual_info_query(scn, e, mask);
}

AuditScenario make_negative_control(const AuditScenario& scn) {
    AuditScenario bad = scn;
    for (int j = 2; j <= bad.slots(); ++j) {
        const int nb = bad.keyed_bits[static_cast<std::size_t>(j - 1)];
        if (nb == 0) continue;
        int src = -1;
        for (int s = j - 1; s >= 1; --s) {
            if (bad.wiretap_present[static_cast<std::size_t>(s - 1)]) {
                src = s;
                break;
            }
        }
        if (src < 0) throw ConfigError("negative control: no earlier wiretap slot to reuse");
        for (KeySourceRef& ref : bad.key_schedule[static_cast<std::size_t>(j - 1)]) {
            ref = KeySourceRef{KeySourceRef::Kind::WiretapBit, src, 0, 0.5};
        }
    }
    return bad;
}

std::pair<std::uint64_t, std::uint64_t> sample_scenario_observation(const AuditScenario& scn,
                                                                    Rng& rng) {
    const Layout lay = build_layout(scn);
    std::vector<std::uint64_t> vals(lay.vars.size());
    for (std::size_t i = 0; i < lay.vars.size(); ++i) {
        const Var& v = lay.vars[i];
        if (v.kind == Var::Kind::FreshKey) {
            vals[i] = uniform01(rng) < v.bias ? 0 : 1;
        } else {
            vals[i] = uniform_below(rng, v.cardinality);
        }
    }
    const std::uint64_t x = forward_map(scn, lay, vals);

    std::uint64_t z_code = 0;
    std::uint64_t radix = 1;
    for (int i = 0; i < lay.total_coords; ++i) {
        const int xi = static_cast<int>((x >> i) & 1u);
        int zi;
        if (scn.channel.kind() == ChannelKind::ErasurePair) {
            zi = uniform01(rng) < scn.channel.eps2() ? kErasureSymbol : xi;
        } else {
            zi = xi ^ (uniform01(rng) < scn.channel.p2() ? 1 : 0);
        }
        z_code += radix * static_cast<std::uint64_t>(zi);
        radix *= static_cast<std::uint64_t>(scn.channel.eve_size());
    }
    const int lo = std::max(1, scn.slots() - scn.n1);
    const GroupSpec a = window_group(scn, lay, lo, true, true);
    return {a.index_of(vals), z_code};
}

namespace {

struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
        std::uint64_t h = p.first * 0x9e3779b97f4a7c15ull;
        h ^= p.second + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

struct PlugIn {
    double mi = 0.0;
    std::uint64_t cells = 0;
};

PlugIn plugin_mi(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& obs) {
    std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t, PairHash> joint;
    std::unordered_map<std::uint64_t, std::uint64_t> ca, cb;
    for (const auto& o : obs) {
        ++joint[o];
        ++ca[o.first];
        ++cb[o.second];
    }
    const double n = static_cast<double>(obs.size());
    double mi = 0.0;
    for (const auto& [key, cnt] : joint) {
        const double p = cnt / n;
        const double pa = ca[key.first] / n;
        const double pb = cb[key.second] / n;
        mi += p * std::log2(p / (pa * pb));
    }
    // Miller-Madow: entropy plug-ins are biased down by (K-1)/(2N ln 2).
    const double corr = (static_cast<double>(ca.size()) - 1.0 +
                         static_cast<double>(cb.size()) - 1.0 -
                         (static_cast<double>(joint.size()) - 1.0)) /
                        (2.0 * n * std::log(2.0));
    return PlugIn{mi + corr, joint.size()};
}

} // namespace

MiEstimate mc_mi_estimate(const std::function<std::pair<std::uint64_t, std::uint64_t>(Rng&)>& gen,
                          std::uint64_t samples, Rng& rng, int batches) {
    if (samples < 1000) throw ConfigError("mc_mi_estimate: at least 1000 samples");
    if (batches < 2) throw ConfigError("mc_mi_estimate: at least 2 batches");

    std::vector<std::pair<std::uint64_t, std::uint64_t>> obs;
    obs.reserve(static_cast<std::size_t>(samples));
    for (std::uint64_t i = 0; i < samples; ++i) obs.push_back(gen(rng));

    const PlugIn full = plugin_mi(obs);

    // Batch means for the spread.
    std::vector<double> batch_mi;
    const std::uint64_t per = samples / static_cast<std::uint64_t>(batches);
    for (int b = 0; b < batches; ++b) {
        const auto begin = obs.begin() + static_cast<std::ptrdiff_t>(per * static_cast<std::uint64_t>(b));
        std::vector<std::pair<std::uint64_t, std::uint64_t>> chunk(begin, begin + static_cast<std::ptrdiff_t>(per));
        batch_mi.push_back(plugin_mi(chunk).mi);
    }
    double mean = 0.0;
    for (const double v : batch_mi) mean += v;
    mean /= batch_mi.size();
    double var = 0.0;
    for (const double v : batch_mi) var += (v - mean) * (v - mean);
    var /= (batch_mi.size() - 1);

    MiEstimate est;
    est.mi_bits = full.mi;
    est.std_err = std::sqrt(var / static_cast<double>(batch_mi.size()));
    est.samples = samples;
    est.cells = full.cells;
    est.underfilled = full.cells * 10 > samples;
    return est;
}

} // namespace keybuf
