#include "keybuf/serialize.hpp"

#include <cinttypes>
#include <cstdio>

#include "keybuf/errors.hpp"

namespace keybuf {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void JsonWriter::sep() {
    if (!body_.empty()) body_ += ",";
}

JsonWriter& JsonWriter::field(const std::string& key, double v) {
    sep();
    body_ += "\"" + key + "\":" + format_double(v);
    return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, std::int64_t v) {
    sep();
    body_ += "\"" + key + "\":" + std::to_string(v);
    return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, std::uint64_t v) {
    sep();
    body_ += "\"" + key + "\":" + std::to_string(v);
    return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, bool v) {
    sep();
    body_ += "\"" + key + "\":" + (v ? "true" : "false");
    return *this;
}

JsonWriter& JsonWriter::field(const std::string& key, const std::string& v) {
    sep();
    body_ += "\"" + key + "\":\"" + v + "\"";
    return *this;
}

namespace {

double require_number(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw ConfigError(std::string("config: missing numeric field '") + key + "'");
    }
    return j[key].get<double>();
}

std::string require_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw ConfigError(std::string("config: missing string field '") + key + "'");
    }
    return j[key].get<std::string>();
}

CodeStructure structure_from_string(const std::string& s) {
    if (s == "random_binning") return CodeStructure::RandomBinning;
    if (s == "linear_coset") return CodeStructure::LinearCoset;
    throw ConfigError("config: structure must be random_binning or linear_coset");
}

std::string structure_to_string(CodeStructure s) {
    return s == CodeStructure::RandomBinning ? "random_binning" : "linear_coset";
}

std::string word_to_hex(std::uint32_t w) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04x", w & 0xffffu);
    return buf;
}

std::uint32_t hex_to_word(const std::string& s) {
    unsigned v = 0;
    if (std::sscanf(s.c_str(), "%x", &v) != 1) throw ConfigError("config: bad hex word");
    return static_cast<std::uint32_t>(v);
}

} // namespace

WiretapChannel channel_from_json(const json& j) {
    const std::string kind = require_string(j, "kind");
    if (kind == "erasure") {
        return WiretapChannel::erasure_pair(require_number(j, "eps1"), require_number(j, "eps2"));
    }
    if (kind == "flip") {
        return WiretapChannel::flip_pair(require_number(j, "p1"), require_number(j, "p2"));
    }
    if (kind == "gaussian") {
        return WiretapChannel::gaussian_fading(require_number(j, "sigma1_sq"),
                                               require_number(j, "sigma2_sq"));
    }
    throw ConfigError("config: channel kind must be erasure, flip or gaussian");
}

BinningCode code_from_json(const json& j) {
    const int n = static_cast<int>(require_number(j, "n"));
    const CodeStructure structure = structure_from_string(require_string(j, "structure"));
    const std::uint64_t seed = j.value("seed", 0ull);

    if (j.contains("parity_check") || j.contains("codebook")) {
        const int ks = static_cast<int>(require_number(j, "ks"));
        const int kr = static_cast<int>(require_number(j, "kr"));
        std::vector<std::uint32_t> words;
        if (structure == CodeStructure::LinearCoset) {
            for (const auto& row : j.at("parity_check")) {
                words.push_back(hex_to_word(row.get<std::string>()));
            }
        } else {
            const std::string blob = j.at("codebook").get<std::string>();
            if (blob.size() % 4 != 0) throw ConfigError("config: codebook blob length not a multiple of 4");
            for (std::size_t i = 0; i < blob.size(); i += 4) {
                words.push_back(hex_to_word(blob.substr(i, 4)));
            }
        }
        return code_from_parts(n, ks, kr, structure, std::move(words), seed);
    }
    return build_binning_code(n, require_number(j, "rs"), require_number(j, "rr"), structure, seed);
}

nlohmann::json code_to_json(const BinningCode& code) {
    json j;
    j["n"] = code.n();
    j["ks"] = code.secrecy_bits();
    j["kr"] = code.randomization_bits();
    j["seed"] = code.build_seed;
    j["structure"] = structure_to_string(code.structure());
    if (code.structure() == CodeStructure::LinearCoset) {
        json rows = json::array();
        for (const std::uint32_t row : code.parity_rows()) rows.push_back(word_to_hex(row));
        j["parity_check"] = rows;
    } else {
        std::string blob;
        blob.reserve(code.codebook().size() * 4);
        for (const std::uint32_t w : code.codebook()) blob += word_to_hex(w);
        j["codebook"] = blob;
    }
    return j;
}

SchemeConfig scheme_config_from_json(const json& j) {
    SchemeConfig cfg;
    cfg.n = static_cast<int>(require_number(j, "n"));
    cfg.M = static_cast<int>(require_number(j, "m"));
    cfg.N1 = static_cast<int>(j.value("n1", 1.0));
    cfg.Rs = require_number(j, "rs");
    cfg.Rr = j.value("rr", 0.5);
    cfg.restart_period = static_cast<std::int64_t>(j.value("restart_period", 0.0));
    if (j.contains("key_cap_bits") && !j["key_cap_bits"].is_null()) {
        cfg.key_cap_bits = j["key_cap_bits"].get<std::int64_t>();
    }
    if (j.contains("buffer_capacity_bits") && !j["buffer_capacity_bits"].is_null()) {
        cfg.buffer_capacity_bits = j["buffer_capacity_bits"].get<std::int64_t>();
    }
    if (j.contains("structure")) {
        cfg.structure = structure_from_string(j["structure"].get<std::string>());
    }
    if (j.contains("code_seed") && !j["code_seed"].is_null()) {
        cfg.code_seed = j["code_seed"].get<std::uint64_t>();
    }
    cfg.allow_fractional_ratio = j.value("allow_fractional_ratio", false);

    if (j.contains("code")) {
        const json& c = j["code"];
        const std::string kind = require_string(c, "kind");
        if (kind == "ideal") {
            cfg.channel_code.kind = ChannelCodeSpec::Kind::IdealBitPipe;
            cfg.channel_code.rate_c = c.value("rate", 1.0);
        } else if (kind == "repetition") {
            cfg.channel_code.kind = ChannelCodeSpec::Kind::Repetition;
            cfg.channel_code.repeat = static_cast<int>(require_number(c, "r"));
        } else if (kind == "hamming74") {
            cfg.channel_code.kind = ChannelCodeSpec::Kind::Hamming74;
        } else {
            throw ConfigError("config: code kind must be ideal, repetition or hamming74");
        }
    }
    cfg.validate();
    return cfg;
}

FadingDistribution fading_distribution_from_json(const json& j) {
    FadingDistribution dist;
    const std::string kind = require_string(j, "kind");
    if (kind == "discrete") {
        dist.kind = FadingDistribution::Kind::Discrete;
        for (const auto& pt : j.at("support")) {
            dist.support.push_back(FadingDistribution::Point{
                pt.at(0).get<double>(), pt.at(1).get<double>(), pt.at(2).get<double>()});
        }
    } else if (kind == "rayleigh") {
        dist.kind = FadingDistribution::Kind::Rayleigh;
        dist.mean_h = require_number(j, "mean_h");
        dist.mean_g = require_number(j, "mean_g");
        dist.grid = static_cast<int>(j.value("grid", 10000.0));
    } else if (kind == "deterministic") {
        dist.kind = FadingDistribution::Kind::Deterministic;
        dist.det_h = require_number(j, "h");
        dist.det_g = require_number(j, "g");
    } else {
        throw ConfigError("config: fading kind must be discrete, rayleigh or deterministic");
    }
    dist.validate();
    return dist;
}

FadingConfig fading_config_from_json(const json& j) {
    FadingConfig cfg;
    cfg.n = static_cast<int>(require_number(j, "n"));
    cfg.M = static_cast<int>(require_number(j, "m"));
    cfg.N1 = static_cast<int>(j.value("n1", 1.0));
    cfg.pbar = require_number(j, "pbar");
    cfg.sigma1_sq = j.value("sigma1_sq", 1.0);
    cfg.sigma2_sq = j.value("sigma2_sq", 1.0);
    cfg.dist = fading_distribution_from_json(j.at("dist"));
    if (j.contains("key_cap_bits") && !j["key_cap_bits"].is_null()) {
        cfg.key_cap_bits = j["key_cap_bits"].get<std::int64_t>();
    }
    if (j.contains("buffer_capacity_bits") && !j["buffer_capacity_bits"].is_null()) {
        cfg.buffer_capacity_bits = j["buffer_capacity_bits"].get<std::int64_t>();
    }
    cfg.prefill_bits = static_cast<std::int64_t>(j.value("prefill_bits", 0.0));
    cfg.validate();
    return cfg;
}

AuditScenario audit_scenario_from_json(const json& j) {
    AuditScenario scn;
    scn.n1 = static_cast<int>(j.value("n1", 1.0));
    scn.channel = channel_from_json(j.at("channel"));
    scn.code = code_from_json(j.at("code"));
    const int slots = static_cast<int>(require_number(j, "slots"));
    scn.wiretap_present.assign(static_cast<std::size_t>(slots), true);
    if (j.contains("wiretap")) {
        const auto& w = j["wiretap"];
        if (static_cast<int>(w.size()) != slots) throw ConfigError("config: wiretap list length mismatch");
        for (int i = 0; i < slots; ++i) scn.wiretap_present[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)].get<bool>();
    }
    scn.keyed_bits.assign(static_cast<std::size_t>(slots), 0);
    if (j.contains("keyed_bits")) {
        const auto& kb = j["keyed_bits"];
        if (static_cast<int>(kb.size()) != slots) throw ConfigError("config: keyed_bits length mismatch");
        for (int i = 0; i < slots; ++i) scn.keyed_bits[static_cast<std::size_t>(i)] = kb[static_cast<std::size_t>(i)].get<int>();
    }
    scn.key_schedule.resize(static_cast<std::size_t>(slots));
    if (j.contains("key_schedule")) {
        const auto& ks = j["key_schedule"];
        if (static_cast<int>(ks.size()) != slots) throw ConfigError("config: key_schedule length mismatch");
        for (int i = 0; i < slots; ++i) {
            for (const auto& ref : ks[static_cast<std::size_t>(i)]) {
                KeySourceRef r;
                const std::string src = require_string(ref, "source");
                if (src == "wiretap") {
                    r.kind = KeySourceRef::Kind::WiretapBit;
                    r.slot = static_cast<int>(require_number(ref, "slot"));
                    r.bit = static_cast<int>(require_number(ref, "bit"));
                } else if (src == "keyed") {
                    r.kind = KeySourceRef::Kind::KeyedBit;
                    r.slot = static_cast<int>(require_number(ref, "slot"));
                    r.bit = static_cast<int>(require_number(ref, "bit"));
                } else if (src == "fresh") {
                    r.kind = KeySourceRef::Kind::FreshUniform;
                } else if (src == "biased") {
                    r.kind = KeySourceRef::Kind::FreshBiased;
                    r.bias = require_number(ref, "bias");
                } else {
                    throw ConfigError("config: key source must be wiretap, keyed, fresh or biased");
                }
                scn.key_schedule[static_cast<std::size_t>(i)].push_back(r);
            }
        }
    }
    scn.validate();
    return scn;
}

namespace {

constexpr const char* kSessionHeader = "slot,rate,delivered_bits,errors,B_k,pushed,taken,dropped,oldest_origin";

void write_session_row(std::ostream& os, const SlotRecord& r) {
    os << r.slot << ',' << format_double(r.rate) << ',' << r.delivered_bits << ',' << r.errors
       << ',' << r.level_start << ',' << r.pushed << ',' << r.taken << ',' << r.dropped << ','
       << r.oldest_origin;
}

} // namespace

void write_session_csv(std::ostream& os, const SessionReport& report) {
    os << kSessionHeader << '\n';
    for (const SlotRecord& r : report.slots) {
        write_session_row(os, r);
        os << '\n';
    }
}

void write_fading_csv(std::ostream& os, const FadingSessionReport& report) {
    os << kSessionHeader << ",H,G,P\n";
    for (const FadingSlotRecord& r : report.slots) {
        os << r.slot << ',' << format_double(r.rate) << ',' << r.delivered_bits << ",0,"
           << r.level_start << ',' << r.pushed << ',' << r.taken << ',' << r.dropped << ','
           << r.oldest_origin << ',' << format_double(r.h) << ',' << format_double(r.g) << ','
           << format_double(r.p) << '\n';
    }
}

void write_session_json(std::ostream& os, const SessionReport& report) {
    os << "[";
    for (std::size_t i = 0; i < report.slots.size(); ++i) {
        const SlotRecord& r = report.slots[i];
        JsonWriter w;
        w.field("slot", r.slot)
            .field("rate", r.rate)
            .field("delivered_bits", r.delivered_bits)
            .field("errors", r.errors)
            .field("b_k", r.level_start)
            .field("pushed", r.pushed)
            .field("taken", r.taken)
            .field("dropped", r.dropped)
            .field("oldest_origin", r.oldest_origin);
        os << (i == 0 ? "" : ",") << "\n" << w.str();
    }
    os << "\n]\n";
}

void write_fading_json(std::ostream& os, const FadingSessionReport& report) {
    os << "[";
    for (std::size_t i = 0; i < report.slots.size(); ++i) {
        const FadingSlotRecord& r = report.slots[i];
        JsonWriter w;
        w.field("slot", r.slot)
            .field("rate", r.rate)
            .field("delivered_bits", r.delivered_bits)
            .field("errors", std::int64_t{0})
            .field("b_k", r.level_start)
            .field("pushed", r.pushed)
            .field("taken", r.taken)
            .field("dropped", r.dropped)
            .field("oldest_origin", r.oldest_origin)
            .field("h", r.h)
            .field("g", r.g)
            .field("p", r.p);
        os << (i == 0 ? "" : ",") << "\n" << w.str();
    }
    os << "\n]\n";
}

std::string session_summary_json(const SessionReport& report) {
    JsonWriter w;
    w.field("slots", static_cast<std::int64_t>(report.slots.size()))
        .field("long_run_rate", report.long_run_rate)
        .field("total_delivered_bits", report.total_delivered_bits)
        .field("wiretap_error_slots", report.wiretap_error_slots)
        .field("keyed_error_slots", report.keyed_error_slots)
        .field("slots_with_errors", report.slots_with_errors);
    return w.str();
}

std::string fading_summary_json(const FadingSessionReport& report) {
    JsonWriter w;
    w.field("slots", static_cast<std::int64_t>(report.slots.size()))
        .field("long_run_rate", report.long_run_rate)
        .field("total_delivered_bits", report.total_delivered_bits)
        .field("avg_power", report.avg_power)
        .field("first_tx_slot", report.first_tx_slot);
    return w.str();
}

std::string audit_report_json(const JointLeakageReport& report, const BoundCheck& check,
                              double otp_leakage) {
    JsonWriter w;
    w.field("i_joint_bits", report.i_joint)
        .field("i_wiretap_part_bits", report.i_wiretap_part)
        .field("i_keyed_part_bits", report.i_keyed_part)
        .field("single_slot_eps", report.single_slot_eps)
        .field("per_symbol", report.i_joint / report.n)
        .field("otp_component_bits", otp_leakage)
        .field("n", report.n)
        .field("n1", report.n1)
        .field("slots", report.slots)
        .field("bound_pass", check.pass)
        .field("bound_slack", check.slack);
    return w.str();
}

} // namespace keybuf
