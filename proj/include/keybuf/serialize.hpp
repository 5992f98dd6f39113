#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "keybuf/channels.hpp"
#include "keybuf/leakage_audit.hpp"
#include "keybuf/power_control.hpp"
#include "keybuf/scheme.hpp"
#include "keybuf/wiretap_code.hpp"

namespace keybuf {

// Floats in emitted files carry 12 significant digits.
std::string format_double(double v);

// Minimal emitter for the flat report objects; keeps key order and float
// formatting stable so equal runs produce byte-identical files.
class JsonWriter {
public:
    JsonWriter& field(const std::string& key, double v);
    JsonWriter& field(const std::string& key, std::int64_t v);
    JsonWriter& field(const std::string& key, int v) { return field(key, static_cast<std::int64_t>(v)); }
    JsonWriter& field(const std::string& key, std::uint64_t v);
    JsonWriter& field(const std::string& key, bool v);
    JsonWriter& field(const std::string& key, const std::string& v);
    std::string str() const { return "{" + body_ + "}"; }

private:
    void sep();
    std::string body_;
};

// {"kind":"erasure","eps1":..,"eps2":..} | {"kind":"flip","p1":..,"p2":..}
// | {"kind":"gaussian","sigma1_sq":..,"sigma2_sq":..}
WiretapChannel channel_from_json(const nlohmann::json& j);

// Accepts either build parameters {n, rs, rr, structure, seed} or a fully
// serialized code {n, ks, kr, structure, seed, parity_check|codebook}.
BinningCode code_from_json(const nlohmann::json& j);
nlohmann::json code_to_json(const BinningCode& code);

SchemeConfig scheme_config_from_json(const nlohmann::json& j);
FadingDistribution fading_distribution_from_json(const nlohmann::json& j);
FadingConfig fading_config_from_json(const nlohmann::json& j);
AuditScenario audit_scenario_from_json(const nlohmann::json& j);

void write_session_csv(std::ostream& os, const SessionReport& report);
void write_fading_csv(std::ostream& os, const FadingSessionReport& report);
void write_session_json(std::ostream& os, const SessionReport& report);
void write_fading_json(std::ostream& os, const FadingSessionReport& report);

std::string session_summary_json(const SessionReport& report);
std::string fading_summary_json(const FadingSessionReport& report);
std::string audit_report_json(const JointLeakageReport& report, const BoundCheck& check,
                              double otp_leakage);

} // namespace keybuf
