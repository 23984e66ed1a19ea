#include "ppgbench/core_data.hpp"

#include "ppgbench/errors.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

namespace ppgbench::data {

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        os << v.kind;
        if (!v.record.empty()) os << " [" << v.record << "]";
        if (!v.detail.empty()) os << ": " << v.detail;
        os << '\n';
    }
    return os.str();
}

ValidationReport validate_bundle(const DatasetBundle& bundle) {
    ValidationReport report;
    auto add = [&](std::string kind, std::string record, std::string detail) {
        report.violations.push_back({std::move(kind), std::move(record), std::move(detail)});
    };

    if (!(bundle.sample_rate > 0.0) || !std::isfinite(bundle.sample_rate))
        add("invalid sample rate", "", std::to_string(bundle.sample_rate));

    std::unordered_set<std::string> seen;
    const std::size_t length = bundle.waveform_length();
    for (const auto& r : bundle.records) {
        if (r.segment_id.empty()) add("empty segment id", "", "");
        if (!seen.insert(r.segment_id).second) add("duplicate segment id", r.segment_id, "");
        if (r.waveform.empty()) add("empty waveform", r.segment_id, "");
        if (r.waveform.size() != length)
            add("length heterogeneity", r.segment_id,
                std::to_string(r.waveform.size()) + " samples, expected " + std::to_string(length));
        for (float v : r.waveform) {
            if (!std::isfinite(v)) {
                add("non-finite waveform", r.segment_id, "");
                break;
            }
        }
        if (!std::isfinite(r.sbp) || !std::isfinite(r.dbp)) {
            add("non-finite label", r.segment_id, "");
            continue;
        }
        if (!(r.sbp > r.dbp)) add("label ordering", r.segment_id, "sbp must exceed dbp");
        if (r.sbp < kSbpMin || r.sbp > kSbpMax)
            add("sbp out of bounds", r.segment_id, format_exact(r.sbp));
        if (r.dbp < kDbpMin || r.dbp > kDbpMax)
            add("dbp out of bounds", r.segment_id, format_exact(r.dbp));
    }
    return report;
}

void require_valid(const DatasetBundle& bundle) {
    auto report = validate_bundle(bundle);
    if (!report.ok())
        throw ValidationError("invalid bundle '" + bundle.name + "':\n" + report.summary());
}

void SynthConfig::validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("SynthConfig: " + m); };
    if (n_subjects < 1) fail("n_subjects must be >= 1");
    if (segments_per_subject < 1) fail("segments_per_subject must be >= 1");
    if (segment_length < 1) fail("segment_length must be >= 1");
    if (!(sample_rate > 0.0)) fail("sample_rate must be positive");
    if (!(sbp_sd >= 0.0) || !(dbp_sd >= 0.0)) fail("standard deviations must be >= 0");
    if (!(noise_sd >= 0.0)) fail("noise_sd must be >= 0");
    if (!(morphology_coupling >= 0.0 && morphology_coupling <= 1.0))
        fail("morphology_coupling must lie in [0, 1]");
    if (!(heart_rate_range.first > 0.0) || heart_rate_range.first > heart_rate_range.second)
        fail("heart_rate_range must be a positive, ordered interval");
    if (!std::isfinite(sbp_mean) || !std::isfinite(dbp_mean)) fail("means must be finite");
}

void append_f32le(std::string& out, float value) {
    auto bits = std::bit_cast<std::uint32_t>(value);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float read_f32le(const char* bytes) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    return std::bit_cast<float>(bits);
}

std::string format_exact(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

} // namespace ppgbench::data
