#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ppgbench::data {

inline constexpr double kDefaultSampleRate = 125.0;

inline constexpr double kSbpMin = 40.0;
inline constexpr double kSbpMax = 300.0;
inline constexpr double kDbpMin = 20.0;
inline constexpr double kDbpMax = 200.0;

/// One PPG segment with its reference blood pressure labels (mmHg).
struct SegmentRecord {
    std::string segment_id;
    std::string subject_id;
    std::string source;
    std::vector<float> waveform;
    double sbp = 0.0;
    double dbp = 0.0;

    bool operator==(const SegmentRecord&) const = default;
};

/// A set of segments recorded under one acquisition protocol: one sample rate
/// and one waveform length for every record.
struct DatasetBundle {
    std::string name;
    double sample_rate = kDefaultSampleRate;
    std::vector<SegmentRecord> records;
    std::map<std::string, std::string> provenance;

    std::size_t waveform_length() const {
        return records.empty() ? 0 : records.front().waveform.size();
    }

    bool operator==(const DatasetBundle&) const = default;
};

struct Violation {
    std::string kind;
    std::string record;  // empty for bundle-level violations
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

/// Lists every invariant violation; an empty report means the bundle is valid.
ValidationReport validate_bundle(const DatasetBundle& bundle);

/// Throws ValidationError carrying the report summary unless the bundle is valid.
void require_valid(const DatasetBundle& bundle);

// --- synthetic generator -----------------------------------------------------

struct SynthConfig {
    std::size_t n_subjects = 50;
    std::size_t segments_per_subject = 10;
    std::size_t segment_length = 1250;
    double sample_rate = kDefaultSampleRate;
    double sbp_mean = 115.62;
    double sbp_sd = 18.92;
    double dbp_mean = 63.03;
    double dbp_sd = 12.05;
    std::pair<double, double> heart_rate_range{55.0, 95.0};
    double morphology_coupling = 1.0;
    double noise_sd = 0.02;
    std::uint64_t seed = 0;
    std::string name = "synthetic";
    std::string source = "synthetic";
    std::string subject_prefix = "s";

    /// Throws ValidationError describing the first broken field.
    void validate() const;
};

/// Deterministic beat-train generator. Pulse width, dicrotic wave amplitude
/// and upstroke steepness follow fixed affine laws in the subject's baseline
/// (SBP, DBP), scaled by `morphology_coupling`; the laws do not depend on the
/// config means, so bundles generated with different label distributions share
/// one waveform-to-pressure relationship.
DatasetBundle generate_synthetic(const SynthConfig& config);

// --- on-disk bundle format ---------------------------------------------------

/// Writes `manifest.json`, `records.csv` and `waveforms.f32le` into `dir`.
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Reads a bundle directory; throws LoadError naming the offending record.
DatasetBundle load_bundle(const std::filesystem::path& dir);

/// Converts an externally prepared manifest CSV
/// (`segment_id,subject_id,source,sbp,dbp,offset,length`) plus a raw
/// little-endian float32 blob into a validated bundle. Offsets and lengths
/// are in samples and must tile the blob without overlap.
DatasetBundle ingest_csv(const std::filesystem::path& manifest_csv,
                         const std::filesystem::path& waveform_blob,
                         const std::string& name = "ingested",
                         double sample_rate = kDefaultSampleRate);

// Little-endian float32 helpers shared with the checkpoint writer.
void append_f32le(std::string& out, float value);
float read_f32le(const char* bytes);

/// Shortest decimal text that round-trips a double exactly.
std::string format_exact(double value);

} // namespace ppgbench::data
