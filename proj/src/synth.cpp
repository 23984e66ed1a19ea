#include "ppgbench/core_data.hpp"

#include "ppgbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace ppgbench::data {

namespace {

// Reference point of the morphology law. Fixed, so every config maps a given
// (SBP, DBP) to the same pulse shape.
constexpr double kRefSbp = 120.0;
constexpr double kRefSbpScale = 20.0;
constexpr double kRefDbp = 70.0;
constexpr double kRefDbpScale = 12.0;

constexpr double kJitterMmHg = 3.0;
constexpr int kMaxDraws = 100000;

struct PulseShape {
    double width;      // decay width of the systolic lobe [s]
    double rise;       // rise width of the systolic lobe [s]; smaller = steeper upstroke
    double notch_rel;  // dicrotic wave amplitude relative to the systolic peak
};

PulseShape pulse_shape(double sbp, double dbp, double coupling) {
    const double zs = (sbp - kRefSbp) / kRefSbpScale;
    const double zd = (dbp - kRefDbp) / kRefDbpScale;
    PulseShape p;
    p.width = std::clamp(0.09 * (1.0 + coupling * (0.30 * zd - 0.20 * zs)), 0.03, 0.20);
    const double rise_frac = std::clamp(0.55 - coupling * 0.15 * zs, 0.20, 1.00);
    p.rise = p.width * rise_frac;
    p.notch_rel = std::clamp(0.55 + coupling * (-0.15 * zs + 0.10 * zd), 0.05, 0.95);
    return p;
}

double pulse(double tau, const PulseShape& p) {
    constexpr double kPeak = 0.15;
    const double sigma = tau < kPeak ? p.rise : p.width;
    const double d = (tau - kPeak) / sigma;
    const double delay = kPeak + 2.2 * p.width;
    const double dw = 0.6 * p.width;
    const double e = (tau - delay) / dw;
    return std::exp(-0.5 * d * d) + p.notch_rel * std::exp(-0.5 * e * e);
}

std::string padded(std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, v);
    return buf;
}

} // namespace

DatasetBundle generate_synthetic(const SynthConfig& config) {
    config.validate();

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> sbp_dist(config.sbp_mean, config.sbp_sd);
    std::normal_distribution<double> dbp_dist(config.dbp_mean, config.dbp_sd);
    std::uniform_real_distribution<double> hr_dist(config.heart_rate_range.first,
                                                   config.heart_rate_range.second);
    std::uniform_real_distribution<double> jitter(-kJitterMmHg, kJitterMmHg);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> amp_dist(0.8, 1.2);
    std::normal_distribution<double> noise(0.0, 1.0);

    DatasetBundle bundle;
    bundle.name = config.name;
    bundle.sample_rate = config.sample_rate;
    bundle.provenance["generator"] = "synthetic-gaussian-pulse";
    bundle.provenance["seed"] = std::to_string(config.seed);
    bundle.provenance["morphology_coupling"] = format_exact(config.morphology_coupling);
    bundle.records.reserve(config.n_subjects * config.segments_per_subject);

    for (std::size_t s = 0; s < config.n_subjects; ++s) {
        double sbp = 0.0;
        double dbp = 0.0;
        int draws = 0;
        do {
            if (++draws > kMaxDraws)
                throw ValidationError("SynthConfig: cannot draw sbp > dbp from the configured Gaussians");
            sbp = std::clamp(sbp_dist(rng), kSbpMin, kSbpMax);
            dbp = std::clamp(dbp_dist(rng), kDbpMin, kDbpMax);
        } while (!(sbp > dbp));

        const double heart_rate = hr_dist(rng);
        const double period = 60.0 / heart_rate;
        const double amplitude = amp_dist(rng);
        const double offset = 0.1 * noise(rng);
        const PulseShape shape = pulse_shape(sbp, dbp, config.morphology_coupling);
        const std::string subject_id = config.subject_prefix + padded(s, 5);

        for (std::size_t k = 0; k < config.segments_per_subject; ++k) {
            SegmentRecord rec;
            rec.subject_id = subject_id;
            rec.segment_id = subject_id + "_" + padded(k, 4);
            rec.source = config.source;
            draws = 0;
            do {
                if (++draws > kMaxDraws)
                    throw ValidationError("SynthConfig: label jitter cannot keep sbp > dbp");
                rec.sbp = std::clamp(sbp + jitter(rng), kSbpMin, kSbpMax);
                rec.dbp = std::clamp(dbp + jitter(rng), kDbpMin, kDbpMax);
            } while (!(rec.sbp > rec.dbp));

            const double phase = unit(rng) * period;
            rec.waveform.resize(config.segment_length);
            for (std::size_t t = 0; t < config.segment_length; ++t) {
                const double time = static_cast<double>(t) / config.sample_rate;
                // Beat onsets at phase + j*period; the two preceding beats may still overlap t.
                const double rel = time - phase;
                const double j0 = std::floor(rel / period);
                double v = 0.0;
                for (int dj = -2; dj <= 0; ++dj) v += pulse(rel - (j0 + dj) * period, shape);
                v = amplitude * v + offset + config.noise_sd * noise(rng);
                rec.waveform[t] = static_cast<float>(v);
            }
            bundle.records.push_back(std::move(rec));
        }
    }
    return bundle;
}

} // namespace ppgbench::data
