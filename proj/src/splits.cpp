#include "ppgbench/splits.hpp"

#include "ppgbench/errors.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

namespace ppgbench::splits {

using data::DatasetBundle;
using nlohmann::json;

std::string to_string(Scenario s) {
    switch (s) {
    case Scenario::Calib: return "Calib";
    case Scenario::CalibFree: return "CalibFree";
    case Scenario::AAMI: return "AAMI";
    }
    return "?";
}

std::string to_string(Role r) {
    switch (r) {
    case Role::Train: return "train";
    case Role::Validation: return "validation";
    case Role::Calibration: return "calibration";
    case Role::Test: return "test";
    }
    return "?";
}

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Fisher-Yates on the raw engine output so the permutation does not depend on
// the standard library's distribution implementations.
template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

std::size_t round_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// subject id -> record indices, subjects and segments in sorted id order.
std::map<std::string, std::vector<std::size_t>> group_by_subject(const DatasetBundle& bundle) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < bundle.records.size(); ++i) groups[bundle.records[i].subject_id].push_back(i);
    for (auto& [_, idx] : groups)
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return bundle.records[a].segment_id < bundle.records[b].segment_id;
        });
    return groups;
}

struct GroupCounts {
    std::size_t test = 0, val = 0, cal = 0;
};

// Shrinks calibration, then validation, then test until at least one unit stays in train.
GroupCounts fit_counts(GroupCounts c, std::size_t n, std::size_t min_val, std::size_t min_test) {
    while (c.test + c.val + c.cal >= n) {
        if (c.cal > 0) --c.cal;
        else if (c.val > min_val) --c.val;
        else if (c.test > min_test) --c.test;
        else break;
    }
    return c;
}

void assign_calib(const DatasetBundle& bundle, const SplitSpec& spec, std::mt19937_64& rng,
                  SplitAssignment& out) {
    for (auto& [subject, idx] : group_by_subject(bundle)) {
        std::vector<std::size_t> segs = idx;
        seeded_shuffle(segs, rng);
        if (segs.size() == 1) {
            out.role_of[bundle.records[segs[0]].segment_id] = Role::Train;
            out.warnings.push_back("subject " + subject + " has a single segment; assigned train-only");
            continue;
        }
        const auto n = segs.size();
        auto c = fit_counts({round_count(spec.test_fraction, n), round_count(spec.val_fraction, n),
                             round_count(spec.calib_fraction, n)},
                            n, 0, 0);
        std::size_t k = 0;
        for (; k < c.test; ++k) out.role_of[bundle.records[segs[k]].segment_id] = Role::Test;
        for (; k < c.test + c.val; ++k) out.role_of[bundle.records[segs[k]].segment_id] = Role::Validation;
        for (; k < c.test + c.val + c.cal; ++k) out.role_of[bundle.records[segs[k]].segment_id] = Role::Calibration;
        for (; k < n; ++k) out.role_of[bundle.records[segs[k]].segment_id] = Role::Train;
    }
}

struct SubjectTail {
    std::string id;
    std::size_t n = 0, low = 0, high = 0;
};

// Greedy test-subject selection. Each step takes the subject that makes the
// most progress toward both tail quotas (progress per tail capped at the
// quota); ties go to the earlier subject in the seeded order, so once both
// quotas hold the remaining picks follow the shuffle.
std::vector<std::string> select_aami_test(const std::vector<SubjectTail>& ordered, std::size_t count,
                                          const TailQuota& q) {
    std::vector<bool> used(ordered.size(), false);
    std::vector<std::string> chosen;
    std::size_t N = 0, L = 0, H = 0;
    for (std::size_t step = 0; step < count; ++step) {
        double best = -1.0;
        std::size_t best_i = ordered.size();
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            if (used[i]) continue;
            const double n = static_cast<double>(N + ordered[i].n);
            const double lf = static_cast<double>(L + ordered[i].low) / n;
            const double hf = static_cast<double>(H + ordered[i].high) / n;
            const double score = std::min(lf, q.min_tail_fraction) + std::min(hf, q.min_tail_fraction);
            if (score > best + 1e-15) {
                best = score;
                best_i = i;
            }
        }
        used[best_i] = true;
        N += ordered[best_i].n;
        L += ordered[best_i].low;
        H += ordered[best_i].high;
        chosen.push_back(ordered[best_i].id);
    }
    return chosen;
}

void assign_by_subject(const DatasetBundle& bundle, const SplitSpec& spec, std::mt19937_64& rng,
                       SplitAssignment& out) {
    auto groups = group_by_subject(bundle);
    const std::size_t S = groups.size();
    if (S < 4)
        throw ValidationError(to_string(spec.scenario) + " split needs at least 4 subjects, bundle has " +
                              std::to_string(S));

    std::vector<std::string> order;
    for (const auto& [subject, _] : groups) order.push_back(subject);
    seeded_shuffle(order, rng);

    auto c = fit_counts({std::max<std::size_t>(1, round_count(spec.test_fraction, S)),
                         std::max<std::size_t>(1, round_count(spec.val_fraction, S)),
                         round_count(spec.calib_fraction, S)},
                        S, 1, 1);
    if (c.test + c.val + c.cal >= S)
        throw ValidationError("split fractions leave no training subjects");

    std::set<std::string> test_subjects;
    if (spec.scenario == Scenario::AAMI) {
        const auto& q = spec.aami_tail_quota;
        std::vector<SubjectTail> tails;
        for (const auto& subject : order) {
            SubjectTail t{subject};
            for (auto i : groups[subject]) {
                ++t.n;
                if (bundle.records[i].sbp < q.low_sbp_threshold) ++t.low;
                if (bundle.records[i].sbp > q.high_sbp_threshold) ++t.high;
            }
            tails.push_back(t);
        }
        auto chosen = select_aami_test(tails, c.test, q);
        std::vector<double> sbp;
        for (const auto& s : chosen)
            for (auto i : groups[s]) sbp.push_back(bundle.records[i].sbp);
        auto [lf, hf] = tail_fractions(sbp, q);
        if (lf < q.min_tail_fraction || hf < q.min_tail_fraction) {
            throw ValidationError("infeasible AAMI tail quota: achievable test fractions low=" +
                                  data::format_exact(lf) + " high=" + data::format_exact(hf) +
                                  ", required " + data::format_exact(q.min_tail_fraction) + " each");
        }
        test_subjects.insert(chosen.begin(), chosen.end());
    } else {
        test_subjects.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(c.test));
    }

    std::vector<std::string> rest;
    for (const auto& s : order)
        if (!test_subjects.count(s)) rest.push_back(s);

    for (std::size_t k = 0; k < rest.size(); ++k) {
        Role role = Role::Train;
        if (k < c.val) role = Role::Validation;
        else if (k < c.val + c.cal) role = Role::Calibration;
        for (auto i : groups[rest[k]]) out.role_of[bundle.records[i].segment_id] = role;
    }
    for (const auto& s : test_subjects)
        for (auto i : groups[s]) out.role_of[bundle.records[i].segment_id] = Role::Test;
}

} // namespace

Scenario parse_scenario(const std::string& s) {
    const auto l = lower(s);
    if (l == "calib") return Scenario::Calib;
    if (l == "calibfree") return Scenario::CalibFree;
    if (l == "aami") return Scenario::AAMI;
    throw ValidationError("unknown scenario '" + s + "' (expected calib, calibfree or aami)");
}

Role parse_role(const std::string& s) {
    const auto l = lower(s);
    if (l == "train") return Role::Train;
    if (l == "validation" || l == "val") return Role::Validation;
    if (l == "calibration" || l == "calib") return Role::Calibration;
    if (l == "test") return Role::Test;
    throw ValidationError("unknown role '" + s + "'");
}

void SplitSpec::validate() const {
    auto in_open = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in_open(test_fraction)) throw ValidationError("test_fraction must lie in (0, 1)");
    if (!in_open(val_fraction)) throw ValidationError("val_fraction must lie in (0, 1)");
    if (!(calib_fraction >= 0.0 && calib_fraction < 1.0))
        throw ValidationError("calib_fraction must lie in [0, 1)");
    if (!(test_fraction + val_fraction + calib_fraction < 1.0))
        throw ValidationError("split fractions must sum to < 1");
    if (scenario == Scenario::AAMI) {
        if (!(aami_tail_quota.low_sbp_threshold < aami_tail_quota.high_sbp_threshold))
            throw ValidationError("AAMI thresholds must satisfy low < high");
        if (!(aami_tail_quota.min_tail_fraction >= 0.0 && aami_tail_quota.min_tail_fraction <= 0.5))
            throw ValidationError("min_tail_fraction must lie in [0, 0.5]");
    }
}

std::vector<std::size_t> SplitAssignment::indices(const DatasetBundle& bundle, Role role) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bundle.records.size(); ++i) {
        auto it = role_of.find(bundle.records[i].segment_id);
        if (it != role_of.end() && it->second == role) out.push_back(i);
    }
    return out;
}

std::pair<double, double> tail_fractions(const std::vector<double>& sbp, const TailQuota& q) {
    if (sbp.empty()) return {0.0, 0.0};
    std::size_t low = 0, high = 0;
    for (double v : sbp) {
        if (v < q.low_sbp_threshold) ++low;
        if (v > q.high_sbp_threshold) ++high;
    }
    const double n = static_cast<double>(sbp.size());
    return {static_cast<double>(low) / n, static_cast<double>(high) / n};
}

SplitAssignment make_split(const DatasetBundle& bundle, const SplitSpec& spec) {
    spec.validate();
    data::require_valid(bundle);
    SplitAssignment out;
    out.scenario = spec.scenario;
    out.source_bundle = bundle.name;
    std::mt19937_64 rng(spec.seed);
    if (spec.scenario == Scenario::Calib) assign_calib(bundle, spec, rng, out);
    else assign_by_subject(bundle, spec, rng, out);
    return out;
}

std::vector<SplitViolation> verify_split(const DatasetBundle& bundle, const SplitAssignment& a,
                                         const TailQuota& quota) {
    std::vector<SplitViolation> out;
    std::set<std::string> bundle_ids;
    for (const auto& r : bundle.records) bundle_ids.insert(r.segment_id);

    SplitViolation unknown{"unknown id", {}};
    for (const auto& [id, _] : a.role_of)
        if (!bundle_ids.count(id)) unknown.ids.push_back(id);
    if (!unknown.ids.empty()) out.push_back(unknown);

    SplitViolation coverage{"coverage", {}};
    for (const auto& id : bundle_ids)
        if (!a.role_of.count(id)) coverage.ids.push_back(id);
    if (!coverage.ids.empty()) out.push_back(coverage);

    std::set<std::string> train_subj, test_subj;
    std::vector<double> test_sbp;
    for (const auto& r : bundle.records) {
        auto it = a.role_of.find(r.segment_id);
        if (it == a.role_of.end()) continue;
        if (it->second == Role::Train) train_subj.insert(r.subject_id);
        if (it->second == Role::Test) {
            test_subj.insert(r.subject_id);
            test_sbp.push_back(r.sbp);
        }
    }

    if (a.scenario == Scenario::Calib) {
        SplitViolation sharing{"subject sharing", {}};
        for (const auto& s : test_subj)
            if (!train_subj.count(s)) sharing.ids.push_back(s);
        if (!sharing.ids.empty()) out.push_back(sharing);
    } else {
        SplitViolation overlap{"subject overlap", {}};
        std::set_intersection(train_subj.begin(), train_subj.end(), test_subj.begin(), test_subj.end(),
                              std::back_inserter(overlap.ids));
        if (!overlap.ids.empty()) out.push_back(overlap);
    }

    if (a.scenario == Scenario::AAMI) {
        auto [lf, hf] = tail_fractions(test_sbp, quota);
        if (lf < quota.min_tail_fraction || hf < quota.min_tail_fraction)
            out.push_back({"tail quota", {"low=" + data::format_exact(lf), "high=" + data::format_exact(hf)}});
    }
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

namespace {

json spec_to_json(const SplitSpec& s) {
    return {{"scenario", to_string(s.scenario)},
            {"test_fraction", s.test_fraction},
            {"val_fraction", s.val_fraction},
            {"calib_fraction", s.calib_fraction},
            {"aami_tail_quota",
             {{"low_sbp_threshold", s.aami_tail_quota.low_sbp_threshold},
              {"high_sbp_threshold", s.aami_tail_quota.high_sbp_threshold},
              {"min_tail_fraction", s.aami_tail_quota.min_tail_fraction}}},
            {"seed", s.seed}};
}

} // namespace

void write_split(const SplitAssignment& a, const SplitSpec& spec, const std::filesystem::path& csv_path) {
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    std::string csv = "segment_id,role\n";
    for (const auto& [id, role] : a.role_of) csv += id + "," + to_string(role) + "\n";
    detail::write_file(csv_path, csv);
    json side = {{"spec", spec_to_json(spec)},
                 {"scenario", to_string(a.scenario)},
                 {"source_bundle", a.source_bundle},
                 {"warnings", a.warnings}};
    detail::write_file(sidecar_path(csv_path), side.dump(2) + "\n");
}

SplitAssignment read_split(const std::filesystem::path& csv_path) {
    SplitAssignment a;
    auto lines = detail::split_lines(detail::read_file(csv_path));
    if (lines.empty() || detail::split_csv_line(lines[0]) != std::vector<std::string>{"segment_id", "role"})
        throw LoadError("split csv must start with header 'segment_id,role'");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto cells = detail::split_csv_line(lines[i]);
        if (cells.size() != 2) throw LoadError("malformed split line " + std::to_string(i + 1));
        if (!a.role_of.emplace(cells[0], parse_role(cells[1])).second)
            throw LoadError("duplicate segment_id in split", cells[0]);
    }
    auto side = sidecar_path(csv_path);
    if (std::filesystem::exists(side)) {
        try {
            auto j = json::parse(detail::read_file(side));
            a.scenario = parse_scenario(j.at("scenario").get<std::string>());
            a.source_bundle = j.value("source_bundle", "");
            a.warnings = j.value("warnings", std::vector<std::string>{});
        } catch (const json::exception& e) {
            throw LoadError(std::string("corrupt split sidecar: ") + e.what());
        }
    }
    return a;
}

SplitSpec read_split_spec(const std::filesystem::path& json_path) {
    try {
        auto j = json::parse(detail::read_file(json_path));
        if (j.contains("spec")) j = j["spec"];
        SplitSpec s;
        s.scenario = parse_scenario(j.at("scenario").get<std::string>());
        s.test_fraction = j.value("test_fraction", s.test_fraction);
        s.val_fraction = j.value("val_fraction", s.val_fraction);
        s.calib_fraction = j.value("calib_fraction", s.calib_fraction);
        s.seed = j.value("seed", s.seed);
        if (j.contains("aami_tail_quota")) {
            const auto& q = j["aami_tail_quota"];
            s.aami_tail_quota.low_sbp_threshold = q.value("low_sbp_threshold", s.aami_tail_quota.low_sbp_threshold);
            s.aami_tail_quota.high_sbp_threshold = q.value("high_sbp_threshold", s.aami_tail_quota.high_sbp_threshold);
            s.aami_tail_quota.min_tail_fraction = q.value("min_tail_fraction", s.aami_tail_quota.min_tail_fraction);
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed split spec: ") + e.what());
    }
}

} // namespace ppgbench::splits
