#include "gvl/curation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "gvl/errors.hpp"
#include "gvl/runner.hpp"

namespace gvl {

std::string_view to_string(Band b) {
    switch (b) {
        case Band::weak: return "weak";
        case Band::moderate: return "moderate";
        case Band::strong: return "strong";
    }
    return "weak";
}

Band band_from_string(std::string_view s) {
    if (s == "weak") return Band::weak;
    if (s == "moderate") return Band::moderate;
    if (s == "strong") return Band::strong;
    throw DomainError("unknown band: " + std::string(s));
}

Band classify_dataset(const AggregateStats& stats) {
    if (stats.n_ok < 1 || !stats.has_stats)
        throw UnclassifiableError("no scored episodes to classify");
    if (stats.voc_mean >= 0.7) return Band::strong;
    if (stats.voc_mean >= 0.4) return Band::moderate;
    return Band::weak;
}

std::string_view to_string(FlagReason r) {
    switch (r) {
        case FlagReason::low_voc_outlier: return "low_voc_outlier";
        case FlagReason::degenerate: return "degenerate";
        case FlagReason::mismatch: return "mismatch";
        case FlagReason::empty: return "empty";
    }
    return "low_voc_outlier";
}

FlagReason flag_reason_from_string(std::string_view s) {
    for (FlagReason r : {FlagReason::low_voc_outlier, FlagReason::degenerate, FlagReason::mismatch,
                         FlagReason::empty})
        if (s == to_string(r)) return r;
    throw DomainError("unknown flag reason: " + std::string(s));
}

std::vector<OutlierFlag> flag_outliers(const std::vector<EpisodeResult>& results, double k) {
    std::vector<const EpisodeResult*> ok;
    for (const auto& r : results)
        if (r.status == ParseStatus::ok) ok.push_back(&r);

    double sum = 0.0, sumsq = 0.0;
    for (const auto* r : ok) {
        sum += r->voc;
        sumsq += r->voc * r->voc;
    }
    const auto n = static_cast<double>(ok.size());
    const double pool_mean = ok.empty() ? 0.0 : sum / n;
    const double pool_var = ok.size() < 2 ? 0.0 : std::max(0.0, (sumsq - sum * sum / n) / (n - 1));
    const double pool_std = std::sqrt(pool_var);

    std::vector<OutlierFlag> flags;
    for (const auto& r : results) {
        if (r.status == ParseStatus::mismatch || r.status == ParseStatus::empty) {
            OutlierFlag f;
            f.episode_index = r.episode_index;
            f.voc = std::numeric_limits<double>::quiet_NaN();
            f.dataset_mean = pool_mean;
            f.dataset_std = pool_std;
            f.deviation = 0.0;
            f.reason = r.status == ParseStatus::mismatch ? FlagReason::mismatch : FlagReason::empty;
            flags.push_back(f);
            continue;
        }
        if (r.degenerate) {
            OutlierFlag f;
            f.episode_index = r.episode_index;
            f.voc = r.voc;
            f.dataset_mean = pool_mean;
            f.dataset_std = pool_std;
            f.deviation = 0.0;
            f.reason = FlagReason::degenerate;
            flags.push_back(f);
        }
    }

    if (ok.size() < 3) {
        std::cerr << "outliers: only " << ok.size()
                  << " scored episode(s); statistical flags skipped\n";
        std::sort(flags.begin(), flags.end(),
                  [](const OutlierFlag& a, const OutlierFlag& b) {
                      return a.episode_index < b.episode_index;
                  });
        return flags;
    }

    for (const auto* r : ok) {
        if (r->degenerate) continue; // already surfaced above
        // Leave-one-out so a single extreme episode cannot widen the std
        // that would hide it.
        const double loo_n = n - 1.0;
        const double loo_mean = (sum - r->voc) / loo_n;
        const double loo_sumsq = sumsq - r->voc * r->voc;
        const double loo_var =
            std::max(0.0, (loo_sumsq - loo_n * loo_mean * loo_mean) / (loo_n - 1.0));
        double loo_std = std::sqrt(loo_var);
        // Spread below voc resolution is accumulation noise, not structure;
        // likewise an episode numerically indistinguishable from the rest is
        // never an outlier.
        if (loo_std <= 1e-6) loo_std = 0.0;
        const double gap = r->voc - loo_mean;
        if (std::abs(gap) <= 1e-9) continue;
        double deviation;
        if (loo_std == 0.0) {
            deviation = gap < 0.0 ? -std::numeric_limits<double>::infinity()
                                  : std::numeric_limits<double>::infinity();
        } else {
            deviation = gap / loo_std;
        }
        if (deviation <= -k) {
            OutlierFlag f;
            f.episode_index = r->episode_index;
            f.voc = r->voc;
            f.dataset_mean = loo_mean;
            f.dataset_std = loo_std;
            f.deviation = deviation;
            f.reason = FlagReason::low_voc_outlier;
            flags.push_back(f);
        }
    }
    std::sort(flags.begin(), flags.end(), [](const OutlierFlag& a, const OutlierFlag& b) {
        return a.episode_index < b.episode_index;
    });
    return flags;
}

CurationSummary curation_summary(const DatasetReport& report, double k) {
    CurationSummary summary;
    if (report.stats.n_ok >= 1 && report.stats.has_stats)
        summary.band = classify_dataset(report.stats);
    summary.outliers = flag_outliers(report.episodes, k);

    const int total = static_cast<int>(report.episodes.size());
    const double mismatch_rate =
        total == 0 ? 0.0 : static_cast<double>(report.stats.n_mismatch) / total;
    int low_voc = 0;
    for (const auto& f : summary.outliers)
        if (f.reason == FlagReason::low_voc_outlier) ++low_voc;

    // Heuristic rule table (advisory only, never an automated deletion):
    // weak scores or rampant format mismatches point at ill-posed task
    // definitions / ambiguous instructions; a strong dataset with a few
    // isolated low scorers points at out-of-distribution episodes.
    const bool strong = summary.band && *summary.band == Band::strong;
    if ((summary.band && *summary.band == Band::weak) ||
        (mismatch_rate >= 0.2 && !strong))
        summary.hints.push_back("task definition / instruction ambiguity suspected");
    if (strong && low_voc >= 1 && low_voc <= std::max(1, total / 10)) {
        std::string hint = "OOD episodes suspected:";
        for (const auto& f : summary.outliers)
            if (f.reason == FlagReason::low_voc_outlier)
                hint += " " + std::to_string(f.episode_index);
        summary.hints.push_back(hint);
    }

    std::string text = "dataset " + report.dataset_id + ": ";
    text += summary.band ? std::string(to_string(*summary.band)) : std::string("unscored");
    if (report.stats.has_stats) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), " (voc mean %.4f over %d episodes)",
                      report.stats.voc_mean, report.stats.n_ok);
        text += buf;
    }
    text += "; " + std::to_string(summary.outliers.size()) + " flag(s)";
    for (const auto& hint : summary.hints) text += "\nhint (heuristic, advisory): " + hint;
    summary.text = std::move(text);
    return summary;
}

} // namespace gvl
