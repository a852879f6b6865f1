#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gvl/metrics.hpp"

namespace gvl {

struct DatasetReport; // runner.hpp

enum class Band { weak, moderate, strong };

std::string_view to_string(Band b);
Band band_from_string(std::string_view s);

// strong >= 0.7, moderate >= 0.4 on voc_mean, closed on the left.
Band classify_dataset(const AggregateStats& stats);

enum class FlagReason { low_voc_outlier, degenerate, mismatch, empty };

std::string_view to_string(FlagReason r);
FlagReason flag_reason_from_string(std::string_view s);

struct OutlierFlag {
    std::int64_t episode_index = 0;
    double voc = 0.0; // NaN when the episode produced no score
    double dataset_mean = 0.0;
    double dataset_std = 0.0;
    double deviation = 0.0; // std units; -inf when the leave-one-out std is 0
    FlagReason reason = FlagReason::low_voc_outlier;
};

// mismatch/empty/degenerate episodes are flagged unconditionally. An ok
// episode is a low_voc_outlier iff its deviation from the leave-one-out
// mean/std of the other ok episodes is <= -k. Statistical flags need at
// least 3 ok episodes. Output sorted by episode index.
std::vector<OutlierFlag> flag_outliers(const std::vector<EpisodeResult>& results, double k = 2.0);

struct CurationSummary {
    std::optional<Band> band; // absent when no episode scored
    std::vector<OutlierFlag> outliers;
    std::vector<std::string> hints; // advisory heuristics, never auto-deletions
    std::string text;               // human-readable rollup
};

CurationSummary curation_summary(const DatasetReport& report, double k = 2.0);

} // namespace gvl
