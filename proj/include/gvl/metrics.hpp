#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gvl/parser.hpp"

namespace gvl {

enum class Method { spearman, kendall };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct Correlation {
    double value = 0.0;
    // Set when a side has no ordering information (all ranks tied); the value
    // is then defined as 0 so flat predictions score neutrally instead of
    // erroring out of the pipeline.
    bool degenerate = false;
};

// Ranks 1..n, ties averaged. Throws DomainError on empty or non-finite input.
std::vector<double> fractional_ranks(const std::vector<double>& x);

// Pearson correlation of the fractional ranks.
Correlation spearman(const std::vector<double>& x, const std::vector<double>& y);

// Tau-b (tie corrected), O(n log n) via merge-sort inversion counting.
Correlation kendall(const std::vector<double>& x, const std::vector<double>& y);

// Value-Order Correlation: rank correlation between predictions restored to
// temporal order and the index sequence 1..n.
Correlation voc(const std::vector<double>& predictions_temporal, Method method);

struct EpisodeResult {
    std::int64_t episode_index = 0;
    ParseStatus status = ParseStatus::empty;
    double voc = 0.0; // meaningful iff status == ok
    bool degenerate = false;
    std::vector<double> predictions_temporal;
    std::vector<int> frame_timesteps; // temporal order, parallel to predictions
    std::vector<int> permutation;     // presentation position -> temporal rank
    int first_frame_number = 1;       // prompt numbering of the first eval frame
    std::uint64_t seed = 0;
    std::string raw_response_path;
    std::string error_note; // transport failure note, empty otherwise
};

struct AggregateStats {
    int n_ok = 0;
    int n_mismatch = 0;
    int n_empty = 0;
    bool has_stats = false; // false when n_ok == 0; the voc_* fields are then meaningless
    double voc_mean = 0.0;
    double voc_std = 0.0;    // sample std (n-1); defined as 0 for n_ok == 1
    double voc_stderr = 0.0; // voc_std / sqrt(n_ok)
};

AggregateStats aggregate(const std::vector<EpisodeResult>& results);

} // namespace gvl
