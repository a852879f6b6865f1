#pragma once

#include <cstdint>
#include <vector>

#include "gvl/ingest.hpp"

namespace gvl {

struct LabeledFrame {
    FrameRef frame;
    double true_progress = 0.0; // percent, linear in timestep: 100*t/(T-1)
};

struct ShuffledSelection {
    std::vector<LabeledFrame> frames; // presentation order
    std::vector<int> permutation;     // presentation position -> temporal rank
    std::uint64_t seed = 0;
};

// One label per frame; endpoints exactly 0 and 100.
std::vector<LabeledFrame> progress_labels(const EpisodeRecord& episode);

// min(n, T) distinct timesteps, uniform without replacement, sorted ascending.
std::vector<LabeledFrame> sample_frames(const EpisodeRecord& episode, int n, std::uint64_t seed);

// Fisher-Yates over frames sorted by timestep; records the permutation that
// maps each presentation position back to its temporal rank.
ShuffledSelection shuffle(const std::vector<LabeledFrame>& frames, std::uint64_t seed);

// Restores values produced in presentation order to temporal order:
// out[permutation[i]] = values[i]. Throws PermutationError on any
// length/bijection violation.
std::vector<double> unshuffle(const std::vector<double>& values,
                              const std::vector<int>& permutation);

} // namespace gvl
