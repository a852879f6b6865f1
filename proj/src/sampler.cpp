#include "gvl/sampler.hpp"

#include <algorithm>
#include <random>

#include "gvl/errors.hpp"
#include "gvl/rng.hpp"

namespace gvl {

std::vector<LabeledFrame> progress_labels(const EpisodeRecord& episode) {
    const int t_count = episode.length();
    if (t_count < 2) throw InvariantError("progress labels need at least 2 frames");
    std::vector<LabeledFrame> labeled;
    labeled.reserve(static_cast<std::size_t>(t_count));
    for (const FrameRef& frame : episode.frames) {
        LabeledFrame lf;
        lf.frame = frame;
        lf.true_progress = 100.0 * frame.timestep / (t_count - 1);
        labeled.push_back(std::move(lf));
    }
    labeled.front().true_progress = 0.0;
    labeled.back().true_progress = 100.0;
    return labeled;
}

std::vector<LabeledFrame> sample_frames(const EpisodeRecord& episode, int n, std::uint64_t seed) {
    if (n < 1) throw DomainError("sample_frames: n must be >= 1");
    const std::vector<LabeledFrame> all = progress_labels(episode);
    if (n >= episode.length()) return all;

    std::mt19937_64 gen(seed);
    std::vector<std::uint32_t> picks = rng::sample_without_replacement(
        static_cast<std::uint32_t>(episode.length()), static_cast<std::uint32_t>(n), gen);
    std::sort(picks.begin(), picks.end());
    std::vector<LabeledFrame> selected;
    selected.reserve(picks.size());
    for (std::uint32_t t : picks) selected.push_back(all[t]);
    return selected;
}

ShuffledSelection shuffle(const std::vector<LabeledFrame>& frames, std::uint64_t seed) {
    for (std::size_t i = 1; i < frames.size(); ++i)
        if (frames[i].frame.timestep <= frames[i - 1].frame.timestep)
            throw InvariantError("shuffle input must be sorted by timestep");

    std::vector<int> ranks(frames.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = static_cast<int>(i);
    std::mt19937_64 gen(seed);
    rng::fisher_yates(ranks, gen);

    ShuffledSelection sel;
    sel.seed = seed;
    sel.permutation = ranks;
    sel.frames.reserve(frames.size());
    for (int rank : ranks) sel.frames.push_back(frames[static_cast<std::size_t>(rank)]);
    return sel;
}

std::vector<double> unshuffle(const std::vector<double>& values,
                              const std::vector<int>& permutation) {
    if (values.size() != permutation.size())
        throw PermutationError("unshuffle: length mismatch");
    std::vector<double> temporal(values.size());
    std::vector<bool> seen(values.size(), false);
    for (std::size_t pos = 0; pos < values.size(); ++pos) {
        const int rank = permutation[pos];
        if (rank < 0 || static_cast<std::size_t>(rank) >= values.size() ||
            seen[static_cast<std::size_t>(rank)])
            throw PermutationError("unshuffle: permutation is not a bijection");
        seen[static_cast<std::size_t>(rank)] = true;
        temporal[static_cast<std::size_t>(rank)] = values[pos];
    }
    return temporal;
}

} // namespace gvl
