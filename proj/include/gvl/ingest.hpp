#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gvl {

struct FrameRef {
    int timestep = 0;
    std::filesystem::path image_path;
    int width = 0;
    int height = 0;
};

struct EpisodeRecord {
    std::int64_t episode_index = 0;
    std::string instruction;
    std::vector<FrameRef> frames; // ordered by timestep 0..T-1
    int length() const { return static_cast<int>(frames.size()); }
};

struct DatasetHandle {
    std::filesystem::path root;
    std::string dataset_id;
    std::string default_instruction;
    std::vector<std::int64_t> episode_indices; // ascending
};

// Layout: <root>/dataset.json {dataset_id, default_instruction?};
//         <root>/episodes/<index>/episode.json {instruction?};
//         <root>/episodes/<index>/frames/<timestep %06d>.{png,jpg}
DatasetHandle open_dataset(const std::filesystem::path& root);

EpisodeRecord load_episode(const DatasetHandle& handle, std::int64_t index);

} // namespace gvl
