#include "gvl/ingest.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "gvl/errors.hpp"

namespace gvl {
namespace {

nlohmann::json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    return nlohmann::json::parse(in);
}

std::optional<std::int64_t> parse_index_dir(const std::string& name) {
    if (name.empty() || name.size() > 12) return std::nullopt;
    std::int64_t v = 0;
    for (char c : name) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + (c - '0');
    }
    return v;
}

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::uint32_t be16(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 8) | std::uint32_t(p[1]);
}

// Cheap header-only dimension probe so episode loading can validate every
// frame without fully decoding T images.
bool probe_dimensions(const std::filesystem::path& p, int& width, int& height) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return false;
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (buf.size() >= 24 && std::equal(png_sig, png_sig + 8, buf.begin())) {
        width = static_cast<int>(be32(buf.data() + 16));
        height = static_cast<int>(be32(buf.data() + 20));
        return width > 0 && height > 0;
    }
    if (buf.size() >= 4 && buf[0] == 0xff && buf[1] == 0xd8) {
        std::size_t pos = 2;
        while (pos + 3 < buf.size()) {
            if (buf[pos] != 0xff) return false;
            const unsigned char marker = buf[pos + 1];
            if (marker == 0xd8 || marker == 0x01 || (marker >= 0xd0 && marker <= 0xd7)) {
                pos += 2;
                continue;
            }
            if (pos + 3 >= buf.size()) return false;
            const std::size_t seg_len = be16(buf.data() + pos + 2);
            const bool sof = marker >= 0xc0 && marker <= 0xcf && marker != 0xc4 &&
                             marker != 0xc8 && marker != 0xcc;
            if (sof) {
                if (pos + 9 >= buf.size()) return false;
                height = static_cast<int>(be16(buf.data() + pos + 5));
                width = static_cast<int>(be16(buf.data() + pos + 7));
                return width > 0 && height > 0;
            }
            if (marker == 0xda) return false; // scan data reached without SOF
            pos += 2 + seg_len;
        }
    }
    return false;
}

} // namespace

DatasetHandle open_dataset(const std::filesystem::path& root) {
    const auto manifest_path = root / "dataset.json";
    if (!std::filesystem::exists(manifest_path))
        throw ManifestError("missing manifest " + manifest_path.string());
    nlohmann::json manifest;
    try {
        manifest = read_json_file(manifest_path);
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("unparseable manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("dataset_id") ||
        !manifest["dataset_id"].is_string())
        throw ManifestError("manifest lacks dataset_id: " + manifest_path.string());

    DatasetHandle handle;
    handle.root = root;
    handle.dataset_id = manifest["dataset_id"].get<std::string>();
    handle.default_instruction = manifest.value("default_instruction", std::string{});

    const auto episodes_dir = root / "episodes";
    if (std::filesystem::is_directory(episodes_dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(episodes_dir)) {
            if (!entry.is_directory()) continue;
            if (auto idx = parse_index_dir(entry.path().filename().string()))
                handle.episode_indices.push_back(*idx);
        }
    }
    std::sort(handle.episode_indices.begin(), handle.episode_indices.end());
    if (handle.episode_indices.empty())
        throw EmptyDatasetError("no episodes under " + episodes_dir.string());
    return handle;
}

EpisodeRecord load_episode(const DatasetHandle& handle, std::int64_t index) {
    if (!std::binary_search(handle.episode_indices.begin(), handle.episode_indices.end(), index))
        throw NotFoundError("episode " + std::to_string(index) + " not in dataset " +
                            handle.dataset_id);
    const auto episode_dir = handle.root / "episodes" / std::to_string(index);

    EpisodeRecord record;
    record.episode_index = index;
    const auto meta_path = episode_dir / "episode.json";
    if (std::filesystem::exists(meta_path)) {
        try {
            const auto meta = read_json_file(meta_path);
            record.instruction = meta.value("instruction", std::string{});
        } catch (const nlohmann::json::exception& e) {
            throw MetadataError("unparseable " + meta_path.string() + ": " + e.what());
        }
    }
    if (record.instruction.empty()) record.instruction = handle.default_instruction;
    if (record.instruction.empty())
        throw MetadataError("episode " + std::to_string(index) + " has no instruction");

    const auto frames_dir = episode_dir / "frames";
    if (!std::filesystem::is_directory(frames_dir))
        throw MetadataError("episode " + std::to_string(index) + " lacks frames/");
    for (const auto& entry : std::filesystem::directory_iterator(frames_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext != ".png" && ext != ".jpg") continue;
        const auto stem = entry.path().stem().string();
        const auto ts = parse_index_dir(stem);
        if (!ts || stem.size() != 6) continue;
        FrameRef ref;
        ref.timestep = static_cast<int>(*ts);
        ref.image_path = entry.path();
        record.frames.push_back(std::move(ref));
    }
    std::sort(record.frames.begin(), record.frames.end(),
              [](const FrameRef& a, const FrameRef& b) { return a.timestep < b.timestep; });

    if (record.length() < 2)
        throw InvariantError("episode " + std::to_string(index) + " has fewer than 2 frames");
    for (int t = 0; t < record.length(); ++t) {
        FrameRef& ref = record.frames[static_cast<std::size_t>(t)];
        if (ref.timestep != t)
            throw InvariantError("episode " + std::to_string(index) +
                                 " frames not contiguous at timestep " + std::to_string(t));
        if (!probe_dimensions(ref.image_path, ref.width, ref.height))
            throw FrameDecodeError("undecodable frame " + ref.image_path.string(), index,
                                   ref.timestep);
    }
    return record;
}

} // namespace gvl
