#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gvl/client.hpp"
#include "gvl/curation.hpp"
#include "gvl/ingest.hpp"
#include "gvl/metrics.hpp"

namespace gvl {

struct RunConfig {
    std::filesystem::path dataset_root;
    EndpointConfig endpoint;
    int shots = 0;
    int episodes_per_dataset = 50;
    int frames_per_episode = 15;
    int context_frames = 0; // 0 -> frames_per_episode
    Method method = Method::spearman;
    std::uint64_t global_seed = 0;
    std::filesystem::path out_dir;
    std::vector<std::int64_t> episode_list; // explicit indices; empty -> first N

    int effective_context_frames() const {
        return context_frames > 0 ? context_frames : frames_per_episode;
    }
};

struct DatasetReport {
    RunConfig config;
    std::string model;
    std::string dataset_id;
    int shots = 0;
    std::vector<EpisodeResult> episodes;
    AggregateStats stats;
    std::optional<Band> band;
    std::vector<OutlierFlag> outliers;
};

// Runs the full protocol: per episode, sample + shuffle eval frames, draw
// seeded context episodes (donors never equal the eval episode), build the
// prompt, query the endpoint, parse, unshuffle, score. Raw responses land in
// <out_dir>/raw/ and the report in <out_dir>/report.json. Transport failures
// that outlive the retry budget mark the episode empty and the run continues.
DatasetReport run_evaluation(const RunConfig& cfg);

nlohmann::json report_to_json(const DatasetReport& report);
DatasetReport report_from_json(const nlohmann::json& j);

void write_report(const DatasetReport& report, const std::filesystem::path& dir);
DatasetReport load_report(const std::filesystem::path& dir);

// Re-derives every episode result from the persisted raw responses; the
// returned report must match the stored one (audit path, no endpoint access).
DatasetReport recompute_from_raw(const std::filesystem::path& dir);

// One summary-table row: Model,Dataset,Ctx,VOC Mean,VOC Std,Std Err,Mism.,Empty.
std::string report_csv(const DatasetReport& report);

// Plot-ready per-episode series: episode,timestep,prediction.
std::string report_series_csv(const DatasetReport& report);

} // namespace gvl
