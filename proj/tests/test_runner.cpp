#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gvl/errors.hpp"
#include "gvl/mockvlm.hpp"
#include "gvl/rng.hpp"
#include "gvl/runner.hpp"
#include "test_support.hpp"

using gvl::MockServer;
using gvl::OracleMode;
using gvl::OracleSpec;
using gvl::RunConfig;

namespace {

RunConfig base_config(const std::filesystem::path& dataset_root, const MockServer& server,
                      const std::filesystem::path& out_dir) {
    RunConfig cfg;
    cfg.dataset_root = dataset_root;
    cfg.endpoint.base_url = server.base_url();
    cfg.endpoint.model_name = "mock-vlm";
    cfg.endpoint.request_timeout = 30.0;
    cfg.endpoint.max_concurrency = 2;
    cfg.shots = 2;
    cfg.episodes_per_dataset = 4;
    cfg.frames_per_episode = 8;
    cfg.global_seed = 7;
    cfg.out_dir = out_dir;
    return cfg;
}

} // namespace

TEST_CASE("a perfect endpoint yields a perfect two-shot report") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "runfix", 6, 20, 3);
    MockServer server{OracleSpec{OracleMode::perfect}};
    gvltest::TempDir out;

    const RunConfig cfg = base_config(data.path(), server, out.path() / "run");
    const gvl::DatasetReport report = gvl::run_evaluation(cfg);

    CHECK(report.model == "mock-vlm");
    CHECK(report.dataset_id == "runfix");
    CHECK(report.shots == 2);
    CHECK(report.stats.n_ok == 4);
    CHECK(report.stats.n_mismatch == 0);
    CHECK(report.stats.n_empty == 0);
    CHECK(report.stats.voc_mean == 1.0);
    CHECK(report.stats.voc_std == 0.0);
    CHECK(report.stats.voc_stderr == 0.0);
    REQUIRE(report.band.has_value());
    CHECK(*report.band == gvl::Band::strong);
    CHECK(report.outliers.empty());

    REQUIRE(report.episodes.size() == 4);
    for (std::size_t i = 0; i < report.episodes.size(); ++i) {
        const gvl::EpisodeResult& r = report.episodes[i];
        CHECK(r.episode_index == static_cast<std::int64_t>(i)); // sorted by index
        CHECK(r.status == gvl::ParseStatus::ok);
        CHECK(r.voc == 1.0);
        CHECK_FALSE(r.degenerate);
        CHECK(r.error_note.empty());
        CHECK(r.first_frame_number == 17); // 2 shots x 8 context frames + 1
        CHECK(r.permutation.size() == 8);
        CHECK(r.frame_timesteps.size() == 8);
        CHECK(std::is_sorted(r.frame_timesteps.begin(), r.frame_timesteps.end()));
        CHECK(std::is_sorted(r.predictions_temporal.begin(), r.predictions_temporal.end()));
        CHECK(r.seed == gvl::rng::derive_seed(7, "runfix", static_cast<std::uint64_t>(i), "sample"));
        CHECK(r.raw_response_path == "raw/episode_" + std::to_string(i) + ".txt");
        CHECK(std::filesystem::exists(cfg.out_dir / r.raw_response_path));
    }

    CHECK(std::filesystem::exists(cfg.out_dir / "report.json"));
    CHECK(std::filesystem::exists(cfg.out_dir / "run_meta.json"));

    CHECK(gvl::report_csv(report) ==
          "Model,Dataset,Ctx,VOC Mean,VOC Std,Std Err,Mism.,Empty\n"
          "mock-vlm,runfix,2,1.0000,0.0000,0.0000,0,0\n");

    const std::string series = gvl::report_series_csv(report);
    CHECK(series.rfind("episode,timestep,prediction\n", 0) == 0);
    CHECK(std::count(series.begin(), series.end(), '\n') == 1 + 4 * 8);
}

TEST_CASE("identical runs write byte-identical reports") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "repeat", 5, 16, 21);
    MockServer server{OracleSpec{OracleMode::perfect}};
    gvltest::TempDir out;

    RunConfig first = base_config(data.path(), server, out.path() / "a");
    RunConfig second = base_config(data.path(), server, out.path() / "b");
    gvl::run_evaluation(first);
    gvl::run_evaluation(second);

    CHECK(gvltest::read_file(out.path() / "a" / "report.json") ==
          gvltest::read_file(out.path() / "b" / "report.json"));
}

TEST_CASE("reports round trip through json and recompute from raw") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "audit", 5, 16, 5);
    MockServer server{OracleSpec{OracleMode::perfect}};
    gvltest::TempDir out;

    const RunConfig cfg = base_config(data.path(), server, out.path() / "run");
    const gvl::DatasetReport report = gvl::run_evaluation(cfg);

    const gvl::DatasetReport loaded = gvl::load_report(cfg.out_dir);
    CHECK(gvl::report_to_json(loaded).dump(2) == gvl::report_to_json(report).dump(2));

    const gvl::DatasetReport recomputed = gvl::recompute_from_raw(cfg.out_dir);
    CHECK(gvl::report_to_json(recomputed).dump(2) == gvl::report_to_json(report).dump(2));

    CHECK_THROWS_AS(gvl::load_report(out.path() / "nowhere"), gvl::IoError);
}

TEST_CASE("zero-shot numbering starts at one") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "zeroshot", 3, 12, 9);
    MockServer server{OracleSpec{OracleMode::perfect}};
    gvltest::TempDir out;

    RunConfig cfg = base_config(data.path(), server, out.path() / "run");
    cfg.shots = 0;
    cfg.episodes_per_dataset = 2;
    const gvl::DatasetReport report = gvl::run_evaluation(cfg);
    CHECK(report.stats.voc_mean == 1.0);
    for (const auto& r : report.episodes) CHECK(r.first_frame_number == 1);
}

TEST_CASE("an explicit episode list overrides the default prefix") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "subset", 6, 12, 2);
    MockServer server{OracleSpec{OracleMode::perfect}};
    gvltest::TempDir out;

    RunConfig cfg = base_config(data.path(), server, out.path() / "run");
    cfg.episode_list = {1, 4};
    const gvl::DatasetReport report = gvl::run_evaluation(cfg);
    REQUIRE(report.episodes.size() == 2);
    CHECK(report.episodes[0].episode_index == 1);
    CHECK(report.episodes[1].episode_index == 4);
}

TEST_CASE("a mismatching endpoint leaves the dataset unscored") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "mism", 5, 12, 13);
    MockServer server{OracleSpec{OracleMode::mismatching}};
    gvltest::TempDir out;

    const RunConfig cfg = base_config(data.path(), server, out.path() / "run");
    const gvl::DatasetReport report = gvl::run_evaluation(cfg);

    CHECK(report.stats.n_ok == 0);
    CHECK(report.stats.n_mismatch == 4);
    CHECK_FALSE(report.stats.has_stats);
    CHECK_FALSE(report.band.has_value());
    REQUIRE(report.outliers.size() == 4);
    for (const auto& f : report.outliers) CHECK(f.reason == gvl::FlagReason::mismatch);

    const nlohmann::json j =
        nlohmann::json::parse(gvltest::read_file(cfg.out_dir / "report.json"));
    CHECK(j.at("stats").at("voc_mean").is_null());
    CHECK(j.at("stats").at("voc_std").is_null());
    CHECK(j.at("band").is_null());
    CHECK(j.at("episodes").at(0).at("voc").is_null());

    // the audit path agrees even when nothing parsed
    const gvl::DatasetReport recomputed = gvl::recompute_from_raw(cfg.out_dir);
    CHECK(gvl::report_to_json(recomputed).dump(2) == gvl::report_to_json(report).dump(2));

    const std::string csv = gvl::report_csv(report);
    CHECK(csv.find("mock-vlm,mism,2,,,,4,0") != std::string::npos);
}

TEST_CASE("an unreachable endpoint marks episodes empty and the run survives") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "offline", 3, 12, 1);
    gvltest::TempDir out;

    RunConfig cfg;
    cfg.dataset_root = data.path();
    cfg.endpoint.base_url = "http://127.0.0.1:9/v1"; // nothing listens here
    cfg.endpoint.model_name = "mock-vlm";
    cfg.endpoint.max_retries = 0;
    cfg.endpoint.request_timeout = 2.0;
    cfg.shots = 0;
    cfg.episodes_per_dataset = 1;
    cfg.frames_per_episode = 4;
    cfg.out_dir = out.path() / "run";

    const gvl::DatasetReport report = gvl::run_evaluation(cfg);
    REQUIRE(report.episodes.size() == 1);
    CHECK(report.episodes[0].status == gvl::ParseStatus::empty);
    CHECK_FALSE(report.episodes[0].error_note.empty());
    CHECK(report.stats.n_empty == 1);
    CHECK_FALSE(report.stats.has_stats);
    CHECK(gvltest::read_file(cfg.out_dir / "raw" / "episode_0.txt").empty());

    const gvl::DatasetReport recomputed = gvl::recompute_from_raw(cfg.out_dir);
    CHECK(recomputed.episodes[0].status == gvl::ParseStatus::empty);
    CHECK(gvl::report_to_json(recomputed).dump(2) == gvl::report_to_json(report).dump(2));
}

TEST_CASE("credentials never reach any run artifact") {
    gvltest::TempDir data;
    gvl::write_fixture_dataset(data.path(), "secret", 3, 12, 17);
    MockServer server{OracleSpec{OracleMode::perfect}};
    gvltest::TempDir out;

    RunConfig cfg = base_config(data.path(), server, out.path() / "run");
    cfg.episodes_per_dataset = 2;
    cfg.endpoint.api_key = "sk-live-do-not-print";
    gvl::run_evaluation(cfg);

    for (const auto& entry : std::filesystem::recursive_directory_iterator(cfg.out_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string text = gvltest::read_file(entry.path());
        CAPTURE(entry.path().string());
        CHECK(text.find("sk-live-do-not-print") == std::string::npos);
    }
    const nlohmann::json j =
        nlohmann::json::parse(gvltest::read_file(cfg.out_dir / "report.json"));
    CHECK_FALSE(j.at("config").contains("api_key"));
}
