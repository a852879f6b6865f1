#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gvl/curation.hpp"
#include "gvl/errors.hpp"
#include "gvl/mockvlm.hpp"
#include "gvl/runner.hpp"

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw gvl::IoError("cannot write " + p.string());
    out << text;
}

// Optional JSON file with EndpointConfig fields; flags override it. The
// api_key field is the config-file credential slot (env OPENGVL_API_KEY is
// the other source); its value never reaches logs or reports.
void apply_endpoint_config(const std::filesystem::path& path, gvl::EndpointConfig& ep) {
    std::ifstream in(path);
    if (!in) throw gvl::IoError("cannot read endpoint config " + path.string());
    const auto j = nlohmann::json::parse(in);
    ep.base_url = j.value("base_url", ep.base_url);
    ep.model_name = j.value("model", ep.model_name);
    ep.temperature = j.value("temperature", ep.temperature);
    ep.max_output_tokens = j.value("max_output_tokens", ep.max_output_tokens);
    ep.request_timeout = j.value("request_timeout", ep.request_timeout);
    ep.max_retries = j.value("max_retries", ep.max_retries);
    ep.backoff_base = j.value("backoff_base", ep.backoff_base);
    ep.max_concurrency = j.value("max_concurrency", ep.max_concurrency);
    ep.image_max_edge = j.value("image_max_edge", ep.image_max_edge);
    ep.api_key = j.value("api_key", ep.api_key);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal task-progress evaluation of robot episodes via VLM endpoints"};
    app.require_subcommand(1);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run the protocol against an endpoint");
    gvl::RunConfig cfg;
    std::string method = "spearman";
    std::string endpoint_config;
    evaluate->add_option("--dataset", cfg.dataset_root, "dataset root directory")->required();
    evaluate->add_option("--endpoint", cfg.endpoint.base_url, "chat-completions base URL");
    evaluate->add_option("--model", cfg.endpoint.model_name, "model name");
    evaluate->add_option("--shots", cfg.shots, "labeled context episodes per prompt")
        ->default_val(0);
    evaluate->add_option("--episodes", cfg.episodes_per_dataset, "episodes to evaluate")
        ->default_val(50);
    evaluate->add_option("--frames", cfg.frames_per_episode, "eval frames per episode")
        ->default_val(15);
    evaluate->add_option("--context-frames", cfg.context_frames,
                         "frames per context episode (default: same as --frames)");
    evaluate->add_option("--method", method, "spearman|kendall")->default_val("spearman");
    evaluate->add_option("--seed", cfg.global_seed, "global seed")->default_val(0);
    evaluate->add_option("--out", cfg.out_dir, "output directory")->required();
    evaluate->add_option("--episode-list", cfg.episode_list, "explicit episode indices");
    evaluate->add_option("--temperature", cfg.endpoint.temperature)->default_val(1.0);
    evaluate->add_option("--max-tokens", cfg.endpoint.max_output_tokens)->default_val(2048);
    evaluate->add_option("--timeout", cfg.endpoint.request_timeout)->default_val(120.0);
    evaluate->add_option("--retries", cfg.endpoint.max_retries)->default_val(3);
    evaluate->add_option("--backoff", cfg.endpoint.backoff_base)->default_val(1.0);
    evaluate->add_option("--concurrency", cfg.endpoint.max_concurrency)->default_val(4);
    evaluate->add_option("--image-max-edge", cfg.endpoint.image_max_edge)->default_val(512);
    evaluate->add_option("--endpoint-config", endpoint_config,
                         "JSON file with endpoint fields, including api_key");

    // report
    auto* report_cmd = app.add_subcommand("report", "re-emit a stored report");
    std::filesystem::path report_dir;
    bool emit_csv = false, emit_json = false;
    report_cmd->add_option("--in", report_dir, "run output directory")->required();
    report_cmd->add_flag("--csv", emit_csv, "write report.csv and series.csv");
    report_cmd->add_flag("--json", emit_json, "rewrite report.json from the loaded report");

    // outliers
    auto* outliers_cmd = app.add_subcommand("outliers", "curation signals for a stored report");
    std::filesystem::path outliers_dir;
    double k = 2.0;
    outliers_cmd->add_option("--in", outliers_dir, "run output directory")->required();
    outliers_cmd->add_option("--k", k, "leave-one-out z-score threshold")->default_val(2.0);

    // mock-serve
    auto* mock_cmd = app.add_subcommand("mock-serve", "run the deterministic mock endpoint");
    int mock_port = 8089;
    std::string mock_mode = "perfect";
    double mock_sigma = 5.0;
    std::uint64_t mock_seed = 0;
    mock_cmd->add_option("--port", mock_port)->default_val(8089);
    mock_cmd->add_option("--mode", mock_mode, "perfect|noisy|constant|reversed|mismatching|empty")
        ->default_val("perfect");
    mock_cmd->add_option("--sigma", mock_sigma, "noise std in percent")->default_val(5.0);
    mock_cmd->add_option("--seed", mock_seed)->default_val(0);

    // make-fixture
    auto* fixture_cmd = app.add_subcommand("make-fixture", "write a synthetic labeled dataset");
    std::filesystem::path fixture_dir;
    std::string fixture_id = "fixture";
    int fixture_episodes = 20, fixture_frames = 40;
    std::uint64_t fixture_seed = 0;
    fixture_cmd->add_option("--out", fixture_dir, "dataset root to create")->required();
    fixture_cmd->add_option("--dataset-id", fixture_id)->default_val("fixture");
    fixture_cmd->add_option("--episodes", fixture_episodes)->default_val(20);
    fixture_cmd->add_option("--frames", fixture_frames)->default_val(40);
    fixture_cmd->add_option("--seed", fixture_seed)->default_val(0);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*evaluate) {
            if (!endpoint_config.empty()) apply_endpoint_config(endpoint_config, cfg.endpoint);
            if (cfg.endpoint.base_url.empty())
                throw gvl::DomainError("no endpoint URL (use --endpoint or --endpoint-config)");
            cfg.method = gvl::method_from_string(method);
            const gvl::DatasetReport report = gvl::run_evaluation(cfg);
            std::cout << gvl::report_csv(report);
            return 0;
        }
        if (*report_cmd) {
            const gvl::DatasetReport stored = gvl::load_report(report_dir);
            const gvl::DatasetReport recomputed = gvl::recompute_from_raw(report_dir);
            if (gvl::report_to_json(stored) != gvl::report_to_json(recomputed)) {
                std::cerr << "stored stats do not match the raw responses; re-run evaluate or "
                             "inspect raw/\n";
                return 1;
            }
            if (emit_csv) {
                write_file(report_dir / "report.csv", gvl::report_csv(stored));
                write_file(report_dir / "series.csv", gvl::report_series_csv(stored));
            }
            if (emit_json)
                write_file(report_dir / "report.json",
                           gvl::report_to_json(stored).dump(2) + "\n");
            std::cout << gvl::report_csv(stored);
            return 0;
        }
        if (*outliers_cmd) {
            const gvl::DatasetReport stored = gvl::load_report(outliers_dir);
            const gvl::CurationSummary summary = gvl::curation_summary(stored, k);
            nlohmann::json listing = nlohmann::json::array();
            for (const auto& f : summary.outliers) {
                listing.push_back(
                    {{"episode_index", f.episode_index},
                     {"voc", std::isnan(f.voc) ? nlohmann::json(nullptr) : nlohmann::json(f.voc)},
                     {"deviation", std::isinf(f.deviation) ? nlohmann::json(nullptr)
                                                           : nlohmann::json(f.deviation)},
                     {"reason", std::string(gvl::to_string(f.reason))}});
            }
            const nlohmann::json out = {{"k", k},
                                        {"band", summary.band ? nlohmann::json(std::string(
                                                                    gvl::to_string(*summary.band)))
                                                              : nlohmann::json(nullptr)},
                                        {"outliers", listing},
                                        {"hints", summary.hints}};
            write_file(outliers_dir / "outliers.json", out.dump(2) + "\n");
            std::cout << summary.text << "\n";
            for (const auto& f : summary.outliers)
                std::cout << "episode " << f.episode_index << ": " << gvl::to_string(f.reason)
                          << "\n";
            return 0;
        }
        if (*mock_cmd) {
            gvl::OracleSpec spec;
            spec.mode = gvl::oracle_mode_from_string(mock_mode);
            spec.noise_sigma = mock_sigma;
            spec.seed = mock_seed;
            gvl::MockServer server(spec, mock_port);
            std::cout << "mock endpoint at " << server.base_url() << " (mode " << mock_mode
                      << ")\n";
            for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
        }
        if (*fixture_cmd) {
            gvl::write_fixture_dataset(fixture_dir, fixture_id, fixture_episodes, fixture_frames,
                                       fixture_seed);
            std::cout << "fixture dataset at " << fixture_dir.string() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
