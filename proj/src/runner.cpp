#include "gvl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "gvl/errors.hpp"
#include "gvl/parser.hpp"
#include "gvl/promptgen.hpp"
#include "gvl/rng.hpp"
#include "gvl/sampler.hpp"

namespace gvl {
namespace {

std::string utc_now() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("short write to " + p.string());
}

std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

nlohmann::json number_or_null(double v) {
    if (std::isnan(v) || std::isinf(v)) return nullptr;
    return v;
}

// Scores one parsed response; fills voc/degenerate/predictions on ok.
void score_episode(EpisodeResult& result, const PredictionSet& parsed, Method method) {
    result.status = parsed.status;
    if (parsed.status != ParseStatus::ok) return;
    const std::vector<double> presented = values_in_presentation_order(parsed);
    result.predictions_temporal = unshuffle(presented, result.permutation);
    const Correlation c = voc(result.predictions_temporal, method);
    result.voc = c.value;
    result.degenerate = c.degenerate;
}

EpisodeResult evaluate_episode(const RunConfig& cfg, const DatasetHandle& handle,
                               const Client& client, std::int64_t index,
                               const std::filesystem::path& raw_dir) {
    const EpisodeRecord episode = load_episode(handle, index);

    const std::uint64_t sample_seed =
        rng::derive_seed(cfg.global_seed, handle.dataset_id, static_cast<std::uint64_t>(index),
                         "sample");
    const std::vector<LabeledFrame> eval_frames =
        sample_frames(episode, cfg.frames_per_episode, sample_seed);
    const std::uint64_t shuffle_seed =
        rng::derive_seed(cfg.global_seed, handle.dataset_id, static_cast<std::uint64_t>(index),
                         "shuffle");
    const ShuffledSelection eval_sel = shuffle(eval_frames, shuffle_seed);

    EvalTask task;
    task.instruction = episode.instruction;
    task.starting_frame = episode.frames.front();
    task.eval_selection = eval_sel;
    task.shots = cfg.shots;

    // Seeded context donors: never the eval episode, distinct across slots
    // until the dataset runs out of candidates.
    std::vector<std::int64_t> candidates;
    for (std::int64_t idx : handle.episode_indices)
        if (idx != index) candidates.push_back(idx);
    std::vector<std::int64_t> used;
    for (int slot = 0; slot < cfg.shots; ++slot) {
        if (candidates.empty())
            throw EmptyDatasetError("no context donor available for episode " +
                                    std::to_string(index));
        std::mt19937_64 gen(rng::derive_seed(cfg.global_seed, handle.dataset_id,
                                             static_cast<std::uint64_t>(index),
                                             "context_" + std::to_string(slot)));
        std::vector<std::int64_t> fresh;
        for (std::int64_t c : candidates)
            if (std::find(used.begin(), used.end(), c) == used.end()) fresh.push_back(c);
        const auto& pool = fresh.empty() ? candidates : fresh;
        const std::int64_t donor =
            pool[static_cast<std::size_t>(rng::bounded(gen, pool.size()))];
        used.push_back(donor);
        const EpisodeRecord donor_episode = load_episode(handle, donor);
        const std::vector<LabeledFrame> ctx_frames =
            sample_frames(donor_episode, cfg.effective_context_frames(), gen());
        task.context_episodes.push_back(shuffle(ctx_frames, gen()));
    }

    const PromptSequence prompt = build_prompt(task);

    EpisodeResult result;
    result.episode_index = index;
    result.seed = sample_seed;
    result.permutation = eval_sel.permutation;
    result.first_frame_number = prompt.first_eval_number;
    for (const LabeledFrame& lf : eval_frames) result.frame_timesteps.push_back(lf.frame.timestep);

    std::string raw_text;
    try {
        raw_text = client.complete(prompt).text;
    } catch (const TransientError& e) {
        result.error_note = e.what();
    } catch (const PermanentError& e) {
        result.error_note = e.what();
    } catch (const ProtocolError& e) {
        result.error_note = e.what();
    }

    const std::string raw_name = "episode_" + std::to_string(index) + ".txt";
    write_text_file(raw_dir / raw_name, raw_text);
    result.raw_response_path = "raw/" + raw_name;

    if (result.error_note.empty()) {
        const PredictionSet parsed = parse_predictions(
            raw_text, result.first_frame_number, static_cast<int>(eval_sel.frames.size()));
        score_episode(result, parsed, cfg.method);
    } else {
        result.status = ParseStatus::empty;
    }
    return result;
}

} // namespace

DatasetReport run_evaluation(const RunConfig& cfg) {
    const std::string started = utc_now();
    const DatasetHandle handle = open_dataset(cfg.dataset_root);

    std::vector<std::int64_t> indices = cfg.episode_list;
    if (indices.empty()) {
        const std::size_t n = std::min<std::size_t>(
            handle.episode_indices.size(), static_cast<std::size_t>(cfg.episodes_per_dataset));
        indices.assign(handle.episode_indices.begin(),
                       handle.episode_indices.begin() + static_cast<std::ptrdiff_t>(n));
    }

    const auto raw_dir = cfg.out_dir / "raw";
    std::filesystem::create_directories(raw_dir);

    const Client client(cfg.endpoint);
    std::vector<EpisodeResult> results(indices.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const std::size_t workers = std::max<std::size_t>(
        1, std::min<std::size_t>(indices.size(),
                                 static_cast<std::size_t>(cfg.endpoint.max_concurrency)));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= indices.size()) return;
                {
                    std::lock_guard lock(failure_mutex);
                    if (failure) return;
                }
                try {
                    results[i] = evaluate_episode(cfg, handle, client, indices[i], raw_dir);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::sort(results.begin(), results.end(),
              [](const EpisodeResult& a, const EpisodeResult& b) {
                  return a.episode_index < b.episode_index;
              });

    DatasetReport report;
    report.config = cfg;
    report.model = cfg.endpoint.model_name;
    report.dataset_id = handle.dataset_id;
    report.shots = cfg.shots;
    report.episodes = std::move(results);
    report.stats = aggregate(report.episodes);
    if (report.stats.has_stats) report.band = classify_dataset(report.stats);
    report.outliers = flag_outliers(report.episodes);

    write_report(report, cfg.out_dir);
    const nlohmann::json meta = {{"started_at", started},
                                 {"finished_at", utc_now()},
                                 {"episodes", report.episodes.size()}};
    write_text_file(cfg.out_dir / "run_meta.json", meta.dump(2) + "\n");
    return report;
}

nlohmann::json report_to_json(const DatasetReport& report) {
    nlohmann::json episodes = nlohmann::json::array();
    for (const EpisodeResult& r : report.episodes) {
        nlohmann::json e = {{"index", r.episode_index},
                            {"status", std::string(to_string(r.status))},
                            {"voc", r.status == ParseStatus::ok ? nlohmann::json(r.voc)
                                                                : nlohmann::json(nullptr)},
                            {"degenerate", r.degenerate},
                            {"predictions_temporal", r.predictions_temporal},
                            {"frame_timesteps", r.frame_timesteps},
                            {"permutation", r.permutation},
                            {"first_frame_number", r.first_frame_number},
                            {"seed", r.seed},
                            {"raw_response_path", r.raw_response_path},
                            {"error_note", r.error_note}};
        episodes.push_back(std::move(e));
    }

    nlohmann::json outliers = nlohmann::json::array();
    for (const OutlierFlag& f : report.outliers) {
        outliers.push_back({{"episode_index", f.episode_index},
                            {"voc", number_or_null(f.voc)},
                            {"dataset_mean", f.dataset_mean},
                            {"dataset_std", f.dataset_std},
                            {"deviation", number_or_null(f.deviation)},
                            {"reason", std::string(to_string(f.reason))}});
    }

    const AggregateStats& s = report.stats;
    nlohmann::json stats = {
        {"n_ok", s.n_ok},
        {"n_mismatch", s.n_mismatch},
        {"n_empty", s.n_empty},
        {"voc_mean", s.has_stats ? nlohmann::json(s.voc_mean) : nlohmann::json(nullptr)},
        {"voc_std", s.has_stats ? nlohmann::json(s.voc_std) : nlohmann::json(nullptr)},
        {"voc_stderr", s.has_stats ? nlohmann::json(s.voc_stderr) : nlohmann::json(nullptr)}};

    const RunConfig& c = report.config;
    nlohmann::json config = {{"dataset_root", c.dataset_root.string()},
                             {"base_url", c.endpoint.base_url},
                             {"temperature", c.endpoint.temperature},
                             {"max_output_tokens", c.endpoint.max_output_tokens},
                             {"request_timeout", c.endpoint.request_timeout},
                             {"max_retries", c.endpoint.max_retries},
                             {"backoff_base", c.endpoint.backoff_base},
                             {"max_concurrency", c.endpoint.max_concurrency},
                             {"image_max_edge", c.endpoint.image_max_edge},
                             {"episodes_per_dataset", c.episodes_per_dataset},
                             {"frames_per_episode", c.frames_per_episode},
                             {"context_frames", c.effective_context_frames()},
                             {"method", std::string(to_string(c.method))},
                             {"global_seed", c.global_seed}};

    return nlohmann::json{{"config", std::move(config)},
                          {"model", report.model},
                          {"dataset_id", report.dataset_id},
                          {"shots", report.shots},
                          {"episodes", std::move(episodes)},
                          {"stats", std::move(stats)},
                          {"band", report.band ? nlohmann::json(std::string(to_string(*report.band)))
                                               : nlohmann::json(nullptr)},
                          {"outliers", std::move(outliers)}};
}

DatasetReport report_from_json(const nlohmann::json& j) {
    DatasetReport report;
    const auto& config = j.at("config");
    report.config.dataset_root = config.at("dataset_root").get<std::string>();
    report.config.endpoint.base_url = config.at("base_url").get<std::string>();
    report.config.endpoint.temperature = config.at("temperature").get<double>();
    report.config.endpoint.max_output_tokens = config.at("max_output_tokens").get<int>();
    report.config.endpoint.request_timeout = config.at("request_timeout").get<double>();
    report.config.endpoint.max_retries = config.at("max_retries").get<int>();
    report.config.endpoint.backoff_base = config.at("backoff_base").get<double>();
    report.config.endpoint.max_concurrency = config.at("max_concurrency").get<int>();
    report.config.endpoint.image_max_edge = config.at("image_max_edge").get<int>();
    report.config.episodes_per_dataset = config.at("episodes_per_dataset").get<int>();
    report.config.frames_per_episode = config.at("frames_per_episode").get<int>();
    report.config.context_frames = config.at("context_frames").get<int>();
    report.config.method = method_from_string(config.at("method").get<std::string>());
    report.config.global_seed = config.at("global_seed").get<std::uint64_t>();

    report.model = j.at("model").get<std::string>();
    report.config.endpoint.model_name = report.model;
    report.dataset_id = j.at("dataset_id").get<std::string>();
    report.shots = j.at("shots").get<int>();
    report.config.shots = report.shots;

    for (const auto& e : j.at("episodes")) {
        EpisodeResult r;
        r.episode_index = e.at("index").get<std::int64_t>();
        r.status = parse_status_from_string(e.at("status").get<std::string>());
        if (!e.at("voc").is_null()) r.voc = e.at("voc").get<double>();
        r.degenerate = e.at("degenerate").get<bool>();
        r.predictions_temporal = e.at("predictions_temporal").get<std::vector<double>>();
        r.frame_timesteps = e.at("frame_timesteps").get<std::vector<int>>();
        r.permutation = e.at("permutation").get<std::vector<int>>();
        r.first_frame_number = e.at("first_frame_number").get<int>();
        r.seed = e.at("seed").get<std::uint64_t>();
        r.raw_response_path = e.at("raw_response_path").get<std::string>();
        r.error_note = e.at("error_note").get<std::string>();
        report.episodes.push_back(std::move(r));
    }

    const auto& stats = j.at("stats");
    report.stats.n_ok = stats.at("n_ok").get<int>();
    report.stats.n_mismatch = stats.at("n_mismatch").get<int>();
    report.stats.n_empty = stats.at("n_empty").get<int>();
    report.stats.has_stats = !stats.at("voc_mean").is_null();
    if (report.stats.has_stats) {
        report.stats.voc_mean = stats.at("voc_mean").get<double>();
        report.stats.voc_std = stats.at("voc_std").get<double>();
        report.stats.voc_stderr = stats.at("voc_stderr").get<double>();
    }

    if (!j.at("band").is_null())
        report.band = band_from_string(j.at("band").get<std::string>());

    for (const auto& o : j.at("outliers")) {
        OutlierFlag f;
        f.episode_index = o.at("episode_index").get<std::int64_t>();
        f.voc = o.at("voc").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                      : o.at("voc").get<double>();
        f.dataset_mean = o.at("dataset_mean").get<double>();
        f.dataset_std = o.at("dataset_std").get<double>();
        f.deviation = o.at("deviation").is_null() ? -std::numeric_limits<double>::infinity()
                                                  : o.at("deviation").get<double>();
        f.reason = flag_reason_from_string(o.at("reason").get<std::string>());
        report.outliers.push_back(f);
    }
    return report;
}

void write_report(const DatasetReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
}

DatasetReport load_report(const std::filesystem::path& dir) {
    const auto path = dir / "report.json";
    if (!std::filesystem::exists(path)) throw IoError("missing report " + path.string());
    return report_from_json(nlohmann::json::parse(read_text_file(path)));
}

DatasetReport recompute_from_raw(const std::filesystem::path& dir) {
    DatasetReport report = load_report(dir);
    for (EpisodeResult& r : report.episodes) {
        const std::string raw_text = read_text_file(dir / r.raw_response_path);
        r.predictions_temporal.clear();
        r.voc = 0.0;
        r.degenerate = false;
        if (!r.error_note.empty()) {
            r.status = ParseStatus::empty;
            continue;
        }
        const PredictionSet parsed = parse_predictions(raw_text, r.first_frame_number,
                                                       static_cast<int>(r.permutation.size()));
        score_episode(r, parsed, report.config.method);
    }
    report.stats = aggregate(report.episodes);
    report.band.reset();
    if (report.stats.has_stats) report.band = classify_dataset(report.stats);
    report.outliers = flag_outliers(report.episodes);
    return report;
}

std::string report_csv(const DatasetReport& report) {
    std::string csv = "Model,Dataset,Ctx,VOC Mean,VOC Std,Std Err,Mism.,Empty\n";
    csv += report.model + "," + report.dataset_id + "," + std::to_string(report.shots) + ",";
    if (report.stats.has_stats) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f", report.stats.voc_mean,
                      report.stats.voc_std, report.stats.voc_stderr);
        csv += buf;
    } else {
        csv += ",,";
    }
    csv += "," + std::to_string(report.stats.n_mismatch) + "," +
           std::to_string(report.stats.n_empty) + "\n";
    return csv;
}

std::string report_series_csv(const DatasetReport& report) {
    std::string csv = "episode,timestep,prediction\n";
    char buf[64];
    for (const EpisodeResult& r : report.episodes) {
        if (r.status != ParseStatus::ok) continue;
        for (std::size_t i = 0; i < r.predictions_temporal.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%lld,%d,%.4f",
                          static_cast<long long>(r.episode_index), r.frame_timesteps[i],
                          r.predictions_temporal[i]);
            csv += buf;
            csv += '\n';
        }
    }
    return csv;
}

} // namespace gvl
