#include "gvl/mockvlm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>

#include "gvl/errors.hpp"
#include "gvl/promptgen.hpp"
#include "gvl/rng.hpp"

namespace gvl {
namespace {

constexpr int kLabelBlock = 16;
constexpr unsigned char kLabelMarker = 77;
constexpr std::string_view kEvalMarker =
    "output the task completion percentage for the following frames";

std::string format_line(int frame_number, double value) {
    return "Frame " + std::to_string(frame_number) +
           ": Description: synthetic scene, Task Completion Percentages: " +
           format_percent(value) + "%";
}

// (frame_number, true_progress) pairs in presentation order -> response text.
std::string oracle_lines(const std::vector<std::pair<int, double>>& evals, const OracleSpec& spec,
                         std::uint64_t noise_seed) {
    if (spec.mode == OracleMode::empty) return {};
    std::mt19937_64 gen(noise_seed);
    std::string out;
    std::size_t emit = evals.size();
    if (spec.mode == OracleMode::mismatching && emit > 0) --emit; // drop the last line
    for (std::size_t i = 0; i < emit; ++i) {
        double v = evals[i].second;
        switch (spec.mode) {
            case OracleMode::perfect: break;
            case OracleMode::noisy:
                v = std::clamp(v + rng::gaussian(gen, 0.0, spec.noise_sigma), 0.0, 100.0);
                break;
            case OracleMode::constant: v = 50.0; break;
            case OracleMode::reversed: v = 100.0 - v; break;
            case OracleMode::mismatching: break;
            case OracleMode::empty: break;
        }
        if (!out.empty()) out += '\n';
        out += format_line(evals[i].first, v);
    }
    return out;
}

std::vector<unsigned char> base64_decode(std::string_view b64) {
    std::vector<unsigned char> out(3 * (b64.size() / 4) + 3);
    const int written =
        EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(b64.data()),
                        static_cast<int>(b64.size()));
    if (written < 0) return {};
    std::size_t size = static_cast<std::size_t>(written);
    for (std::size_t i = b64.size(); i > 0 && b64[i - 1] == '='; --i)
        if (size > 0) --size; // EVP_DecodeBlock counts padding bytes
    out.resize(size);
    return out;
}

std::optional<int> trailing_frame_number(const std::string& text) {
    // Last "Frame <digits>:" in the text that precedes an image.
    std::size_t pos = text.rfind("Frame ");
    while (pos != std::string::npos) {
        std::size_t i = pos + 6;
        long number = 0;
        std::size_t digits = 0;
        while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            number = number * 10 + (text[i] - '0');
            ++i;
            ++digits;
        }
        if (digits > 0 && i < text.size() && text[i] == ':')
            return static_cast<int>(number);
        pos = pos == 0 ? std::string::npos : text.rfind("Frame ", pos - 1);
    }
    return std::nullopt;
}

} // namespace

std::string_view to_string(OracleMode m) {
    switch (m) {
        case OracleMode::perfect: return "perfect";
        case OracleMode::noisy: return "noisy";
        case OracleMode::constant: return "constant";
        case OracleMode::reversed: return "reversed";
        case OracleMode::mismatching: return "mismatching";
        case OracleMode::empty: return "empty";
    }
    return "perfect";
}

OracleMode oracle_mode_from_string(std::string_view s) {
    for (OracleMode m : {OracleMode::perfect, OracleMode::noisy, OracleMode::constant,
                         OracleMode::reversed, OracleMode::mismatching, OracleMode::empty})
        if (s == to_string(m)) return m;
    throw DomainError("unknown oracle mode: " + std::string(s));
}

void encode_label_block(cv::Mat& bgr, double progress) {
    if (bgr.type() != CV_8UC3 || bgr.rows < kLabelBlock || bgr.cols < kLabelBlock)
        throw DomainError("label block needs an 8UC3 image of at least 16x16");
    const int v = static_cast<int>(std::lround(std::clamp(progress, 0.0, 100.0) * 10.0));
    const cv::Vec3b pixel(kLabelMarker, static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v & 255));
    for (int y = 0; y < kLabelBlock; ++y)
        for (int x = 0; x < kLabelBlock; ++x) bgr.at<cv::Vec3b>(y, x) = pixel;
}

std::optional<double> decode_label_block(const cv::Mat& bgr) {
    if (bgr.type() != CV_8UC3 || bgr.rows < kLabelBlock || bgr.cols < kLabelBlock)
        return std::nullopt;
    const cv::Vec3b pixel = bgr.at<cv::Vec3b>(4, 4); // interior, away from any edge artifacts
    if (pixel[0] != kLabelMarker) return std::nullopt;
    const int v = (static_cast<int>(pixel[1]) << 8) | static_cast<int>(pixel[2]);
    if (v > 1000) return std::nullopt;
    return v / 10.0;
}

std::string oracle_predict(const EvalTask& task, const OracleSpec& spec) {
    int number = 1;
    for (const ShuffledSelection& ctx : task.context_episodes)
        number += static_cast<int>(ctx.frames.size());
    std::vector<std::pair<int, double>> evals;
    evals.reserve(task.eval_selection.frames.size());
    for (const LabeledFrame& lf : task.eval_selection.frames)
        evals.emplace_back(number++, lf.true_progress);
    return oracle_lines(evals, spec, rng::mix64(spec.seed, task.eval_selection.seed));
}

void write_fixture_dataset(const std::filesystem::path& root, const std::string& dataset_id,
                           int episodes, int frames_per_episode, std::uint64_t seed) {
    if (episodes < 1 || frames_per_episode < 2)
        throw DomainError("fixture dataset needs >= 1 episode and >= 2 frames");
    std::filesystem::create_directories(root / "episodes");
    {
        std::ofstream out(root / "dataset.json");
        nlohmann::json manifest = {{"dataset_id", dataset_id},
                                   {"default_instruction", "open the door"}};
        out << manifest.dump(2) << "\n";
    }
    for (int e = 0; e < episodes; ++e) {
        const auto dir = root / "episodes" / std::to_string(e);
        std::filesystem::create_directories(dir / "frames");
        {
            std::ofstream out(dir / "episode.json");
            nlohmann::json meta = {{"instruction", "open the door"}};
            out << meta.dump(2) << "\n";
        }
        for (int t = 0; t < frames_per_episode; ++t) {
            const std::uint64_t h = rng::mix64(seed, rng::mix64(e, t));
            cv::Mat img(64, 64, CV_8UC3,
                        cv::Scalar(60 + static_cast<int>(h % 120),
                                   60 + static_cast<int>((h >> 8) % 120),
                                   60 + static_cast<int>((h >> 16) % 120)));
            // a block that drifts with time, so frames look like motion
            const int x0 = 20 + (40 * t) / std::max(1, frames_per_episode - 1);
            cv::Rect moving(std::min(x0, 56), 40, 8, 8);
            img(moving).setTo(cv::Scalar(230, 230, 230));
            encode_label_block(img, 100.0 * t / (frames_per_episode - 1));
            char name[16];
            std::snprintf(name, sizeof(name), "%06d.png", t);
            if (!cv::imwrite((dir / "frames" / name).string(), img))
                throw IoError("cannot write fixture frame " + (dir / "frames" / name).string());
        }
    }
}

MockServer::MockServer(OracleSpec spec, int port)
    : spec_(spec), server_(std::make_unique<httplib::Server>()) {
    const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        requests_.fetch_add(1);
        const int now = in_flight_.fetch_add(1) + 1;
        int peak = high_water_.load();
        while (now > peak && !high_water_.compare_exchange_weak(peak, now)) {
        }
        if (delay_ > 0.0)
            std::this_thread::sleep_for(std::chrono::duration<double>(delay_));
        int status = 200;
        std::string body;
        handle(req.body, status, body);
        res.status = status;
        res.set_content(body, "application/json");
        in_flight_.fetch_sub(1);
    };
    server_->Post("/v1/chat/completions", handler);
    server_->Post("/chat/completions", handler);

    // httplib's defaults include SO_REUSEPORT, which would let two servers
    // share one port silently; keep only SO_REUSEADDR so a taken port fails.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
                   sizeof(yes));
    });

    if (port == 0) {
        port_ = server_->bind_to_any_port("127.0.0.1");
        if (port_ <= 0) throw BindError("cannot bind mock server to an ephemeral port");
    } else {
        if (!server_->bind_to_port("127.0.0.1", port))
            throw BindError("cannot bind mock server to port " + std::to_string(port));
        port_ = port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

MockServer::~MockServer() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

void MockServer::set_script(std::vector<ScriptStep> steps, bool repeat_last) {
    std::lock_guard lock(script_mutex_);
    script_ = std::move(steps);
    repeat_last_ = repeat_last;
}

void MockServer::set_delay(double seconds) { delay_ = seconds; }

void MockServer::handle(const std::string& body, int& status_out, std::string& body_out) {
    {
        std::lock_guard lock(script_mutex_);
        if (!script_.empty()) {
            const ScriptStep step = script_.front();
            if (script_.size() > 1 || !repeat_last_) script_.erase(script_.begin());
            status_out = step.status;
            body_out = step.body;
            return;
        }
    }

    std::vector<std::pair<int, double>> evals;
    std::uint64_t content_seed = spec_.seed;
    try {
        const auto req = nlohmann::json::parse(body);
        const auto& content = req.at("messages").at(0).at("content");
        bool in_eval_section = false;
        std::string last_text;
        for (const auto& part : content) {
            const std::string type = part.value("type", "");
            if (type == "text") {
                last_text = part.value("text", "");
                if (last_text.find(kEvalMarker) != std::string::npos) in_eval_section = true;
                continue;
            }
            if (type != "image_url") continue;
            const bool is_eval = in_eval_section;
            const auto frame_number = trailing_frame_number(last_text);
            last_text.clear();
            if (!is_eval || !frame_number) continue;
            const std::string url = part.at("image_url").at("url").get<std::string>();
            const auto comma = url.find(',');
            if (comma == std::string::npos) throw DomainError("image url is not a data URL");
            const auto bytes = base64_decode(std::string_view(url).substr(comma + 1));
            const cv::Mat img = cv::imdecode(bytes, cv::IMREAD_COLOR);
            const auto progress = img.empty() ? std::nullopt : decode_label_block(img);
            if (!progress) throw DomainError("eval frame carries no label block");
            evals.emplace_back(*frame_number, *progress);
            content_seed = rng::mix64(content_seed, static_cast<std::uint64_t>(*frame_number));
            content_seed = rng::mix64(content_seed,
                                      static_cast<std::uint64_t>(std::lround(*progress * 10.0)));
        }
        if (evals.empty()) throw DomainError("request contains no eval frames");
    } catch (const std::exception& e) {
        status_out = 400;
        body_out = nlohmann::json{{"error", {{"message", e.what()}}}}.dump();
        return;
    }

    const std::string text = oracle_lines(evals, spec_, content_seed);
    const nlohmann::json envelope = {
        {"id", "mock-" + std::to_string(requests_.load())},
        {"object", "chat.completion"},
        {"created", 0},
        {"model", "mock-vlm"},
        {"choices",
         nlohmann::json::array(
             {nlohmann::json{{"index", 0},
                             {"message", {{"role", "assistant"}, {"content", text}}},
                             {"finish_reason", "stop"}}})}};
    status_out = 200;
    body_out = envelope.dump();
}

} // namespace gvl
