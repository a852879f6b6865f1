#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <opencv2/core.hpp>

#include "gvl/promptgen.hpp"

namespace httplib {
class Server;
}

namespace gvl {

enum class OracleMode { perfect, noisy, constant, reversed, mismatching, empty };

std::string_view to_string(OracleMode m);
OracleMode oracle_mode_from_string(std::string_view s);

struct OracleSpec {
    OracleMode mode = OracleMode::perfect;
    double noise_sigma = 0.0; // percent; noisy mode only
    std::uint64_t seed = 0;
};

// Test frames carry their true progress in the top-left 16x16 block:
// v = lround(progress * 10) in [0,1000], painted as BGR (77, v>>8, v&255).
// The marker byte 77 distinguishes labeled fixtures from ordinary images.
void encode_label_block(cv::Mat& bgr, double progress);
std::optional<double> decode_label_block(const cv::Mat& bgr);

// Renders the oracle's answer for the eval frames of `task` in the exact
// response format the prompt requests. Deterministic given (task, spec);
// noisy values are clamped to [0,100] like a percent-answering model.
std::string oracle_predict(const EvalTask& task, const OracleSpec& spec);

// Synthetic dataset in the ingest layout: every frame is a deterministic
// 64x64 scene with the label block encoding 100*t/(T-1).
void write_fixture_dataset(const std::filesystem::path& root, const std::string& dataset_id,
                           int episodes, int frames_per_episode, std::uint64_t seed);

struct ScriptStep {
    int status = 200;
    std::string body; // raw response body; content type application/json
};

// Local chat-completions endpoint backed by the oracle. Eval frames are
// recovered from the request itself: the label block is read back out of
// each inline image that follows the "random order" instruction text.
class MockServer {
public:
    // port 0 picks a free port. Throws BindError when the port is taken.
    explicit MockServer(OracleSpec spec, int port = 0);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    // Scripted responses consumed before oracle behavior kicks in; with
    // repeat_last the final step answers every later request.
    void set_script(std::vector<ScriptStep> steps, bool repeat_last = false);
    void set_delay(double seconds); // fixed artificial latency per request

    int request_count() const { return requests_.load(); }
    int concurrent_high_water() const { return high_water_.load(); }

private:
    void handle(const std::string& body, int& status_out, std::string& body_out);

    OracleSpec spec_;
    int port_ = 0;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::mutex script_mutex_;
    std::vector<ScriptStep> script_;
    bool repeat_last_ = false;
    double delay_ = 0.0;
    std::atomic<int> requests_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> high_water_{0};
};

} // namespace gvl
