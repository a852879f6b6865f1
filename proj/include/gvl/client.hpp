#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gvl/ingest.hpp"
#include "gvl/promptgen.hpp"

namespace gvl {

struct EndpointConfig {
    std::string base_url; // e.g. http://127.0.0.1:8089/v1
    std::string model_name;
    double temperature = 1.0;
    int max_output_tokens = 2048;
    double request_timeout = 120.0; // seconds
    int max_retries = 3;
    double backoff_base = 1.0; // seconds
    int max_concurrency = 4;
    int image_max_edge = 512;
    std::string api_key; // config-file credential; env OPENGVL_API_KEY read when empty
    // Test hook; replaces the real backoff sleep when set. Receives seconds.
    std::function<void(double)> sleep_fn;
};

struct RawCompletion {
    std::string text; // verbatim, possibly empty
    double latency = 0.0;
    int attempt_count = 0;
    std::string request_id;
};

// PNG-re-encoded image bytes, downscaled (never upscaled) so the longest
// edge fits image_max_edge. Deterministic for identical input files.
std::vector<unsigned char> encode_image(const FrameRef& frame, int image_max_edge);

std::string base64_encode(const unsigned char* data, std::size_t size);

// From cfg.api_key if set, else the OPENGVL_API_KEY environment variable,
// else empty (no auth header; fine for local mock endpoints).
std::string resolve_credential(const EndpointConfig& cfg);

// Bounds the number of requests in flight.
class ConcurrencyGate {
public:
    explicit ConcurrencyGate(int slots) : slots_(slots) {}
    void acquire() {
        std::unique_lock lock(m_);
        cv_.wait(lock, [&] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        {
            std::lock_guard lock(m_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    int slots_;
};

class Client {
public:
    explicit Client(EndpointConfig cfg);

    // Sends the prompt as a single user message of interleaved text and
    // data-URL image parts. 429/5xx/timeouts are retried with exponential
    // backoff and jitter; other 4xx raise PermanentError; a response that is
    // not a chat-completions envelope raises ProtocolError. Empty completion
    // text is returned as data.
    RawCompletion complete(const PromptSequence& prompt) const;

    const EndpointConfig& config() const { return cfg_; }

private:
    EndpointConfig cfg_;
    std::string credential_;
    std::unique_ptr<ConcurrencyGate> gate_;
};

} // namespace gvl
