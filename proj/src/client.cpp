#include "gvl/client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gvl/errors.hpp"

namespace gvl {
namespace {

struct SplitUrl {
    std::string origin; // scheme://host:port
    std::string path_prefix;
};

SplitUrl split_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw DomainError("endpoint URL needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

double jittered(double seconds) {
    thread_local std::mt19937_64 gen{std::random_device{}()};
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53; // [0,1)
    return seconds * (0.8 + 0.4 * u);
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

} // namespace

std::vector<unsigned char> encode_image(const FrameRef& frame, int image_max_edge) {
    cv::Mat img = cv::imread(frame.image_path.string(), cv::IMREAD_COLOR);
    if (img.empty())
        throw FrameDecodeError("cannot decode " + frame.image_path.string(), -1, frame.timestep);
    const int longest = std::max(img.cols, img.rows);
    if (image_max_edge > 0 && longest > image_max_edge) {
        const double scale = static_cast<double>(image_max_edge) / longest;
        cv::Mat resized;
        cv::resize(img, resized,
                   cv::Size(std::max(1, static_cast<int>(std::lround(img.cols * scale))),
                            std::max(1, static_cast<int>(std::lround(img.rows * scale)))),
                   0, 0, cv::INTER_AREA);
        img = resized;
    }
    std::vector<unsigned char> bytes;
    if (!cv::imencode(".png", img, bytes))
        throw FrameDecodeError("cannot re-encode " + frame.image_path.string(), -1,
                               frame.timestep);
    return bytes;
}

std::string base64_encode(const unsigned char* data, std::size_t size) {
    std::string out(4 * ((size + 2) / 3) + 1, '\0');
    const int written =
        EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data,
                        static_cast<int>(size));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

std::string resolve_credential(const EndpointConfig& cfg) {
    if (!cfg.api_key.empty()) return cfg.api_key;
    if (const char* env = std::getenv("OPENGVL_API_KEY")) return env;
    return {};
}

Client::Client(EndpointConfig cfg)
    : cfg_(std::move(cfg)),
      credential_(resolve_credential(cfg_)),
      gate_(std::make_unique<ConcurrencyGate>(std::max(1, cfg_.max_concurrency))) {}

RawCompletion Client::complete(const PromptSequence& prompt) const {
    nlohmann::json content = nlohmann::json::array();
    for (const PromptPart& part : prompt.parts) {
        if (part.kind == PromptPart::Kind::text) {
            content.push_back({{"type", "text"}, {"text", part.text}});
        } else {
            const auto bytes = encode_image(part.image, cfg_.image_max_edge);
            const std::string url =
                "data:image/png;base64," + base64_encode(bytes.data(), bytes.size());
            content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
        }
    }
    nlohmann::json body = {{"model", cfg_.model_name},
                           {"temperature", cfg_.temperature},
                           {"max_tokens", cfg_.max_output_tokens},
                           {"messages", nlohmann::json::array({nlohmann::json{
                                            {"role", "user"}, {"content", content}}})}};
    const std::string payload = body.dump();

    const SplitUrl url = split_url(cfg_.base_url);
    std::string path = url.path_prefix;
    static constexpr std::string_view kRoute = "/chat/completions";
    if (path.size() < kRoute.size() ||
        path.compare(path.size() - kRoute.size(), kRoute.size(), kRoute) != 0)
        path += kRoute;

    gate_->acquire();
    struct GateRelease {
        ConcurrencyGate* gate;
        ~GateRelease() { gate->release(); }
    } release{gate_.get()};

    const auto started = std::chrono::steady_clock::now();
    RawCompletion out;
    std::string last_failure = "no attempt made";
    for (int attempt = 1; attempt <= cfg_.max_retries + 1; ++attempt) {
        httplib::Client http(url.origin);
        const auto timeout_s = static_cast<time_t>(cfg_.request_timeout);
        const auto timeout_us = static_cast<time_t>(
            (cfg_.request_timeout - static_cast<double>(timeout_s)) * 1e6);
        http.set_connection_timeout(timeout_s, timeout_us);
        http.set_read_timeout(timeout_s, timeout_us);
        http.set_write_timeout(timeout_s, timeout_us);
        httplib::Headers headers;
        if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);

        out.attempt_count = attempt;
        httplib::Result res = http.Post(path, headers, payload, "application/json");
        if (res) {
            if (res->status == 200) {
                nlohmann::json envelope;
                try {
                    envelope = nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception&) {
                    throw ProtocolError("response body is not JSON");
                }
                if (!envelope.is_object() || !envelope.contains("choices") ||
                    !envelope["choices"].is_array() || envelope["choices"].empty() ||
                    !envelope["choices"][0].contains("message") ||
                    !envelope["choices"][0]["message"].is_object())
                    throw ProtocolError("response lacks choices[0].message");
                const auto& message = envelope["choices"][0]["message"];
                if (message.contains("content") && message["content"].is_string())
                    out.text = message["content"].get<std::string>();
                else
                    out.text.clear(); // null/absent content counts as an empty completion
                out.request_id = envelope.value("id", std::string{});
                out.latency =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                        .count();
                return out;
            }
            if (!retryable_status(res->status)) {
                if (res->status >= 400 && res->status < 500)
                    throw PermanentError("endpoint rejected request with status " +
                                         std::to_string(res->status));
                throw ProtocolError("unexpected status " + std::to_string(res->status));
            }
            last_failure = "status " + std::to_string(res->status);
        } else {
            last_failure = "transport error (" + httplib::to_string(res.error()) + ")";
        }
        if (attempt <= cfg_.max_retries) {
            const double delay = jittered(cfg_.backoff_base * std::pow(2.0, attempt - 1));
            if (cfg_.sleep_fn)
                cfg_.sleep_fn(delay);
            else
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
    }
    throw TransientError(last_failure + " after " + std::to_string(out.attempt_count) +
                         " attempts");
}

} // namespace gvl
