// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "mmagent/backends.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace mmagent::backends {

using json = nlohmann::json;

namespace {

std::atomic<std::uint64_t> g_network_requests{0};

// FNV-1a, 64-bit. Stable across platforms and process restarts.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    auto* bytes = static_cast<const std::uint8_t*>(data);
    std::uint64_t hash = seed;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x00000100000001b3ULL;
    }
    return hash;
}

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string collapse_whitespace(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = true;  // drops leading whitespace too
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < data.size(); i += 3) {
        std::uint32_t chunk = data[i] << 16;
        if (i + 1 < data.size()) chunk |= data[i + 1] << 8;
        if (i + 2 < data.size()) chunk |= data[i + 2];
        out.push_back(alphabet[(chunk >> 18) & 0x3f]);
        out.push_back(alphabet[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < data.size() ? alphabet[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < data.size() ? alphabet[chunk & 0x3f] : '=');
    }
    return out;
}

std::string api_key(const HttpBackendConfig& config) {
    if (config.api_key_env.empty()) return {};
    const char* value = std::getenv(config.api_key_env.c_str());
    return value ? value : "";
}

int jittered_delay_ms(int base_ms, int attempt) {
    static thread_local std::mt19937 rng{std::random_device{}()};
    int ceiling = base_ms * (1 << attempt);
    std::uniform_int_distribution<int> dist(ceiling / 2, ceiling);
    return dist(rng);
}

// Issues one HTTP POST with retries on transport errors and 429s.
// Provider rejections (other 4xx) are never retried.
json post_json(const HttpBackendConfig& config, const json& body, const RetryPolicy& policy) {
    std::string last_error;
    for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(jittered_delay_ms(policy.base_delay_ms, attempt)));
        g_network_requests.fetch_add(1);

        httplib::Client client(config.base_url);
        client.set_read_timeout(config.timeout_seconds, 0);
        client.set_connection_timeout(10, 0);
        httplib::Headers headers;
        if (auto key = api_key(config); !key.empty())
            headers.emplace("Authorization", "Bearer " + key);

        auto result = client.Post(config.path, headers, body.dump(), "application/json");
        if (!result) {
            last_error = httplib::to_string(result.error());
            continue;  // transport error, retriable
        }
        if (result->status == 429) {
            last_error = "rate limited";
            continue;
        }
        if (result->status >= 400 && result->status < 500)
            throw ProviderRejection("HTTP " + std::to_string(result->status) + ": " +
                                    result->body.substr(0, 512));
        if (result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        auto parsed = json::parse(result->body, nullptr, /*allow_exceptions=*/false);
        if (parsed.is_discarded())
            throw TransportError("response is not JSON: " + result->body.substr(0, 512));
        return parsed;
    }
    throw TransportError("request to " + config.base_url + config.path + " failed after " +
                         std::to_string(policy.max_attempts) + " attempts: " + last_error);
}

}  // namespace

std::string digest_bytes(const void* data, std::size_t size) {
    return to_hex(fnv1a(data, size));
}

std::string fingerprint(const Request& request) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto mix = [&hash](const std::string& text) {
        hash = fnv1a(text.data(), text.size(), hash);
        hash = fnv1a("\x1f", 1, hash);
    };
    for (const auto& turn : request.messages) {
        mix(turn.role);
        mix(collapse_whitespace(turn.content));
    }
    for (const auto& image : request.images) {
        hash = fnv1a(image.rgb.data(), image.rgb.size(), hash);
        mix(std::to_string(image.width) + "x" + std::to_string(image.height));
    }
    mix(std::to_string(request.temperature));
    mix(std::to_string(request.max_output_tokens));
    return to_hex(hash);
}

Response ChatBackend::complete(const Request& request) {
    if (request.images.size() > kMaxImagesPerRequest)
        throw ImageLimitExceeded("request carries " + std::to_string(request.images.size()) +
                                 " images; limit is " + std::to_string(kMaxImagesPerRequest));
    gate_.acquire();
    Response response;
    try {
        response = do_complete(request);
    } catch (...) {
        gate_.release();
        throw;
    }
    gate_.release();

    calls_.fetch_add(1);
    images_.fetch_add(request.images.size());
    std::uint64_t count = request.images.size();
    std::uint64_t seen = max_images_seen_.load();
    while (count > seen && !max_images_seen_.compare_exchange_weak(seen, count)) {
    }
    std::uint64_t in = 0;
    for (const auto& turn : request.messages) in += turn.content.size();
    input_chars_.fetch_add(in);
    output_chars_.fetch_add(response.text.size());

    response.usage.calls = 1;
    response.usage.input_chars = in;
    response.usage.output_chars = response.text.size();
    response.usage.images = request.images.size();
    return response;
}

Usage ChatBackend::usage() const {
    return Usage{calls_.load(), input_chars_.load(), output_chars_.load(), images_.load()};
}

Response chat(ChatBackend& backend, const Request& request) {
    return backend.complete(request);
}

Response vision(ChatBackend& backend, const Request& request) {
    // The ceiling is also enforced inside complete(); checking here keeps the
    // failure ahead of any usage accounting.
    if (request.images.size() > kMaxImagesPerRequest)
        throw ImageLimitExceeded("vision request carries " +
                                 std::to_string(request.images.size()) + " images; limit is " +
                                 std::to_string(kMaxImagesPerRequest));
    return backend.complete(request);
}

std::vector<EmbeddingVector> EmbeddingBackend::embed(const std::vector<std::string>& texts) {
    calls_.fetch_add(1);
    auto vectors = do_embed(texts);
    if (vectors.size() != texts.size())
        throw EmbedderFailure("backend returned " + std::to_string(vectors.size()) +
                              " vectors for " + std::to_string(texts.size()) + " inputs");
    return vectors;
}

std::vector<EmbeddingVector> EmbeddingBackend::embed_images(
    const std::vector<media::Image>& images) {
    calls_.fetch_add(1);
    auto vectors = do_embed_images(images);
    if (vectors.size() != images.size())
        throw EmbedderFailure("backend returned " + std::to_string(vectors.size()) +
                              " vectors for " + std::to_string(images.size()) + " images");
    return vectors;
}

std::vector<EmbeddingVector> EmbeddingBackend::do_embed_images(
    const std::vector<media::Image>& images) {
    std::vector<std::string> labels;
    labels.reserve(images.size());
    for (const auto& image : images) labels.push_back(image.label);
    return do_embed(labels);
}

Response ScriptedChatBackend::do_complete(const Request& request) {
    std::lock_guard lock(mutex_);
    if (next_ >= script_.size())
        throw ScriptExhausted("script exhausted after " + std::to_string(script_.size()) +
                              " responses");
    const ScriptEntry& entry = script_[next_];
    if (entry.match != "*") {
        std::string fp = fingerprint(request);
        if (fp != entry.match) {
            if (strict_)
                throw ScriptMismatch("request fingerprint " + fp + " does not match scripted " +
                                     entry.match + " at position " + std::to_string(next_));
        }
    }
    ++next_;
    return Response{entry.response, {}};
}

std::vector<EmbeddingVector> ScriptedEmbeddingBackend::do_embed(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (auto it = table_.find(text); it != table_.end()) {
            out.push_back(it->second);
            continue;
        }
        // Hash-seeded unit vector: deterministic, dimension-consistent,
        // non-zero.
        std::mt19937_64 rng(fnv1a(text.data(), text.size()));
        std::normal_distribution<double> gauss(0.0, 1.0);
        EmbeddingVector vec(dimension_);
        double norm2 = 0.0;
        for (auto& v : vec) {
            v = gauss(rng);
            norm2 += v * v;
        }
        double norm = std::sqrt(norm2);
        if (norm == 0.0) {
            vec[0] = 1.0;
            norm = 1.0;
        }
        for (auto& v : vec) v /= norm;
        out.push_back(std::move(vec));
    }
    return out;
}

std::uint64_t network_request_count() {
    return g_network_requests.load();
}

Response HttpChatBackend::do_complete(const Request& request) {
    json messages = json::array();
    for (std::size_t i = 0; i < request.messages.size(); ++i) {
        const auto& turn = request.messages[i];
        bool last = i + 1 == request.messages.size();
        if (last && !request.images.empty()) {
            json parts = json::array();
            parts.push_back({{"type", "text"}, {"text", turn.content}});
            for (const auto& image : request.images) {
                media::Image scaled = image;
                int long_side = std::max(image.width, image.height);
                if (config_.max_image_dimension > 0 && long_side > config_.max_image_dimension) {
                    int height = image.height * config_.max_image_dimension / long_side;
                    scaled = media::resize_to_height(image, std::max(1, height));
                }
                parts.push_back(
                    {{"type", "image_url"},
                     {"image_url",
                      {{"url", "data:image/png;base64," +
                                   base64_encode(media::encode_png(scaled))}}}});
            }
            messages.push_back({{"role", turn.role}, {"content", std::move(parts)}});
        } else {
            messages.push_back({{"role", turn.role}, {"content", turn.content}});
        }
    }

    json body{{"model", config_.model},
              {"messages", std::move(messages)},
              {"temperature", request.temperature}};
    if (request.max_output_tokens > 0) body["max_tokens"] = request.max_output_tokens;

    json reply = post_json(config_, body, RetryPolicy{config_.max_attempts});
    if (!reply.contains("choices") || reply["choices"].empty())
        throw TransportError("chat response has no choices");
    return Response{reply["choices"][0]["message"]["content"].get<std::string>(), {}};
}

std::vector<EmbeddingVector> HttpEmbeddingBackend::do_embed(
    const std::vector<std::string>& texts) {
    json body{{"model", config_.model}, {"input", texts}};
    json reply = post_json(config_, body, RetryPolicy{config_.max_attempts});
    if (!reply.contains("data"))
        throw EmbedderFailure("embedding response has no data field");
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& item : reply["data"])
        out.push_back(item.at("embedding").get<EmbeddingVector>());
    return out;
}

std::vector<media::TranscriptPhrase> HttpASRBackend::transcribe(
    const media::MediaHandle& media) {
    json body{{"model", config_.model}, {"media", media.source()}};
    json reply;
    try {
        reply = post_json(config_, body, RetryPolicy{config_.max_attempts});
    } catch (const BackendFailure& e) {
        throw ASRFailure(e.what());
    }
    std::vector<media::TranscriptPhrase> phrases;
    for (const auto& segment : reply.value("segments", json::array())) {
        media::TranscriptPhrase phrase;
        phrase.start = media::Timestamp(
            static_cast<std::uint64_t>(std::llround(segment.at("start").get<double>())));
        phrase.end = media::Timestamp(
            static_cast<std::uint64_t>(std::llround(segment.at("end").get<double>())));
        phrase.text = segment.at("text").get<std::string>();
        phrases.push_back(std::move(phrase));
    }
    return phrases;
}

}  // namespace mmagent::backends
