// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mmagent/errors.hpp"
#include "mmagent/media.hpp"

namespace mmagent::backends {

MMAGENT_BACKEND_ERROR_TYPE(TransportError);
MMAGENT_BACKEND_ERROR_TYPE(RateLimited);
MMAGENT_BACKEND_ERROR_TYPE(ProviderRejection);
MMAGENT_BACKEND_ERROR_TYPE(ASRFailure);
MMAGENT_BACKEND_ERROR_TYPE(ScriptExhausted);
MMAGENT_BACKEND_ERROR_TYPE(ScriptMismatch);
MMAGENT_ERROR_TYPE(ImageLimitExceeded);
MMAGENT_ERROR_TYPE(EmbedderFailure);

// Provider-imposed ceiling on images per vision call.
inline constexpr std::size_t kMaxImagesPerRequest = 10;

using EmbeddingVector = std::vector<double>;

struct ChatTurn {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct Request {
    std::vector<ChatTurn> messages;
    std::vector<media::Image> images;  // attached to the final user turn
    double temperature = 0.0;
    int max_output_tokens = 0;  // 0 = provider default
};

struct Usage {
    std::uint64_t calls = 0;
    std::uint64_t input_chars = 0;
    std::uint64_t output_chars = 0;
    std::uint64_t images = 0;
};

struct Response {
    std::string text;
    Usage usage;
};

// Stable content hash over the normalized request: whitespace-collapsed
// message text plus image payload digests. Used by traces and script matching.
std::string fingerprint(const Request& request);
std::string digest_bytes(const void* data, std::size_t size);

// Bounds concurrent in-flight calls per backend.
class ConcurrencyGate {
public:
    explicit ConcurrencyGate(int limit = 4) : limit_(limit) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return in_flight_ < limit_; });
        ++in_flight_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            --in_flight_;
        }
        cv_.notify_one();
    }

private:
    int limit_;
    int in_flight_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

// Chat and vision share one completion interface; vision requests simply
// carry images. The non-virtual entry point enforces the image ceiling
// before anything reaches a provider, bounds in-flight concurrency
// (default 4), and accumulates usage (thread-safe).
class ChatBackend {
public:
    explicit ChatBackend(int concurrency_limit = 4) : gate_(concurrency_limit) {}
    virtual ~ChatBackend() = default;

    Response complete(const Request& request);

    std::uint64_t calls() const { return calls_.load(); }
    std::uint64_t max_images_seen() const { return max_images_seen_.load(); }
    Usage usage() const;

private:
    virtual Response do_complete(const Request& request) = 0;

    ConcurrencyGate gate_;
    std::atomic<std::uint64_t> calls_{0};
    std::atomic<std::uint64_t> max_images_seen_{0};
    std::atomic<std::uint64_t> input_chars_{0};
    std::atomic<std::uint64_t> output_chars_{0};
    std::atomic<std::uint64_t> images_{0};
};

Response chat(ChatBackend& backend, const Request& request);
Response vision(ChatBackend& backend, const Request& request);

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
    std::vector<EmbeddingVector> embed_images(const std::vector<media::Image>& images);

    std::uint64_t calls() const { return calls_.load(); }

private:
    virtual std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) = 0;
    // Defaults to embedding each image's label; HTTP backends override with
    // a real image-embedding call.
    virtual std::vector<EmbeddingVector> do_embed_images(const std::vector<media::Image>& images);

    std::atomic<std::uint64_t> calls_{0};
};

class ASRBackend {
public:
    virtual ~ASRBackend() = default;
    virtual std::vector<media::TranscriptPhrase> transcribe(const media::MediaHandle& media) = 0;
};

// ---------------------------------------------------------------------------
// Scripted backends: deterministic stand-ins for remote models. An entry
// matches a specific request fingerprint or "*"; consumed entries are never
// reused. In strict mode an unmatched request is an error.

struct ScriptEntry {
    std::string match = "*";  // fingerprint or wildcard
    std::string response;
};

class ScriptedChatBackend final : public ChatBackend {
public:
    ScriptedChatBackend() = default;
    explicit ScriptedChatBackend(std::vector<ScriptEntry> script, bool strict = false)
        : script_(std::move(script)), strict_(strict) {}

    void push(std::string response) { script_.push_back({"*", std::move(response)}); }
    void push(std::string match, std::string response) {
        script_.push_back({std::move(match), std::move(response)});
    }
    std::size_t remaining() const {
        std::lock_guard lock(mutex_);
        return script_.size() - next_;
    }

private:
    Response do_complete(const Request& request) override;

    std::vector<ScriptEntry> script_;
    std::size_t next_ = 0;
    bool strict_ = false;
    mutable std::mutex mutex_;  // script consumption under concurrent callers
};

class ScriptedEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit ScriptedEmbeddingBackend(std::size_t dimension = 8) : dimension_(dimension) {}

    // Pinned vectors for specific inputs; everything else falls back to a
    // deterministic hash-seeded unit vector so arbitrary queries stay
    // reproducible offline.
    void set(const std::string& key, EmbeddingVector vec) { table_[key] = std::move(vec); }
    std::size_t dimension() const { return dimension_; }

private:
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;

    std::size_t dimension_;
    std::map<std::string, EmbeddingVector> table_;
};

class ScriptedASRBackend final : public ASRBackend {
public:
    ScriptedASRBackend() = default;
    explicit ScriptedASRBackend(std::vector<media::TranscriptPhrase> phrases)
        : phrases_(std::move(phrases)) {}

    std::vector<media::TranscriptPhrase> transcribe(const media::MediaHandle&) override {
        return phrases_;
    }

private:
    std::vector<media::TranscriptPhrase> phrases_;
};

// ---------------------------------------------------------------------------
// HTTP backends for hosted model endpoints (chat-completions style wire
// format). Keys come from the environment; only the variable name is
// configured.

struct HttpBackendConfig {
    std::string base_url;             // e.g. "https://api.example.com"
    std::string path;                 // e.g. "/v1/chat/completions"
    std::string model;
    std::string api_key_env;          // name of the env var holding the key
    int max_image_dimension = 768;    // long-side downscale before upload
    int max_attempts = 3;             // transport/rate-limit retries
    int timeout_seconds = 120;
};

struct RetryPolicy {
    int max_attempts = 3;
    int base_delay_ms = 500;
};

// Number of HTTP requests issued process-wide; scripted runs must leave
// this untouched.
std::uint64_t network_request_count();

class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {}

private:
    Response do_complete(const Request& request) override;
    HttpBackendConfig config_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(HttpBackendConfig config) : config_(std::move(config)) {}

private:
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;
    HttpBackendConfig config_;
};

class HttpASRBackend final : public ASRBackend {
public:
    explicit HttpASRBackend(HttpBackendConfig config) : config_(std::move(config)) {}
    std::vector<media::TranscriptPhrase> transcribe(const media::MediaHandle& media) override;

private:
    HttpBackendConfig config_;
};

// ---------------------------------------------------------------------------

// The full complement of model services a session may touch. Reasoner and
// critic are configured independently so different models can fill the two
// roles.
struct BackendSet {
    std::shared_ptr<ChatBackend> reasoner;
    std::shared_ptr<ChatBackend> critic;
    std::shared_ptr<ChatBackend> vit;
    std::shared_ptr<EmbeddingBackend> embedder;
    std::shared_ptr<ASRBackend> asr;
    std::map<std::string, std::shared_ptr<ChatBackend>> capabilities;
};

}  // namespace mmagent::backends
