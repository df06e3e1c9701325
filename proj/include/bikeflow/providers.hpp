#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "bikeflow/errors.hpp"
#include "bikeflow/raster.hpp"

namespace bikeflow {

enum class ProviderErrorKind {
    timeout,
    rate_limited,
    unavailable,  // 5xx or dropped connection
    malformed_response,
    auth_failure,
    invalid_request,
    mock_miss,
    fixture_miss,
    no_imagery,
};

[[nodiscard]] std::string_view to_string(ProviderErrorKind kind);
[[nodiscard]] bool is_retryable(ProviderErrorKind kind) noexcept;

class ProviderError : public Error {
  public:
    ProviderError(ProviderErrorKind kind, const std::string& message, int attempts = 1)
        : Error(std::string(to_string(kind)), message), kind_(kind), attempts_(attempts) {}

    [[nodiscard]] ProviderErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] int attempts() const noexcept { return attempts_; }
    [[nodiscard]] bool retryable() const noexcept { return is_retryable(kind_); }

  private:
    ProviderErrorKind kind_;
    int attempts_;
};

struct ProviderConfig {
    std::string endpoint;
    std::string credential_ref;  // name of the environment variable holding the token
    std::string model;
    double timeout_s = 60.0;
    int max_retries = 3;
    double retry_backoff_s = 1.0;
    int concurrency = 4;
    nlohmann::json params = nlohmann::json::object();  // passed through to the backend untouched

    void validate() const;
};

[[nodiscard]] ProviderConfig provider_config_from_json(const nlohmann::json& j);

struct EmbeddingVector {
    std::vector<double> values;

    [[nodiscard]] std::size_t dimension() const noexcept { return values.size(); }
    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

struct EditOptions {
    int slot = 0;  // index of the first requested image within a candidate pool
};

class ImageEditor {
  public:
    virtual ~ImageEditor() = default;
    /// Returns exactly `n` images with the input's dimensions.
    virtual std::vector<Image> edit_image(const Image& image, const std::string& prompt, int n,
                                          const EditOptions& options) = 0;
};

/// Multimodal reasoning model. `image` may be empty for text-only requests.
class VisionLanguageModel {
  public:
    virtual ~VisionLanguageModel() = default;
    virtual std::string describe(const Image& image, const std::string& system_prompt,
                                 const std::string& user_prompt) = 0;
    /// Raw verdict text, returned untouched.
    virtual std::string judge(const Image& image, const std::string& prompt) = 0;
};

class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed(const Image& image) = 0;
};

class Segmenter {
  public:
    virtual ~Segmenter() = default;
    virtual Mask segment(const Image& image) = 0;
};

/// One binding per model role. Roles may share an implementation.
struct ProviderSet {
    std::shared_ptr<ImageEditor> editor;
    std::shared_ptr<VisionLanguageModel> locator;
    std::shared_ptr<VisionLanguageModel> optimizer;
    std::shared_ptr<VisionLanguageModel> judge;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<Segmenter> segmenter;

    void require_complete() const;
};

class Sleeper {
  public:
    virtual ~Sleeper() = default;
    virtual void sleep_for(std::chrono::milliseconds delay) = 0;
};

class RealSleeper final : public Sleeper {
  public:
    void sleep_for(std::chrono::milliseconds delay) override;
};

/// Records requested delays without blocking.
class VirtualSleeper final : public Sleeper {
  public:
    void sleep_for(std::chrono::milliseconds delay) override;
    [[nodiscard]] std::vector<std::chrono::milliseconds> delays() const;
    [[nodiscard]] std::chrono::milliseconds total() const;

  private:
    mutable std::mutex mutex_;
    std::vector<std::chrono::milliseconds> delays_;
};

/// Caps in-flight calls per provider client.
class ConcurrencyLimiter {
  public:
    explicit ConcurrencyLimiter(int limit);

    void acquire();
    void release();
    [[nodiscard]] int limit() const noexcept { return limit_; }
    [[nodiscard]] int peak() const;

    class Slot {
      public:
        explicit Slot(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
        ~Slot() { limiter_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

      private:
        ConcurrencyLimiter& limiter_;
    };

  private:
    int limit_;
    int in_flight_ = 0;
    int peak_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_backoff{1000};

    /// Delay before retry number `k` (0-based): base * 2^k.
    [[nodiscard]] std::chrono::milliseconds backoff(int k) const;
};

/// Runs `call` under the limiter, retrying retryable ProviderErrors. A final
/// failure is rethrown with the total attempt count.
template <typename F>
auto call_with_retry(const RetryPolicy& policy, Sleeper& sleeper, ConcurrencyLimiter* limiter, F&& call)
    -> decltype(call()) {
    for (int attempt = 0;; ++attempt) {
        try {
            if (limiter != nullptr) {
                ConcurrencyLimiter::Slot slot(*limiter);
                return call();
            }
            return call();
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt >= policy.max_retries) {
                throw ProviderError(e.kind(), e.what(), attempt + 1);
            }
        }
        sleeper.sleep_for(policy.backoff(attempt));
    }
}

/// Wraps every role of `inner` with retries, the per-client concurrency
/// limit, and response contract checks (image counts and sizes, mask
/// dimensions, embedding dimension and finiteness).
[[nodiscard]] ProviderSet guard_providers(const ProviderSet& inner, const RetryPolicy& policy, int concurrency,
                                          std::shared_ptr<Sleeper> sleeper);

}  // namespace bikeflow
