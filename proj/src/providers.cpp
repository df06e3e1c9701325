#include "bikeflow/providers.hpp"

#include <cmath>
#include <thread>

#include "bikeflow/provider_contracts.hpp"

namespace bikeflow {

std::string_view to_string(ProviderErrorKind kind) {
    switch (kind) {
        case ProviderErrorKind::timeout:
            return "timeout";
        case ProviderErrorKind::rate_limited:
            return "rate_limited";
        case ProviderErrorKind::unavailable:
            return "unavailable";
        case ProviderErrorKind::malformed_response:
            return "malformed_response";
        case ProviderErrorKind::auth_failure:
            return "auth_failure";
        case ProviderErrorKind::invalid_request:
            return "invalid_request";
        case ProviderErrorKind::mock_miss:
            return "mock_miss";
        case ProviderErrorKind::fixture_miss:
            return "fixture_miss";
        case ProviderErrorKind::no_imagery:
            return "no_imagery";
    }
    return "unknown";
}

bool is_retryable(ProviderErrorKind kind) noexcept {
    return kind == ProviderErrorKind::timeout || kind == ProviderErrorKind::rate_limited ||
           kind == ProviderErrorKind::unavailable;
}

void ProviderConfig::validate() const {
    if (!(timeout_s > 0.0)) throw PreconditionError("validation", "provider timeout must be > 0");
    if (max_retries < 0) throw PreconditionError("validation", "provider max_retries must be >= 0");
    if (retry_backoff_s < 0.0) throw PreconditionError("validation", "provider retry_backoff must be >= 0");
    if (concurrency < 1) throw PreconditionError("validation", "provider concurrency must be >= 1");
}

ProviderConfig provider_config_from_json(const nlohmann::json& j) {
    ProviderConfig c;
    c.endpoint = j.value("endpoint", "");
    c.credential_ref = j.value("credential_ref", "");
    c.model = j.value("model", "");
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.retry_backoff_s = j.value("retry_backoff_s", c.retry_backoff_s);
    c.concurrency = j.value("concurrency", c.concurrency);
    if (j.contains("params")) c.params = j.at("params");
    c.validate();
    return c;
}

void ProviderSet::require_complete() const {
    if (!editor || !locator || !optimizer || !judge || !embedder || !segmenter) {
        throw PreconditionError("validation", "provider set is missing a role binding");
    }
}

void RealSleeper::sleep_for(std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); }

void VirtualSleeper::sleep_for(std::chrono::milliseconds delay) {
    std::lock_guard lock(mutex_);
    delays_.push_back(delay);
}

std::vector<std::chrono::milliseconds> VirtualSleeper::delays() const {
    std::lock_guard lock(mutex_);
    return delays_;
}

std::chrono::milliseconds VirtualSleeper::total() const {
    std::lock_guard lock(mutex_);
    std::chrono::milliseconds sum{0};
    for (auto d : delays_) sum += d;
    return sum;
}

ConcurrencyLimiter::ConcurrencyLimiter(int limit) : limit_(limit) {
    if (limit < 1) throw PreconditionError("validation", "concurrency limit must be >= 1");
}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return in_flight_ < limit_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

int ConcurrencyLimiter::peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

std::chrono::milliseconds RetryPolicy::backoff(int k) const { return base_backoff * (std::int64_t{1} << k); }

void check_edit_request(const std::string& prompt, int n) {
    if (n < 1 || n > 10) throw PreconditionError("edit_image: n must lie in [1,10]");
    if (prompt.empty()) throw PreconditionError("edit_image: prompt must be non-empty");
}

void check_describe_request(const std::string& system_prompt, const std::string& user_prompt) {
    if (system_prompt.empty() || user_prompt.empty()) {
        throw PreconditionError("describe: prompts must be non-empty");
    }
}

void check_judge_request(const std::string& prompt) {
    if (prompt.empty()) throw PreconditionError("judge: prompt must be non-empty");
}

void check_edit_response(const Image& input, const std::vector<Image>& out, int n) {
    if (static_cast<int>(out.size()) != n) {
        throw ProviderError(ProviderErrorKind::malformed_response,
                            "edit_image returned " + std::to_string(out.size()) + " images, expected " +
                                std::to_string(n));
    }
    for (const auto& img : out) {
        if (img.width() != input.width() || img.height() != input.height()) {
            throw ProviderError(ProviderErrorKind::malformed_response, "edit_image changed image dimensions");
        }
    }
}

void check_mask_response(const Image& input, const Mask& mask) {
    if (mask.width() != input.width() || mask.height() != input.height()) {
        throw ProviderError(ProviderErrorKind::malformed_response, "segment returned a mask of the wrong size");
    }
}

void check_embedding_response(const EmbeddingVector& v) {
    if (v.values.empty()) throw ProviderError(ProviderErrorKind::malformed_response, "empty embedding");
    for (double x : v.values) {
        if (!std::isfinite(x)) {
            throw ProviderError(ProviderErrorKind::malformed_response, "embedding has non-finite values");
        }
    }
}

namespace {

struct Resilience {
    RetryPolicy policy;
    std::shared_ptr<Sleeper> sleeper;
    std::shared_ptr<ConcurrencyLimiter> limiter;

    template <typename F>
    auto run(F&& f) -> decltype(f()) {
        return call_with_retry(policy, *sleeper, limiter.get(), std::forward<F>(f));
    }
};

class GuardedEditor final : public ImageEditor {
  public:
    GuardedEditor(std::shared_ptr<ImageEditor> inner, Resilience r) : inner_(std::move(inner)), r_(std::move(r)) {}

    std::vector<Image> edit_image(const Image& image, const std::string& prompt, int n,
                                  const EditOptions& options) override {
        check_edit_request(prompt, n);
        return r_.run([&] {
            auto out = inner_->edit_image(image, prompt, n, options);
            check_edit_response(image, out, n);
            return out;
        });
    }

  private:
    std::shared_ptr<ImageEditor> inner_;
    Resilience r_;
};

class GuardedVlm final : public VisionLanguageModel {
  public:
    GuardedVlm(std::shared_ptr<VisionLanguageModel> inner, Resilience r) : inner_(std::move(inner)), r_(std::move(r)) {}

    std::string describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) override {
        check_describe_request(system_prompt, user_prompt);
        return r_.run([&] { return inner_->describe(image, system_prompt, user_prompt); });
    }

    std::string judge(const Image& image, const std::string& prompt) override {
        check_judge_request(prompt);
        return r_.run([&] { return inner_->judge(image, prompt); });
    }

  private:
    std::shared_ptr<VisionLanguageModel> inner_;
    Resilience r_;
};

class GuardedEmbedder final : public Embedder {
  public:
    GuardedEmbedder(std::shared_ptr<Embedder> inner, Resilience r) : inner_(std::move(inner)), r_(std::move(r)) {}

    EmbeddingVector embed(const Image& image) override {
        auto v = r_.run([&] {
            auto out = inner_->embed(image);
            check_embedding_response(out);
            return out;
        });
        std::lock_guard lock(mutex_);
        if (dimension_ == 0) {
            dimension_ = v.dimension();
        } else if (v.dimension() != dimension_) {
            throw ProviderError(ProviderErrorKind::malformed_response,
                                "embedding dimension changed within a session");
        }
        return v;
    }

  private:
    std::shared_ptr<Embedder> inner_;
    Resilience r_;
    std::mutex mutex_;
    std::size_t dimension_ = 0;
};

class GuardedSegmenter final : public Segmenter {
  public:
    GuardedSegmenter(std::shared_ptr<Segmenter> inner, Resilience r) : inner_(std::move(inner)), r_(std::move(r)) {}

    Mask segment(const Image& image) override {
        return r_.run([&] {
            auto mask = inner_->segment(image);
            check_mask_response(image, mask);
            return mask;
        });
    }

  private:
    std::shared_ptr<Segmenter> inner_;
    Resilience r_;
};

}  // namespace

ProviderSet guard_providers(const ProviderSet& inner, const RetryPolicy& policy, int concurrency,
                            std::shared_ptr<Sleeper> sleeper) {
    inner.require_complete();
    if (!sleeper) sleeper = std::make_shared<RealSleeper>();
    auto make = [&] { return Resilience{policy, sleeper, std::make_shared<ConcurrencyLimiter>(concurrency)}; };
    ProviderSet out;
    out.editor = std::make_shared<GuardedEditor>(inner.editor, make());
    out.locator = std::make_shared<GuardedVlm>(inner.locator, make());
    out.optimizer = std::make_shared<GuardedVlm>(inner.optimizer, make());
    out.judge = std::make_shared<GuardedVlm>(inner.judge, make());
    out.embedder = std::make_shared<GuardedEmbedder>(inner.embedder, make());
    out.segmenter = std::make_shared<GuardedSegmenter>(inner.segmenter, make());
    return out;
}

}  // namespace bikeflow
