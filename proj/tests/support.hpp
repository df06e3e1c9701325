#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "bikeflow/clock.hpp"
#include "bikeflow/digest.hpp"
#include "bikeflow/lane_sketch.hpp"
#include "bikeflow/mock_provider.hpp"
#include "bikeflow/orchestrator.hpp"
#include "bikeflow/providers.hpp"
#include "bikeflow/raster.hpp"

namespace bikeflow::testkit {

class TempDir {
  public:
    TempDir() {
        std::random_device rd;
        const auto base = std::filesystem::temp_directory_path();
        for (;;) {
            path_ = base / ("bikeflow-test-" + std::to_string(rd()) + std::to_string(rd()));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline Image random_image(int width, int height, std::mt19937_64& rng) {
    Image img(width, height);
    std::uniform_int_distribution<int> byte(0, 255);
    for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(byte(rng));
    return img;
}

/// Embeddings looked up by image content hash.
class KeyedEmbedder final : public Embedder {
  public:
    void set(const Image& image, EmbeddingVector v) {
        std::lock_guard lock(mutex_);
        table_[content_hash(image)] = std::move(v);
    }
    EmbeddingVector embed(const Image& image) override {
        std::lock_guard lock(mutex_);
        auto it = table_.find(content_hash(image));
        if (it == table_.end()) throw ProviderError(ProviderErrorKind::mock_miss, "no embedding for image");
        return it->second;
    }

  private:
    std::mutex mutex_;
    std::map<std::string, EmbeddingVector> table_;
};

class FullMaskSegmenter final : public Segmenter {
  public:
    Mask segment(const Image& image) override { return Mask(image.width(), image.height(), 1); }
};

/// Counts judge calls and remembers the judged images.
class CountingJudge final : public VisionLanguageModel {
  public:
    explicit CountingJudge(std::shared_ptr<VisionLanguageModel> inner) : inner_(std::move(inner)) {}

    std::string describe(const Image& image, const std::string& system_prompt, const std::string& user_prompt) override {
        return inner_->describe(image, system_prompt, user_prompt);
    }
    std::string judge(const Image& image, const std::string& prompt) override {
        {
            std::lock_guard lock(mutex_);
            judged_.push_back(content_hash(image));
        }
        return inner_->judge(image, prompt);
    }
    [[nodiscard]] std::vector<std::string> judged() const {
        std::lock_guard lock(mutex_);
        return judged_;
    }

  private:
    std::shared_ptr<VisionLanguageModel> inner_;
    mutable std::mutex mutex_;
    std::vector<std::string> judged_;
};

/// Counts editor calls.
class CountingEditor final : public ImageEditor {
  public:
    explicit CountingEditor(std::shared_ptr<ImageEditor> inner) : inner_(std::move(inner)) {}

    std::vector<Image> edit_image(const Image& image, const std::string& prompt, int n,
                                  const EditOptions& options) override {
        ++calls;
        return inner_->edit_image(image, prompt, n, options);
    }

    std::atomic<int> calls{0};

  private:
    std::shared_ptr<ImageEditor> inner_;
};

inline ProviderSet mock_set(MockScript script) {
    return MockProvider::as_provider_set(std::make_shared<MockProvider>(std::move(script)));
}

inline std::unique_ptr<Engine> make_engine(const std::filesystem::path& runs_dir, ProviderSet providers,
                                           EngineConfig config = {},
                                           std::shared_ptr<Clock> clock = std::make_shared<FixedClock>()) {
    config.runs_dir = runs_dir;
    auto guarded = guard_providers(providers, RetryPolicy{0, std::chrono::milliseconds(0)}, 4,
                                   std::make_shared<VirtualSleeper>());
    return std::make_unique<Engine>(config, guarded, TemplateLibrary::builtin(), std::move(clock));
}

inline std::unique_ptr<Engine> make_mock_engine(const std::filesystem::path& runs_dir, std::uint64_t seed = 0,
                                                EngineConfig config = {},
                                                std::shared_ptr<Clock> clock = std::make_shared<FixedClock>()) {
    return make_engine(runs_dir, mock_set(default_mock_script(seed)), std::move(config), std::move(clock));
}

inline CreateRunRequest scene_request(int scenario_id, int pool_size = 6, std::uint64_t seed = 0) {
    CreateRunRequest req;
    req.scene_image = synthetic_street(512, 11);
    req.scene_id = "scene-a";
    req.scenario_id = scenario_id;
    req.pool_size = pool_size;
    req.seed = seed;
    return req;
}

inline nlohmann::json strip_timestamps(nlohmann::json j) {
    if (j.is_object()) {
        j.erase("timestamp");
        for (auto& [key, value] : j.items()) value = strip_timestamps(value);
    } else if (j.is_array()) {
        for (auto& value : j) value = strip_timestamps(value);
    }
    return j;
}

/// Relative path -> file bytes; run.log lines have timestamps removed.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = std::filesystem::relative(entry.path(), dir).generic_string();
        std::string text = read_file_text(entry.path());
        if (entry.path().filename() == "run.log") {
            std::string normalized;
            std::size_t start = 0;
            while (start < text.size()) {
                std::size_t end = text.find('\n', start);
                if (end == std::string::npos) end = text.size();
                const std::string line = text.substr(start, end - start);
                if (!line.empty()) normalized += strip_timestamps(nlohmann::json::parse(line)).dump() + "\n";
                start = end + 1;
            }
            text = normalized;
        }
        out[rel] = std::move(text);
    }
    return out;
}

}  // namespace bikeflow::testkit
