#pragma once

#include <string>

namespace bikeflow {

class Clock {
  public:
    virtual ~Clock() = default;
    [[nodiscard]] virtual std::string now() = 0;  // ISO-8601 UTC
};

class SystemClock final : public Clock {
  public:
    std::string now() override;
};

class FixedClock final : public Clock {
  public:
    explicit FixedClock(std::string stamp = "2000-01-01T00:00:00Z") : stamp_(std::move(stamp)) {}
    std::string now() override { return stamp_; }

  private:
    std::string stamp_;
};

}  // namespace bikeflow
