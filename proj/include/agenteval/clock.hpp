#pragma once

#include <atomic>
#include <chrono>

namespace agenteval {

// Time source for backoff and rate limiting, swappable for a manual clock in
// tests.
class Clock {
public:
    using time_point = std::chrono::steady_clock::time_point;
    using duration = std::chrono::steady_clock::duration;

    virtual ~Clock() = default;
    virtual time_point now() const = 0;
    virtual void sleep_for(duration d) = 0;
};

class SteadyClock final : public Clock {
public:
    time_point now() const override { return std::chrono::steady_clock::now(); }
    void sleep_for(duration d) override;
};

// Never blocks: sleeping advances the clock. Thread-safe.
class ManualClock final : public Clock {
public:
    time_point now() const override { return time_point(duration(ticks_.load())); }
    void sleep_for(duration d) override { advance(d); }
    void advance(duration d) { ticks_.fetch_add(d.count()); }

private:
    std::atomic<duration::rep> ticks_{0};
};

}  // namespace agenteval
