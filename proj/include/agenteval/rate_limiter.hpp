#pragma once

#include <deque>
#include <mutex>

#include "agenteval/clock.hpp"

namespace agenteval {

// Sliding one-second window: no half-open interval [t, t + 1s) ever contains
// more than `max_per_second` granted acquisitions.
class RateLimiter {
public:
    RateLimiter(unsigned max_per_second, Clock& clock);

    // Blocks (via the clock) until a dispatch slot is free; returns the
    // dispatch time that was recorded.
    Clock::time_point acquire();

    unsigned max_per_second() const { return max_per_second_; }

private:
    unsigned max_per_second_;
    Clock& clock_;
    std::mutex mutex_;
    std::deque<Clock::time_point> window_;
};

}  // namespace agenteval
