#include "agenteval/rate_limiter.hpp"

#include <thread>

#include "agenteval/errors.hpp"

namespace agenteval {

void SteadyClock::sleep_for(duration d) {
    if (d > duration::zero()) std::this_thread::sleep_for(d);
}

RateLimiter::RateLimiter(unsigned max_per_second, Clock& clock)
    : max_per_second_(max_per_second), clock_(clock) {
    if (max_per_second_ == 0) throw ValidationError("rate limit must be positive");
}

Clock::time_point RateLimiter::acquire() {
    constexpr auto kWindow = std::chrono::seconds(1);
    // The lock is held while waiting so waiters are served one at a time.
    std::lock_guard lock(mutex_);
    while (true) {
        auto now = clock_.now();
        while (!window_.empty() && now - window_.front() >= kWindow) window_.pop_front();
        if (window_.size() < max_per_second_) {
            window_.push_back(now);
            return now;
        }
        clock_.sleep_for(window_.front() + kWindow - now);
    }
}

}  // namespace agenteval
