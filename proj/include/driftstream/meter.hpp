#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace driftstream {

// One point of the resident-memory series, relative to meter start.
struct MemorySample {
    double seconds = 0.0;
    double resident_gb = 0.0;
};

// Resident set size of this process in GB, or a negative value when the
// platform exposes no sampler.
double read_resident_gb();

// Samples resident memory on a background thread from construction until
// stop() (or destruction).  Wall time comes from the monotonic clock.  The
// evaluation loop never touches the series while running, so the internal
// lock is uncontended on the hot path.
class ResourceMeter {
  public:
    explicit ResourceMeter(std::chrono::milliseconds period = std::chrono::milliseconds(100));
    ~ResourceMeter();

    ResourceMeter(const ResourceMeter&) = delete;
    ResourceMeter& operator=(const ResourceMeter&) = delete;

    void stop();

    double wall_seconds() const;           // at stop(), or now while running
    bool memory_available() const;
    std::vector<MemorySample> samples() const;

  private:
    void sample_once(std::chrono::steady_clock::time_point now);

    std::chrono::milliseconds period_;
    std::chrono::steady_clock::time_point start_;
    std::chrono::steady_clock::time_point end_;
    bool stopped_ = false;
    std::atomic<bool> available_ = true;
    std::vector<MemorySample> samples_;
    mutable std::mutex mutex_;
    std::condition_variable wake_;
    bool quit_ = false;
    std::thread sampler_;
};

}  // namespace driftstream
