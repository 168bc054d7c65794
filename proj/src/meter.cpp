#include "driftstream/meter.hpp"

#include <unistd.h>

#include <cstdio>

namespace driftstream {

double read_resident_gb() {
    std::FILE* statm = std::fopen("/proc/self/statm", "r");
    if (statm == nullptr) return -1.0;
    long total = 0;
    long resident = 0;
    const int fields = std::fscanf(statm, "%ld %ld", &total, &resident);
    std::fclose(statm);
    if (fields != 2) return -1.0;
    const long page = sysconf(_SC_PAGESIZE);
    return static_cast<double>(resident) * static_cast<double>(page) / (1024.0 * 1024.0 * 1024.0);
}

ResourceMeter::ResourceMeter(std::chrono::milliseconds period)
    : period_(period), start_(std::chrono::steady_clock::now()) {
    available_ = read_resident_gb() >= 0.0;
    sample_once(start_);
    if (available_) {
        sampler_ = std::thread([this] {
            std::unique_lock lock(mutex_);
            while (!quit_) {
                wake_.wait_for(lock, period_, [this] { return quit_; });
                if (quit_) break;
                lock.unlock();
                sample_once(std::chrono::steady_clock::now());
                lock.lock();
            }
        });
    }
}

ResourceMeter::~ResourceMeter() { stop(); }

void ResourceMeter::stop() {
    {
        std::lock_guard lock(mutex_);
        if (stopped_) return;
        stopped_ = true;
        quit_ = true;
        end_ = std::chrono::steady_clock::now();
    }
    wake_.notify_all();
    if (sampler_.joinable()) sampler_.join();
    sample_once(end_);
}

void ResourceMeter::sample_once(std::chrono::steady_clock::time_point now) {
    if (!available_) return;
    const double gb = read_resident_gb();
    if (gb < 0.0) {
        available_ = false;
        return;
    }
    const double seconds = std::chrono::duration<double>(now - start_).count();
    std::lock_guard lock(mutex_);
    samples_.push_back({seconds, gb});
}

double ResourceMeter::wall_seconds() const {
    std::lock_guard lock(mutex_);
    const auto end = stopped_ ? end_ : std::chrono::steady_clock::now();
    return std::chrono::duration<double>(end - start_).count();
}

bool ResourceMeter::memory_available() const { return available_; }

std::vector<MemorySample> ResourceMeter::samples() const {
    std::lock_guard lock(mutex_);
    return samples_;
}

}  // namespace driftstream
