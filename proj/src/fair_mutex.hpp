#pragma once

// Reader/writer lock that does not starve writers. glibc's rwlock lets a
// steady stream of readers hold off a writer forever; here a waiting writer
// holds the turnstile, so readers arriving after it queue behind it.
// Satisfies SharedMutex, so std::shared_lock / std::unique_lock work.

#include <mutex>
#include <shared_mutex>

namespace latentsearch {

class FairSharedMutex {
 public:
  void lock() {
    std::lock_guard gate(turnstile_);
    rw_.lock();
  }
  bool try_lock() {
    std::unique_lock gate(turnstile_, std::try_to_lock);
    return gate.owns_lock() && rw_.try_lock();
  }
  void unlock() { rw_.unlock(); }

  void lock_shared() {
    std::lock_guard gate(turnstile_);
    rw_.lock_shared();
  }
  bool try_lock_shared() {
    std::unique_lock gate(turnstile_, std::try_to_lock);
    return gate.owns_lock() && rw_.try_lock_shared();
  }
  void unlock_shared() { rw_.unlock_shared(); }

 private:
  std::mutex turnstile_;
  std::shared_mutex rw_;
};

}  // namespace latentsearch
