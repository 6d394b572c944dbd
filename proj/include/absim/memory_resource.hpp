#pragma once

#include <cstddef>
#include <new>

namespace absim {

// Allocation interface used for agents, behaviors and per-domain engine
// buffers. `domain` selects the memory domain the allocation should live on.
// deallocate must receive the same byte count the allocation was made with;
// the pool implementation routes by size and locates the owning pool from
// the address alone.
class MemoryResource {
 public:
  virtual ~MemoryResource() = default;
  virtual void* allocate(std::size_t bytes, int domain) = 0;
  virtual void deallocate(void* p, std::size_t bytes) = 0;
  virtual const char* name() const = 0;

  template <class T, class... Args>
  T* create(int domain, Args&&... args) {
    void* mem = allocate(sizeof(T), domain);
    try {
      return new (mem) T(static_cast<Args&&>(args)...);
    } catch (...) {
      deallocate(mem, sizeof(T));
      throw;
    }
  }

  template <class T>
  void destroy(T* p) {
    if (!p) return;
    p->~T();
    deallocate(p, sizeof(T));
  }
};

class SystemResource final : public MemoryResource {
 public:
  void* allocate(std::size_t bytes, int) override {
    return ::operator new(bytes);
  }
  void deallocate(void* p, std::size_t) override { ::operator delete(p); }
  const char* name() const override { return "system"; }
};

// Small dense thread ids for per-thread free lists. Ids are recycled when a
// thread exits, so long test runs spawning many short-lived threads stay
// within the fixed slot budget.
inline constexpr int kMaxThreadSlots = 128;
int current_thread_slot();

}  // namespace absim
