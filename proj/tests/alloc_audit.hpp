#ifndef GOCC_TESTS_ALLOC_AUDIT_HPP
#define GOCC_TESTS_ALLOC_AUDIT_HPP

// Whole-process heap accounting by interposing glibc malloc. Every heap byte
// in the binary is counted, including allocations Eigen routes through
// std::malloc, which an operator-new override would miss. Linux/glibc only:
// the wrappers forward to the __libc_* entry points.
//
// The wrappers are plain external definitions, so include this header from
// exactly one translation unit per binary.

#include <malloc.h>

#include <atomic>
#include <cstddef>

namespace audit {

// Constant-initialized so the wrappers are safe before main.
std::atomic<std::size_t> live{0};
std::atomic<std::size_t> peak{0};

inline void on_alloc(std::size_t n) {
  const std::size_t now = live.fetch_add(n) + n;
  std::size_t prev = peak.load();
  while (now > prev && !peak.compare_exchange_weak(prev, now)) {
  }
}

inline void on_free(std::size_t n) { live.fetch_sub(n); }

// Scoped measurement: peak heap growth relative to entry.
struct Window {
  std::size_t base;
  Window() : base(live.load()) { peak.store(base); }
  std::size_t peak_growth() const { return peak.load() - base; }
};

}  // namespace audit

extern "C" {
void* __libc_malloc(std::size_t);
void __libc_free(void*);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);

void* malloc(std::size_t n) {
  void* p = __libc_malloc(n);
  if (p) audit::on_alloc(malloc_usable_size(p));
  return p;
}

void free(void* p) {
  if (p) audit::on_free(malloc_usable_size(p));
  __libc_free(p);
}

void* calloc(std::size_t n, std::size_t size) {
  void* p = __libc_calloc(n, size);
  if (p) audit::on_alloc(malloc_usable_size(p));
  return p;
}

void* realloc(void* p, std::size_t n) {
  const std::size_t old = p ? malloc_usable_size(p) : 0;
  void* q = __libc_realloc(p, n);
  if (q) {
    audit::on_free(old);
    audit::on_alloc(malloc_usable_size(q));
  }
  return q;
}
}  // extern "C"

#endif
