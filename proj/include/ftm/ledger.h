// Deterministic accounting of live tensor payload bytes.
//
// Every tensor buffer reports its allocation and release to the ledger of the
// thread that created it. Peak memory is the high-water mark of live bytes
// inside a PeakScope; allocator overhead is not counted.

#ifndef FTM_LEDGER_H_
#define FTM_LEDGER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace ftm {

class AllocationLedger {
 public:
  struct Event {
    std::int64_t delta;  // positive for allocation, negative for release
  };

  static AllocationLedger& current();

  void on_alloc(std::size_t bytes);
  void on_free(std::size_t bytes);

  std::size_t live_bytes() const { return live_; }
  std::size_t peak_bytes() const { return peak_; }

  // Makes the current live set the new peak baseline.
  void reset_peak() { peak_ = live_; }

  void set_recording(bool on);
  const std::vector<Event>& events() const { return events_; }

 private:
  friend class PeakScope;
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
  bool in_scope_ = false;
  bool recording_ = false;
  std::vector<Event> events_;
};

// Measures the high-water mark of bytes allocated while the scope is open,
// relative to the live set at entry. Scopes cannot nest.
class PeakScope {
 public:
  PeakScope();
  ~PeakScope();
  PeakScope(const PeakScope&) = delete;
  PeakScope& operator=(const PeakScope&) = delete;

  std::size_t peak() const;

 private:
  std::size_t base_;
};

std::size_t measure_peak(const std::function<void()>& fn);

}  // namespace ftm

#endif  // FTM_LEDGER_H_
