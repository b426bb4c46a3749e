#include "ftm/ledger.h"

#include <stdexcept>

namespace ftm {

AllocationLedger& AllocationLedger::current() {
  thread_local AllocationLedger ledger;
  return ledger;
}

void AllocationLedger::on_alloc(std::size_t bytes) {
  live_ += bytes;
  if (live_ > peak_) peak_ = live_;
  if (recording_) events_.push_back({static_cast<std::int64_t>(bytes)});
}

void AllocationLedger::on_free(std::size_t bytes) {
  live_ -= bytes;
  if (recording_) events_.push_back({-static_cast<std::int64_t>(bytes)});
}

void AllocationLedger::set_recording(bool on) {
  recording_ = on;
  events_.clear();
}

PeakScope::PeakScope() {
  auto& ledger = AllocationLedger::current();
  if (ledger.in_scope_) throw std::logic_error("nested PeakScope is not allowed");
  ledger.in_scope_ = true;
  ledger.reset_peak();
  base_ = ledger.live_bytes();
}

PeakScope::~PeakScope() { AllocationLedger::current().in_scope_ = false; }

std::size_t PeakScope::peak() const {
  return AllocationLedger::current().peak_bytes() - base_;
}

std::size_t measure_peak(const std::function<void()>& fn) {
  PeakScope scope;
  fn();
  return scope.peak();
}

}  // namespace ftm
