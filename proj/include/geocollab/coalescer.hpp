#pragma once

#include <cstdint>
#include <optional>
#include <utility>

namespace geocollab::sync {

/// Trailing-edge throttle for the leader's camera stream. Time is passed in by
/// the caller, so the same code runs against a real timer or a virtual clock.
///
/// A view opens a window of `window_ms` if none is open; further views in the
/// window replace the pending one and the last is released when the window
/// closes. A non-view action releases the pending view early so ordering is
/// preserved; the window boundary stays where it was.
template <class T>
class ViewCoalescer {
 public:
  explicit ViewCoalescer(std::int64_t window_ms) : window_ms_(window_ms > 0 ? window_ms : 1) {}

  static ViewCoalescer for_rate(double per_second) {
    return ViewCoalescer(static_cast<std::int64_t>(1000.0 / per_second));
  }

  /// Holds the view. Returns a view to forward now only when the previous
  /// window had already expired with a view still pending.
  std::optional<T> offer(T view, std::int64_t now_ms) {
    std::optional<T> out = poll(now_ms);
    if (!window_end_ || now_ms >= *window_end_) window_end_ = now_ms + window_ms_;
    pending_ = std::move(view);
    return out;
  }

  /// The pending view, if its window has closed by `now_ms`.
  std::optional<T> poll(std::int64_t now_ms) {
    if (pending_ && window_end_ && now_ms >= *window_end_) return take();
    return std::nullopt;
  }

  /// The pending view regardless of the window, for a non-view action that
  /// must not overtake it.
  std::optional<T> flush() { return pending_ ? take() : std::nullopt; }

  /// When the caller should next poll, if anything is pending.
  std::optional<std::int64_t> deadline() const { return pending_ ? window_end_ : std::nullopt; }
  bool has_pending() const noexcept { return pending_.has_value(); }
  std::int64_t window_ms() const noexcept { return window_ms_; }

 private:
  std::optional<T> take() {
    std::optional<T> out = std::move(pending_);
    pending_.reset();
    return out;
  }

  std::int64_t window_ms_;
  std::optional<std::int64_t> window_end_;
  std::optional<T> pending_;
};

}  // namespace geocollab::sync
