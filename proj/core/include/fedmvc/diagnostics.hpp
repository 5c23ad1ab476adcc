#pragma once

#include <string>
#include <utility>
#include <vector>

namespace fedmvc {

/// Collects non-fatal notes raised by numerical routines (degenerate
/// clusters, clamped quadratic forms, regularized solves). Callers that do
/// not care pass nullptr.
class Diagnostics {
public:
  void note(std::string message) { notes_.push_back(std::move(message)); }
  const std::vector<std::string>& notes() const { return notes_; }
  bool empty() const { return notes_.empty(); }

private:
  std::vector<std::string> notes_;
};

inline void diag_note(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->note(std::move(message));
}

}  // namespace fedmvc
