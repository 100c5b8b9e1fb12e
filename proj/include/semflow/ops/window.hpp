#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semflow/backend/backend.hpp"
#include "semflow/backend/prompt.hpp"
#include "semflow/document.hpp"
#include "semflow/ops/semantic.hpp"

namespace semflow::ops {

enum class WindowStrategy { Pairwise, RollingSummary, EmbedCluster };

inline WindowStrategy parse_window_strategy(const std::string& s) {
  if (s == "pairwise") return WindowStrategy::Pairwise;
  if (s == "rolling_summary") return WindowStrategy::RollingSummary;
  if (s == "embed_cluster") return WindowStrategy::EmbedCluster;
  throw ConfigError("unknown window strategy '" + s + "'");
}

struct WindowState {
  std::vector<Document> open_window;
  std::optional<Vector> prev_embedding;
  std::optional<std::string> rolling_summary;
  Vector centroid;
};

/// Topic-shift segmentation of a document stream.
class SemWindow {
 public:
  SemWindow(WindowStrategy strategy, ModelBackend& backend, double threshold = kDefaultThreshold)
      : strategy_(strategy), backend_(backend), threshold_(threshold) {}

  const WindowState& state() const noexcept { return state_; }

  /// Decides whether `doc` starts a new window, then appends it. Returns the
  /// closed window on a boundary.
  std::optional<std::vector<Document>> push(const Document& doc) {
    if (!state_.open_window.empty() && doc.timestamp < state_.open_window.back().timestamp)
      throw OutOfOrderError("window input regressed from " + std::to_string(state_.open_window.back().timestamp) +
                            " to " + std::to_string(doc.timestamp));
    std::optional<std::vector<Document>> closed;
    if (boundary(doc)) {
      closed = std::move(state_.open_window);
      state_.open_window.clear();
      state_.centroid.clear();
      state_.rolling_summary.reset();
    }
    absorb(doc);
    return closed;
  }

  /// Closes the open window, if any.
  std::optional<std::vector<Document>> flush() {
    if (state_.open_window.empty()) return std::nullopt;
    auto w = std::move(state_.open_window);
    state_ = WindowState{};
    return w;
  }

 private:
  WindowStrategy strategy_;
  ModelBackend& backend_;
  double threshold_;
  WindowState state_;
  Vector current_;

  bool boundary(const Document& doc) {
    switch (strategy_) {
      case WindowStrategy::Pairwise: {
        current_ = backend_.embed(doc.text).vector;
        return state_.prev_embedding && cosine(current_, *state_.prev_embedding) < threshold_;
      }
      case WindowStrategy::EmbedCluster: {
        current_ = backend_.embed(doc.text).vector;
        return !state_.open_window.empty() && cosine(current_, state_.centroid) < threshold_;
      }
      case WindowStrategy::RollingSummary: {
        if (state_.open_window.empty() || !state_.rolling_summary) return false;
        const auto reply = backend_
                               .complete(prompt::make("window_continue",
                                                      "Does the document continue the topic of the summary? "
                                                      "Answer YES or NO.\nsummary: " +
                                                          one_line(*state_.rolling_summary),
                                                      doc.text))
                               .text;
        return !affirmative(reply);
      }
    }
    return false;
  }

  void absorb(const Document& doc) {
    state_.open_window.push_back(doc);
    switch (strategy_) {
      case WindowStrategy::Pairwise: state_.prev_embedding = current_; break;
      case WindowStrategy::EmbedCluster: {
        if (state_.centroid.empty()) state_.centroid.assign(current_.size(), 0.0);
        const auto n = static_cast<double>(state_.open_window.size() - 1);
        for (std::size_t i = 0; i < current_.size(); ++i)
          state_.centroid[i] = (state_.centroid[i] * n + current_[i]) / (n + 1);
        state_.prev_embedding = current_;
        break;
      }
      case WindowStrategy::RollingSummary: {
        const auto payload = state_.rolling_summary ? *state_.rolling_summary + "\n" + doc.text : doc.text;
        state_.rolling_summary =
            backend_.complete(prompt::make("summarize", "Summarize the topic in one sentence.", payload)).text;
        break;
      }
    }
  }
};

}  // namespace semflow::ops
