#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hyperloss/errors.hpp"
#include "hyperloss/shape.hpp"

namespace hyperloss {

// One measured training run. Optional fields are absent when the run log
// did not record them.
struct RunRecord {
  std::string run_id;
  TransformerShape shape;
  std::uint64_t batch = 1;
  std::optional<double> seconds_per_step;
  std::optional<double> tokens_per_second;
  std::optional<double> tokens_seen;
  std::optional<double> final_loss;
  std::optional<double> train_seconds;

  double tokens_per_step() const { return static_cast<double>(batch) * static_cast<double>(shape.s); }

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

enum class Split { unassigned, train, holdout };

struct RunDataset {
  std::vector<RunRecord> records;
  std::vector<Split> splits;  // parallel to records

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  void add(RunRecord r, Split tag = Split::unassigned) {
    records.push_back(std::move(r));
    splits.push_back(tag);
  }

  Split split_of(std::size_t i) const { return i < splits.size() ? splits[i] : Split::unassigned; }

  // Records used for fitting: those tagged train, or every record when no
  // split has been assigned.
  std::vector<std::size_t> fit_indices() const {
    std::vector<std::size_t> train, untagged;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (split_of(i) == Split::train) train.push_back(i);
      if (split_of(i) == Split::unassigned) untagged.push_back(i);
    }
    return train.empty() ? untagged : train;
  }

  std::vector<std::size_t> holdout_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (split_of(i) == Split::holdout) out.push_back(i);
    }
    return out;
  }
};

// Seconds per step, converted from tokens per second when only that was
// logged.
inline std::optional<double> step_seconds(const RunRecord& r) {
  if (r.seconds_per_step) return r.seconds_per_step;
  if (r.tokens_per_second) return r.tokens_per_step() / *r.tokens_per_second;
  return std::nullopt;
}

}  // namespace hyperloss
