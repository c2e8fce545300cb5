// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <optional>
#include <string>

#include "sdpm/linalg.hpp"

namespace sdpm {

/// One experiment's posterior sample matrix (draws in rows), with its id and
/// an optional ground-truth class label used only by evaluation.
struct SampleBatch {
  std::string id;
  std::optional<std::string> label;
  Matrix samples;  // n x p

  int dim() const { return static_cast<int>(samples.cols()); }
  Eigen::Index n() const { return samples.rows(); }

  /// Requires a nonempty id, at least one row, and all-finite entries.
  void validate() const;
};

}  // namespace sdpm
