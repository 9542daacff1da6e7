#pragma once

#include <span>

#include "ppgscreen/matrix.hpp"

namespace ppgscreen::detail {

/// Throws on row/label mismatch, non-binary labels, a single class, or
/// non-finite inputs.
void check_training_input(const Matrix& x, std::span<const int> y);

double log_loss(double margin, int label);

}  // namespace ppgscreen::detail
