#pragma once

#include <string>
#include <vector>

#include "accjoint/analysis.hpp"
#include "accjoint/simstudy.hpp"

namespace accjoint {

// Restricts the heatmap to coordinates of one block per axis; empty selects
// every coordinate.
struct BlockSelection {
  std::string row_block;
  std::string col_block;
};

// Correlation grid as SVG: positive means shade white to green, negative
// white to red, quantized to 8 bands per sign; cells whose entry is flagged
// reliable (and visibly nonzero) get a black border. Output is a pure
// function of the summary.
std::string emit_heatmap(const CorrelationSummary& summary, const BlockSelection& sel = {});

// Interval plot over covariance elements: 95% bar, posterior-mean dot, and a
// tick at the generating value; elements linking different tasks are drawn in
// blue, within-task elements in grey.
std::string emit_recovery_plot(const std::vector<RecoveryElement>& elements);

}  // namespace accjoint
