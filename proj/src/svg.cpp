#include "accjoint/svg.hpp"

#include <algorithm>
#include <cmath>

#include "accjoint/errors.hpp"
#include "accjoint/io.hpp"

namespace accjoint {

namespace {

constexpr int kCell = 24;      // grid pitch in px
constexpr int kCellBox = 22;   // drawn cell size (1 px gap each side)
constexpr int kMarginLeft = 150;
constexpr int kMarginTop = 150;
constexpr int kPad = 12;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c; break;
    }
  }
  return out;
}

// 0..8 shade band; band 0 is white, band 8 the full colour.
int shade_band(double mean) {
  const double a = std::min(std::abs(mean), 1.0);
  return static_cast<int>(std::lround(a * 8.0));
}

std::string band_fill(double mean) {
  const int band = shade_band(mean);
  // Full-scale endpoints: green for positive, red for negative.
  const int target_r = mean >= 0.0 ? 0 : 178;
  const int target_g = mean >= 0.0 ? 109 : 24;
  const int target_b = mean >= 0.0 ? 44 : 43;
  auto lerp = [band](int to) { return 255 + ((to - 255) * band) / 8; };
  return "rgb(" + std::to_string(lerp(target_r)) + "," + std::to_string(lerp(target_g)) + "," +
         std::to_string(lerp(target_b)) + ")";
}

std::vector<int> select_coords(const CorrelationSummary& summary, const std::string& block) {
  std::vector<int> idx;
  const int d = static_cast<int>(summary.param_names.size());
  for (int i = 0; i < d; ++i)
    if (block.empty() || summary.block_labels[i] == block) idx.push_back(i);
  return idx;
}

}  // namespace

std::string emit_heatmap(const CorrelationSummary& summary, const BlockSelection& sel) {
  const std::vector<int> rows = select_coords(summary, sel.row_block);
  const std::vector<int> cols = select_coords(summary, sel.col_block);
  if (rows.empty() || cols.empty()) throw InvalidInput("heatmap block selection is empty");

  const int width = kMarginLeft + kCell * static_cast<int>(cols.size()) + kPad;
  const int height = kMarginTop + kCell * static_cast<int>(rows.size()) + kPad;
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"white\"/>\n";

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int y = kMarginTop + static_cast<int>(r) * kCell;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const int x = kMarginLeft + static_cast<int>(c) * kCell;
      const double mean = summary.mean(rows[r], cols[c]);
      const bool reliable = summary.reliable(rows[r], cols[c]);
      svg += "<rect x=\"" + std::to_string(x + 1) + "\" y=\"" + std::to_string(y + 1) +
             "\" width=\"" + std::to_string(kCellBox) + "\" height=\"" +
             std::to_string(kCellBox) + "\" fill=\"" + band_fill(mean) + "\"";
      if (reliable && shade_band(mean) > 0) svg += " stroke=\"black\" stroke-width=\"2\"";
      svg += "/>\n";
    }
  }

  // Row labels on the left, column labels rotated above the grid.
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int y = kMarginTop + static_cast<int>(r) * kCell + kCell / 2 + 4;
    svg += "<text x=\"" + std::to_string(kMarginLeft - 6) + "\" y=\"" + std::to_string(y) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" +
           escape_xml(summary.param_names[rows[r]]) + "</text>\n";
  }
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const int x = kMarginLeft + static_cast<int>(c) * kCell + kCell / 2 + 4;
    svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(kMarginTop - 6) +
           "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"start\" transform=\"rotate(-90 " +
           std::to_string(x) + " " + std::to_string(kMarginTop - 6) + ")\">" +
           escape_xml(summary.param_names[cols[c]]) + "</text>\n";
  }

  // Separators between coordinate blocks.
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (summary.block_labels[rows[r]] != summary.block_labels[rows[r - 1]]) {
      const int y = kMarginTop + static_cast<int>(r) * kCell;
      svg += "<line x1=\"" + std::to_string(kMarginLeft) + "\" y1=\"" + std::to_string(y) +
             "\" x2=\"" + std::to_string(kMarginLeft + kCell * static_cast<int>(cols.size())) +
             "\" y2=\"" + std::to_string(y) + "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    }
  }
  for (std::size_t c = 1; c < cols.size(); ++c) {
    if (summary.block_labels[cols[c]] != summary.block_labels[cols[c - 1]]) {
      const int x = kMarginLeft + static_cast<int>(c) * kCell;
      svg += "<line x1=\"" + std::to_string(x) + "\" y1=\"" + std::to_string(kMarginTop) +
             "\" x2=\"" + std::to_string(x) + "\" y2=\"" +
             std::to_string(kMarginTop + kCell * static_cast<int>(rows.size())) +
             "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    }
  }

  svg += "</svg>\n";
  return svg;
}

std::string emit_recovery_plot(const std::vector<RecoveryElement>& elements) {
  if (elements.empty()) throw InvalidInput("no recovery elements to plot");
  const int n = static_cast<int>(elements.size());
  const int step = 16;
  const int margin_left = 60, margin_top = 20, margin_bottom = 120;
  const int plot_h = 320;
  const int width = margin_left + step * n + 20;
  const int height = margin_top + plot_h + margin_bottom;

  double lo = 0.0, hi = 0.0;  // include zero so the reference line is visible
  for (const auto& el : elements) {
    lo = std::min({lo, el.lo95, el.generating});
    hi = std::max({hi, el.hi95, el.generating});
  }
  const double span = hi - lo;
  lo -= 0.05 * span;
  hi += 0.05 * span;
  auto ycoord = [&](double v) {
    return format_double(margin_top + (hi - v) / (hi - lo) * plot_h);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"white\"/>\n";
  // zero reference
  svg += "<line x1=\"" + std::to_string(margin_left - 10) + "\" y1=\"" + ycoord(0.0) +
         "\" x2=\"" + std::to_string(margin_left + step * n) + "\" y2=\"" + ycoord(0.0) +
         "\" stroke=\"#999999\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>\n";

  for (int i = 0; i < n; ++i) {
    const auto& el = elements[i];
    const int x = margin_left + step * i + step / 2;
    const std::string colour = el.between ? "#2166ac" : "#777777";
    svg += "<line x1=\"" + std::to_string(x) + "\" y1=\"" + ycoord(el.lo95) + "\" x2=\"" +
           std::to_string(x) + "\" y2=\"" + ycoord(el.hi95) + "\" stroke=\"" + colour +
           "\" stroke-width=\"3\"/>\n";
    svg += "<circle cx=\"" + std::to_string(x) + "\" cy=\"" + ycoord(el.post_mean) +
           "\" r=\"3\" fill=\"" + colour + "\"/>\n";
    // generating value: short horizontal tick
    svg += "<line x1=\"" + std::to_string(x - 5) + "\" y1=\"" + ycoord(el.generating) +
           "\" x2=\"" + std::to_string(x + 5) + "\" y2=\"" + ycoord(el.generating) +
           "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    const std::string label = el.param_row + ":" + el.param_col;
    svg += "<text x=\"" + std::to_string(x) + "\" y=\"" +
           std::to_string(margin_top + plot_h + 12) +
           "\" font-family=\"monospace\" font-size=\"9\" text-anchor=\"end\" transform=\"rotate(-60 " +
           std::to_string(x) + " " + std::to_string(margin_top + plot_h + 12) + ")\">" +
           escape_xml(label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace accjoint
