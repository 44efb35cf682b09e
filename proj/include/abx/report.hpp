#pragma once

#include <span>
#include <string>

#include "abx/analysis.hpp"

namespace abx {

// Aligned regression table, one column per fit: estimate, stars, SE in
// parentheses, then N / R2 / residual SE / F footer and the star legend.
std::string render_fit_table(const std::string& title, std::span<const FitResult> columns);

// Machine-readable fit dump; reals carry 17 significant digits.
std::string fit_to_json(const FitResult& result);

std::string render_sweep_table(std::span<const SweepRow> rows);
std::string sweep_to_csv(std::span<const SweepRow> rows);
// Figure-style series: estimate plus lower/upper band per estimator.
std::string sweep_plot_csv(std::span<const SweepRow> rows);

std::string uplift_to_text(const UpliftProjection& p);
std::string uplift_to_json(const UpliftProjection& p);

}  // namespace abx
