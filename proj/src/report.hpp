#pragma once

#include <string>
#include <vector>

#include "sweeps.hpp"

namespace cpcseq::eval {

void write_text_file(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const nlohmann::json& j);

// Line chart with one line per group (median over seeds) and a shaded
// min-max band, written as a standalone SVG document.
std::string sweep_svg(const SweepResult& result);

// Per-step pretext accuracy chart (one line per encoder), for encoder
// ablation results that carry "per_seed_step_accuracy".
std::string step_accuracy_svg(const SweepResult& result);

}  // namespace cpcseq::eval
