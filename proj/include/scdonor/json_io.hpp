#pragma once

#include <string>

#include "scdonor/estimate.hpp"
#include "scdonor/experiment.hpp"
#include "scdonor/selection.hpp"
#include "scdonor/sensitivity.hpp"
#include "scdonor/simulator.hpp"

namespace scdonor {

// JSON (de)serialization for configs and reports. Parsing is strict: unknown
// keys are rejected by name, omitted config fields take their defaults.

std::string sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const std::string& text);

std::string selection_config_to_json(const SelectionConfig& config);
SelectionConfig selection_config_from_json(const std::string& text);

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const std::string& text);

std::string selection_report_to_json(const SelectionReport& report);
SelectionReport selection_report_from_json(const std::string& text);

std::string effect_to_json(const EffectEstimate& estimate);
std::string effect_to_csv(const EffectEstimate& estimate);

std::string sensitivity_to_json(const SensitivityReport& report);
std::string fn_curve_to_csv(const SensitivityReport& report);

std::string bias_summary_to_json(const BiasSummary& summary);
std::string bias_summary_to_csv(const BiasSummary& summary);

std::string semi_synthetic_to_json(const SemiSyntheticReport& report);

std::string sim_truth_to_json(const SimTrace& trace);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace scdonor
