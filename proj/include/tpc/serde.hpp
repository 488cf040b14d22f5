#pragma once

#include <json.hpp>

#include "tpc/neural.hpp"

namespace tpc::neural {

// nlohmann ADL hooks. Init and optimizer specs accept both the string
// shorthand ("glorot_uniform", "adam") and the parameterized object form.

void to_json(nlohmann::json& j, const KernelInitSpec& s);
void from_json(const nlohmann::json& j, KernelInitSpec& s);

void to_json(nlohmann::json& j, const RecurrentInitSpec& s);
void from_json(const nlohmann::json& j, RecurrentInitSpec& s);

void to_json(nlohmann::json& j, const OptimizerSpec& s);
void from_json(const nlohmann::json& j, OptimizerSpec& s);

void to_json(nlohmann::json& j, const HyperParams& hp);
void from_json(const nlohmann::json& j, HyperParams& hp);

}  // namespace tpc::neural
