#pragma once

// Internal helpers shared by the run-config loader and the checkpoint
// header: NetworkSpec and friends as JSON.

#include <json.hpp>

#include "dsc/augment.hpp"
#include "dsc/network.hpp"
#include "dsc/optim.hpp"

namespace dsc::detail {

nlohmann::json network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j,
                                   const std::string& where);

nlohmann::json schedule_to_json(const Schedule& schedule);
Schedule schedule_from_json(const nlohmann::json& j, const std::string& where);

// Rejects keys outside `allowed`, naming the offender and its location.
void check_keys(const nlohmann::json& obj,
                std::initializer_list<const char*> allowed,
                const std::string& where);

}  // namespace dsc::detail
