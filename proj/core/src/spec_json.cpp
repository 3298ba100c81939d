#include "spec_json.hpp"

#include <algorithm>

#include "dsc/error.hpp"

namespace dsc::detail {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

json network_spec_to_json(const NetworkSpec& spec) {
  json stages = json::array();
  for (const MBConvSpec& s : spec.stages) {
    stages.push_back({{"expansion_factor", s.expansion_factor},
                      {"out_channels", s.out_channels},
                      {"repeat", s.repeat},
                      {"stride", s.stride},
                      {"dw_kernel", s.dw_kernel},
                      {"se_ratio", s.se_ratio}});
  }
  return {{"name", spec.name},
          {"input_h", spec.input_h},
          {"input_w", spec.input_w},
          {"input_c", spec.input_c},
          {"stem_filters", spec.stem_filters},
          {"stem_stride", spec.stem_stride},
          {"stages", stages},
          {"head_channels", spec.head_channels},
          {"num_classes", spec.num_classes},
          {"extractor_frozen", spec.extractor_frozen}};
}

NetworkSpec network_spec_from_json(const json& j, const std::string& where) {
  check_keys(j,
             {"name", "input_h", "input_w", "input_c", "stem_filters",
              "stem_stride", "stages", "head_channels", "num_classes",
              "extractor_frozen"},
             where);
  NetworkSpec spec;
  spec.name = j.value("name", std::string("custom"));
  spec.input_h = j.value("input_h", spec.input_h);
  spec.input_w = j.value("input_w", spec.input_w);
  spec.input_c = j.value("input_c", spec.input_c);
  spec.stem_filters = j.value("stem_filters", spec.stem_filters);
  spec.stem_stride = j.value("stem_stride", spec.stem_stride);
  spec.head_channels = j.value("head_channels", spec.head_channels);
  spec.num_classes = j.value("num_classes", spec.num_classes);
  spec.extractor_frozen = j.value("extractor_frozen", spec.extractor_frozen);
  if (!j.contains("stages")) {
    throw ConfigError(where + ": missing 'stages'");
  }
  spec.stages.clear();
  size_t idx = 0;
  for (const json& js : j.at("stages")) {
    const std::string stage_where =
        where + ".stages[" + std::to_string(idx++) + "]";
    check_keys(js,
               {"expansion_factor", "out_channels", "repeat", "stride",
                "dw_kernel", "se_ratio"},
               stage_where);
    MBConvSpec s;
    s.expansion_factor = js.value("expansion_factor", s.expansion_factor);
    if (!js.contains("out_channels")) {
      throw ConfigError(stage_where + ": missing 'out_channels'");
    }
    s.out_channels = js.at("out_channels").get<int64_t>();
    s.repeat = js.value("repeat", s.repeat);
    s.stride = js.value("stride", s.stride);
    s.dw_kernel = js.value("dw_kernel", s.dw_kernel);
    s.se_ratio = js.value("se_ratio", s.se_ratio);
    spec.stages.push_back(s);
  }
  validate_network_spec(spec);
  return spec;
}

json schedule_to_json(const Schedule& schedule) {
  json out = json::array();
  for (const ScheduleSegment& seg : schedule) {
    json j;
    if (std::holds_alternative<SgdConfig>(seg.optimizer)) {
      const SgdConfig& c = std::get<SgdConfig>(seg.optimizer);
      j = {{"optimizer", "sgd"},
           {"epochs", seg.epochs},
           {"learning_rate", c.learning_rate},
           {"momentum", c.momentum}};
    } else {
      const AdamConfig& c = std::get<AdamConfig>(seg.optimizer);
      j = {{"optimizer", "adam"},
           {"epochs", seg.epochs},
           {"learning_rate", c.learning_rate},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"epsilon", c.epsilon}};
    }
    out.push_back(j);
  }
  return out;
}

Schedule schedule_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(where + ": schedule must be a non-empty array");
  }
  Schedule schedule;
  size_t idx = 0;
  for (const json& js : j) {
    const std::string seg_where = where + "[" + std::to_string(idx++) + "]";
    if (!js.contains("optimizer")) {
      throw ConfigError(seg_where + ": missing 'optimizer'");
    }
    const std::string kind = js.at("optimizer").get<std::string>();
    ScheduleSegment seg;
    if (kind == "sgd") {
      check_keys(js, {"optimizer", "epochs", "learning_rate", "momentum"},
                 seg_where);
      SgdConfig c;
      c.learning_rate = js.value("learning_rate", c.learning_rate);
      c.momentum = js.value("momentum", c.momentum);
      seg.optimizer = c;
    } else if (kind == "adam") {
      check_keys(js,
                 {"optimizer", "epochs", "learning_rate", "beta1", "beta2",
                  "epsilon"},
                 seg_where);
      AdamConfig c;
      c.learning_rate = js.value("learning_rate", c.learning_rate);
      c.beta1 = js.value("beta1", c.beta1);
      c.beta2 = js.value("beta2", c.beta2);
      c.epsilon = js.value("epsilon", c.epsilon);
      seg.optimizer = c;
    } else {
      throw ConfigError(seg_where + ": optimizer must be 'sgd' or 'adam'");
    }
    if (!js.contains("epochs")) {
      throw ConfigError(seg_where + ": missing 'epochs'");
    }
    seg.epochs = js.at("epochs").get<int>();
    schedule.push_back(seg);
  }
  return schedule;
}

}  // namespace dsc::detail
