#ifndef RADCAP_CONFIG_JSON_HPP
#define RADCAP_CONFIG_JSON_HPP

#include <json.hpp>

#include "radcap/fusion.hpp"
#include "radcap/model.hpp"
#include "radcap/qformer.hpp"
#include "radcap/train.hpp"

namespace radcap {

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

void to_json(nlohmann::json& j, const QFormerConfig& c);
void from_json(const nlohmann::json& j, QFormerConfig& c);

void to_json(nlohmann::json& j, const FusionConfig& c);
void from_json(const nlohmann::json& j, FusionConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace radcap

#endif
