#include "tpc/serde.hpp"

namespace tpc::neural {

void to_json(nlohmann::json& j, const KernelInitSpec& s) {
  switch (s.kind) {
    case KernelInit::GlorotUniform: j = "glorot_uniform"; break;
    case KernelInit::HeUniform: j = "he_uniform"; break;
    case KernelInit::ScaledUniform: j = {{"type", "scaled_uniform"}, {"limit", s.limit}}; break;
  }
}

void from_json(const nlohmann::json& j, KernelInitSpec& s) {
  const std::string type = j.is_string() ? j.get<std::string>()
                                         : j.at("type").get<std::string>();
  if (type == "glorot_uniform") {
    s.kind = KernelInit::GlorotUniform;
  } else if (type == "he_uniform") {
    s.kind = KernelInit::HeUniform;
  } else if (type == "scaled_uniform") {
    s.kind = KernelInit::ScaledUniform;
    s.limit = j.is_object() ? j.value("limit", 0.05) : 0.05;
  } else {
    throw Error(Errc::BadShape, "unknown kernel init '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const RecurrentInitSpec& s) {
  switch (s.kind) {
    case RecurrentInit::GlorotUniform: j = "glorot_uniform"; break;
    case RecurrentInit::ScaledIdentity:
      j = {{"type", "scaled_identity"}, {"gain", s.gain}};
      break;
  }
}

void from_json(const nlohmann::json& j, RecurrentInitSpec& s) {
  const std::string type = j.is_string() ? j.get<std::string>()
                                         : j.at("type").get<std::string>();
  if (type == "glorot_uniform") {
    s.kind = RecurrentInit::GlorotUniform;
  } else if (type == "scaled_identity") {
    s.kind = RecurrentInit::ScaledIdentity;
    s.gain = j.is_object() ? j.value("gain", 1.0) : 1.0;
  } else {
    throw Error(Errc::BadShape, "unknown recurrent init '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const OptimizerSpec& s) {
  if (s.kind == OptimizerKind::Adam) {
    j = {{"type", "adam"},
         {"learning_rate", s.learning_rate},
         {"beta1", s.beta1},
         {"beta2", s.beta2},
         {"epsilon", s.epsilon}};
  } else {
    j = {{"type", "sgd"}, {"learning_rate", s.learning_rate}};
  }
}

void from_json(const nlohmann::json& j, OptimizerSpec& s) {
  const std::string type = j.is_string() ? j.get<std::string>()
                                         : j.at("type").get<std::string>();
  if (type == "adam") {
    s.kind = OptimizerKind::Adam;
    if (j.is_object()) {
      s.learning_rate = j.value("learning_rate", 1e-3);
      s.beta1 = j.value("beta1", 0.9);
      s.beta2 = j.value("beta2", 0.999);
      s.epsilon = j.value("epsilon", 1e-8);
    } else {
      s = OptimizerSpec{};
    }
  } else if (type == "sgd") {
    s.kind = OptimizerKind::Sgd;
    s.learning_rate = j.is_object() ? j.value("learning_rate", 1e-2) : 1e-2;
  } else {
    throw Error(Errc::BadShape, "unknown optimizer '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const HyperParams& hp) {
  j = {{"output_size", hp.output_size},
       {"kernel_init", hp.kernel_init},
       {"recurrent_init", hp.recurrent_init},
       {"dropout_rate", hp.dropout_rate},
       {"output_activation", "softmax"},
       {"optimizer", hp.optimizer},
       {"batch_size", hp.batch_size},
       {"num_layers", hp.num_layers},
       {"epochs", hp.epochs},
       {"seed", hp.seed}};
}

void from_json(const nlohmann::json& j, HyperParams& hp) {
  hp.output_size = j.at("output_size").get<int>();
  hp.kernel_init = j.at("kernel_init").get<KernelInitSpec>();
  hp.recurrent_init = j.at("recurrent_init").get<RecurrentInitSpec>();
  hp.dropout_rate = j.at("dropout_rate").get<double>();
  if (j.contains("output_activation") &&
      j["output_activation"].get<std::string>() != "softmax") {
    throw Error(Errc::BadShape, "output activation is always softmax");
  }
  hp.optimizer = j.at("optimizer").get<OptimizerSpec>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.num_layers = j.at("num_layers").get<int>();
  hp.epochs = j.at("epochs").get<int>();
  hp.seed = j.value("seed", std::uint64_t{0});
}

}  // namespace tpc::neural
