#include "csac/checkpoint.hpp"

#include <fstream>

#include "csac/errors.hpp"

namespace csac {

Json mlp_to_json(const Mlp& net) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weight(l);
    const auto b = net.bias(l);
    layers.push_back({{"weight", std::vector<double>(w.begin(), w.end())},
                      {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"layer_sizes", net.layer_sizes()},
          {"hidden_activation", "relu"},
          {"output_activation", "identity"},
          {"layers", std::move(layers)}};
}

Mlp mlp_from_json(const Json& j) {
  check_format_version(j);
  try {
    Mlp net(j.at("layer_sizes").get<std::vector<std::size_t>>());
    const auto& layers = j.at("layers");
    if (layers.size() != net.num_layers()) {
      throw ValidationError("checkpoint: layer count does not match layer_sizes");
    }
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const auto w = layers[l].at("weight").get<std::vector<double>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      auto dw = net.weight(l);
      auto db = net.bias(l);
      if (w.size() != dw.size() || b.size() != db.size()) {
        throw ValidationError("checkpoint: parameter array size mismatch in layer " +
                              std::to_string(l));
      }
      std::copy(w.begin(), w.end(), dw.begin());
      std::copy(b.begin(), b.end(), db.begin());
    }
    return net;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed network: ") + e.what());
  }
}

Json adam_to_json(const Adam& opt) {
  const auto& c = opt.config();
  return {{"steps", opt.steps()},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"m", opt.first_moment()},
          {"v", opt.second_moment()}};
}

Adam adam_from_json(const Json& j) {
  try {
    AdamConfig c{j.at("learning_rate").get<double>(), j.at("beta1").get<double>(),
                 j.at("beta2").get<double>(), j.at("epsilon").get<double>()};
    auto m = j.at("m").get<std::vector<double>>();
    auto v = j.at("v").get<std::vector<double>>();
    Adam opt(m.size(), c);
    opt.restore(j.at("steps").get<std::uint64_t>(), std::move(m), std::move(v));
    return opt;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed optimizer state: ") + e.what());
  }
}

Json network_checkpoint(const Mlp& net, const Adam& opt) {
  Json j = mlp_to_json(net);
  j["optimizer"] = adam_to_json(opt);
  return j;
}

void check_format_version(const Json& j) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw ValidationError("checkpoint: missing format_version");
  }
  if (j["format_version"] != kCheckpointFormatVersion) {
    throw ValidationError("checkpoint: unsupported format_version " + j["format_version"].dump());
  }
}

void save_json(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << j.dump(1) << '\n';
    if (!out) throw ValidationError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace csac
