// SPDX-License-Identifier: Apache-2.0
#include "sqish/checkpoint.hpp"

#include <cmath>
#include <limits>
#include <type_traits>

#include "json.hpp"
#include "sqish/data.hpp"

namespace sqish {
namespace {

using nlohmann::json;

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double get_num(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("checkpoint: bad number '" + s + "'", 0);
  }
  return j.get<double>();
}

template <typename T>
const char* precision_tag() {
  return std::is_same_v<T, float> ? "f32" : "f64";
}

json activation_json(const ActivationKind& kind) {
  json j = {{"type", "activation"}, {"kind", std::string(activation_name(kind))}};
  std::visit(Overloaded{
                 [&](const act::LeakyRelu& k) { j["params"] = {num(k.a)}; },
                 [&](const act::Prelu& k) { j["params"] = {num(k.a)}; },
                 [&](const act::Elu& k) { j["params"] = {num(k.alpha)}; },
                 [&](const act::Swish& k) { j["params"] = {num(k.beta)}; },
                 [&](const act::Sqish& k) {
                   const auto& p = k.params;
                   j["params"] = {num(p.a()), num(p.beta()), num(p.gamma())};
                   j["trainable"] = {p.trainable().a, p.trainable().beta, p.trainable().gamma};
                 },
                 [&](const auto&) { j["params"] = json::array(); },
             },
             kind);
  return j;
}

ActivationKind activation_from(const json& j) {
  ActivationKind kind = parse_activation(j.at("kind").get<std::string>());
  const auto& p = j.at("params");
  const auto at = [&](std::size_t i) { return get_num(p.at(i)); };
  std::visit(Overloaded{
                 [&](act::LeakyRelu& k) { k.a = at(0); },
                 [&](act::Prelu& k) { k.a = at(0); },
                 [&](act::Elu& k) { k.alpha = at(0); },
                 [&](act::Swish& k) { k.beta = at(0); },
                 [&](act::Sqish& k) {
                   const auto& t = j.at("trainable");
                   k.params = SqishParams(at(0), at(1), at(2),
                                          TrainableMask{t.at(0).get<bool>(), t.at(1).get<bool>(), t.at(2).get<bool>()});
                 },
                 [](auto&) {},
             },
             kind);
  return kind;
}

json spec_json(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const DenseSpec& s) -> json { return {{"type", "dense"}, {"in", s.in}, {"out", s.out}}; },
                        [](const Conv2DSpec& s) -> json {
                          return {{"type", "conv"},        {"in_ch", s.in_ch},   {"out_ch", s.out_ch},
                                  {"kernel", s.kernel},    {"stride", s.stride}, {"pad", s.pad}};
                        },
                        [](const MaxPoolSpec& s) -> json {
                          return {{"type", "pool"}, {"kernel", s.kernel}, {"stride", s.stride}};
                        },
                        [](const FlattenSpec&) -> json { return {{"type", "flatten"}}; },
                        [](const ActivationSpec& s) -> json { return activation_json(s.kind); },
                    },
                    spec);
}

LayerSpec spec_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "dense") return DenseSpec{j.at("in").get<Index>(), j.at("out").get<Index>()};
  if (type == "conv") {
    return Conv2DSpec{j.at("in_ch").get<Index>(), j.at("out_ch").get<Index>(), j.at("kernel").get<Index>(),
                      j.at("stride").get<Index>(), j.at("pad").get<Index>()};
  }
  if (type == "pool") return MaxPoolSpec{j.at("kernel").get<Index>(), j.at("stride").get<Index>()};
  if (type == "flatten") return FlattenSpec{};
  if (type == "activation") return ActivationSpec{activation_from(j)};
  throw FormatError("checkpoint: unknown layer type '" + type + "'", 0);
}

}  // namespace

template <typename T>
std::string checkpoint_to_json(const Network<T>& net) {
  json j = {{"format", "sqish-checkpoint"},
            {"version", kCheckpointVersion},
            {"precision", precision_tag<T>()},
            {"seed", net.seed()},
            {"input_shape", net.input_shape()}};
  j["layers"] = json::array();
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const auto& layer = net.layer(i);
    json l = spec_json(layer.spec());
    l["tensors"] = json::array();
    for (const auto& p : layer.params()) {
      json data = json::array();
      for (Index k = 0; k < p.size(); ++k) data.push_back(num(static_cast<double>(p[k])));
      l["tensors"].push_back({{"shape", p.shape()}, {"data", std::move(data)}});
    }
    j["layers"].push_back(std::move(l));
  }
  return j.dump(1);
}

template <typename T>
Network<T> checkpoint_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "sqish-checkpoint") throw FormatError("checkpoint: not a checkpoint file", 0);
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("checkpoint: unsupported version " + j.at("version").dump(), 0);
    }
    if (j.at("precision") != precision_tag<T>()) {
      throw FormatError("checkpoint: stored precision " + j.at("precision").get<std::string>() + " does not match " +
                            precision_tag<T>(),
                        0);
    }
    std::vector<LayerSpec> specs;
    for (const auto& l : j.at("layers")) specs.push_back(spec_from(l));
    Network<T> net(specs, j.at("input_shape").get<Shape>(), j.at("seed").get<std::uint64_t>());
    const auto& layers = j.at("layers");
    for (std::size_t i = 0; i < net.num_layers(); ++i) {
      auto& params = net.layer(i).params();
      const auto& tensors = layers.at(i).at("tensors");
      if (tensors.size() != params.size()) {
        throw FormatError("checkpoint: layer " + std::to_string(i) + " has " + std::to_string(tensors.size()) +
                              " tensors, expected " + std::to_string(params.size()),
                          0);
      }
      for (std::size_t k = 0; k < params.size(); ++k) {
        const auto shape = tensors.at(k).at("shape").get<Shape>();
        const auto& data = tensors.at(k).at("data");
        if (shape != params[k].shape() || static_cast<Index>(data.size()) != params[k].size()) {
          throw FormatError("checkpoint: layer " + std::to_string(i) + " tensor " + std::to_string(k) +
                                " has shape " + shape_str(shape) + ", expected " + shape_str(params[k].shape()),
                            0);
        }
        for (Index e = 0; e < params[k].size(); ++e) {
          params[k][e] = static_cast<T>(get_num(data.at(static_cast<std::size_t>(e))));
        }
      }
    }
    net.mark_updated();
    return net;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what(), 0);
  }
}

template <typename T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path) {
  const std::string text = checkpoint_to_json(net);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return checkpoint_from_json<T>(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

template std::string checkpoint_to_json(const Network<float>&);
template std::string checkpoint_to_json(const Network<double>&);
template Network<float> checkpoint_from_json<float>(std::string_view);
template Network<double> checkpoint_from_json<double>(std::string_view);
template void save_checkpoint(const Network<float>&, const std::filesystem::path&);
template void save_checkpoint(const Network<double>&, const std::filesystem::path&);
template Network<float> load_checkpoint<float>(const std::filesystem::path&);
template Network<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace sqish
