/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "sbnn/nn/snapshot.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sbnn/model_io.hpp"

namespace sbnn::nn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "sbnn-snapshot";
constexpr int kSnapshotVersion = 1;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void assign(Eigen::VectorXd& dst, const json& src, const std::string& what) {
  const auto v = src.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != dst.size()) {
    throw ValidationError("snapshot: " + what + " has " + std::to_string(v.size()) + " values, expected " +
                          std::to_string(dst.size()));
  }
  dst = Eigen::Map<const Eigen::VectorXd>(v.data(), dst.size());
}

json block_json(const WeightBlock& b) {
  json j{{"latent", vec(b.latent())}};
  if (b.binarized()) {
    const auto o = b.omega();
    j["omega"] = {o.tau, o.phi};
  }
  return j;
}

void load_block(WeightBlock& b, const json& j) {
  assign(b.latent(), j.at("latent"), "latent weights");
  if (b.binarized()) {
    const auto o = j.at("omega").get<std::vector<double>>();
    if (o.size() != 2) throw ValidationError("snapshot: omega needs two values");
    b.set_omega({o[0], o[1]});
  }
}

}  // namespace

json to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"kind", to_string(l.kind)},
                      {"out", l.out},
                      {"stride", l.stride},
                      {"padding", l.padding},
                      {"binarized", l.binarized},
                      {"omega", to_string(l.omega_mode)}});
  }
  return {{"input", {spec.input.channels, spec.input.height, spec.input.width}}, {"layers", layers}};
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  const auto in = j.at("input").get<std::vector<int>>();
  if (in.size() != 3) throw ValidationError("snapshot: input shape needs three values");
  spec.input = {in[0], in[1], in[2]};
  for (const auto& l : j.at("layers")) {
    spec.layers.push_back({parse_layer_kind(l.at("kind").get<std::string>()), l.at("out").get<int>(),
                           l.at("stride").get<int>(), l.at("padding").get<int>(),
                           l.at("binarized").get<bool>(),
                           parse_omega_mode(l.at("omega").get<std::string>())});
  }
  return spec;
}

json snapshot_json(Network& net) {
  json params = json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    Layer& l = net.layer(i);
    if (auto* c = dynamic_cast<Conv3x3*>(&l)) {
      params.push_back(block_json(c->block()));
    } else if (auto* f = dynamic_cast<Linear*>(&l)) {
      json p = block_json(f->block());
      if (f->bias().size()) p["bias"] = vec(f->bias());
      params.push_back(p);
    } else if (auto* bn = dynamic_cast<BatchNorm*>(&l)) {
      params.push_back({{"gamma", vec(bn->gamma)},
                        {"beta", vec(bn->beta)},
                        {"running_mean", vec(bn->running_mean)},
                        {"running_var", vec(bn->running_var)},
                        {"eps", bn->eps},
                        {"momentum", bn->momentum}});
    } else {
      params.push_back(json::object());
    }
  }
  return {{"format", kFormat}, {"version", kSnapshotVersion}, {"spec", to_json(net.spec())}, {"params", params}};
}

Network network_from_json(const json& j) {
  try {
    if (j.at("format") != kFormat) throw ValidationError("snapshot: unknown format");
    if (j.at("version") != kSnapshotVersion) throw ValidationError("snapshot: unsupported version");
    Network net(spec_from_json(j.at("spec")), 0);
    const json& params = j.at("params");
    if (params.size() != net.size()) throw ValidationError("snapshot: parameter list does not match layers");
    for (std::size_t i = 0; i < net.size(); ++i) {
      Layer& l = net.layer(i);
      const json& p = params[i];
      if (auto* c = dynamic_cast<Conv3x3*>(&l)) {
        load_block(c->block(), p);
      } else if (auto* f = dynamic_cast<Linear*>(&l)) {
        load_block(f->block(), p);
        if (f->bias().size()) assign(f->bias(), p.at("bias"), "bias");
      } else if (auto* bn = dynamic_cast<BatchNorm*>(&l)) {
        assign(bn->gamma, p.at("gamma"), "gamma");
        assign(bn->beta, p.at("beta"), "beta");
        assign(bn->running_mean, p.at("running_mean"), "running_mean");
        assign(bn->running_var, p.at("running_var"), "running_var");
        bn->eps = p.at("eps").get<double>();
        bn->momentum = p.at("momentum").get<double>();
      }
    }
    return net;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("snapshot: ") + e.what());
  }
}

void save_snapshot(Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << snapshot_json(net).dump(1) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

Network load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return network_from_json(j);
}

std::string snapshot_id(Network& net) {
  const std::string text = snapshot_json(net).dump();
  const std::uint32_t crc = model_io::crc32(
      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

}  // namespace sbnn::nn
