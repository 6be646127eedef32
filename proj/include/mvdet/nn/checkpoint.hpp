#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvdet/nn/network.hpp"

// Checkpoint file layout:
//   8 bytes   magic "MVDETCK1"
//   8 bytes   header length N, unsigned little-endian
//   N bytes   JSON header; "blocks" lists {name, offset, length} with offsets
//             and lengths in bytes relative to the start of the data section
//   ...       data section: little-endian IEEE-754 float64 parameter blocks

namespace mvdet::nn {

using json = nlohmann::json;

inline json spec_to_json(const LayerSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Conv2dSpec>)
          return {{"kind", "Conv2d"}, {"in_ch", s.in_ch}, {"out_ch", s.out_ch},
                  {"k", s.k},         {"stride", s.stride}, {"pad", s.pad}};
        else if constexpr (std::is_same_v<S, ReLUSpec>) return {{"kind", "ReLU"}};
        else if constexpr (std::is_same_v<S, MaxPoolSpec>)
          return {{"kind", "MaxPool"}, {"k", s.k}, {"stride", s.stride}};
        else if constexpr (std::is_same_v<S, LinearSpec>)
          return {{"kind", "Linear"}, {"in", s.in}, {"out", s.out}};
        else if constexpr (std::is_same_v<S, FlattenSpec>) return {{"kind", "Flatten"}};
        else if constexpr (std::is_same_v<S, LogSoftmaxSpec>) return {{"kind", "LogSoftmax"}};
        else return {{"kind", "Dropout"}, {"rate", s.rate}};
      },
      spec);
}

inline LayerSpec spec_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "Conv2d")
    return Conv2dSpec{j.at("in_ch"), j.at("out_ch"), j.at("k"), j.at("stride"), j.at("pad")};
  if (kind == "ReLU") return ReLUSpec{};
  if (kind == "MaxPool") return MaxPoolSpec{j.at("k"), j.at("stride")};
  if (kind == "Linear") return LinearSpec{j.at("in"), j.at("out")};
  if (kind == "Flatten") return FlattenSpec{};
  if (kind == "LogSoftmax") return LogSoftmaxSpec{};
  if (kind == "Dropout") return DropoutSpec{j.at("rate").get<double>()};
  throw ValidationError("unknown layer kind '" + kind + "'");
}

class CheckpointWriter {
 public:
  /// Appends a parameter block to the data section.
  void add_block(const std::string& name, std::span<const double> values) {
    blocks_.push_back({{"name", name}, {"offset", data_.size()}, {"length", values.size() * 8}});
    for (double v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      for (int i = 0; i < 8; ++i) data_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
    }
  }

  /// Adds the network's specs to `header[key]` and its parameters as blocks
  /// named "<prefix>.<layer>.<param>".
  void add_network(json& header, const std::string& key, const Network& net,
                   const std::string& prefix) {
    json layers = json::array();
    for (const auto& s : net.specs()) layers.push_back(spec_to_json(s));
    header[key] = {{"layers", layers}, {"seed", net.seed()}};
    for (std::size_t i = 0; i < net.num_layers(); ++i)
      for (const auto& p : net.layer(i).params())
        add_block(prefix + "." + std::to_string(i) + "." + p.name, p.value.values());
  }

  void write(const std::string& path, json header) const {
    header["blocks"] = blocks_;
    header["format"] = "mvdet-checkpoint-1";
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write("MVDETCK1", 8);
    const std::uint64_t n = text.size();
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((n >> (8 * i)) & 0xffu));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(data_.data(), static_cast<std::streamsize>(data_.size()));
    if (!out) throw Error("write failed for '" + path + "'");
  }

 private:
  json blocks_ = json::array();
  std::vector<char> data_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "MVDETCK1", 8) != 0)
      throw ValidationError("'" + path + "' is not an mvdet checkpoint");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(static_cast<unsigned char>(in.get())) << (8 * i);
    std::string text(n, '\0');
    in.read(text.data(), static_cast<std::streamsize>(n));
    header_ = json::parse(text);
    data_.assign(std::istreambuf_iterator<char>(in), {});
  }

  const json& header() const { return header_; }

  std::vector<double> block(const std::string& name) const {
    for (const auto& b : header_.at("blocks")) {
      if (b.at("name") != name) continue;
      const std::size_t off = b.at("offset"), len = b.at("length");
      if (off + len > data_.size() || len % 8 != 0)
        throw ValidationError("checkpoint block '" + name + "' out of bounds");
      std::vector<double> out(len / 8);
      for (std::size_t k = 0; k < out.size(); ++k) {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
          bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[off + 8 * k + i])) << (8 * i);
        std::memcpy(&out[k], &bits, 8);
      }
      return out;
    }
    throw ValidationError("checkpoint has no block '" + name + "'");
  }

  Network network(const std::string& key, const std::string& prefix) const {
    const json& j = header_.at(key);
    std::vector<LayerSpec> specs;
    for (const auto& l : j.at("layers")) specs.push_back(spec_from_json(l));
    Network net(specs, j.at("seed").get<std::uint64_t>());
    for (std::size_t i = 0; i < net.num_layers(); ++i)
      for (auto& p : net.layer(i).params()) {
        auto values = block(prefix + "." + std::to_string(i) + "." + p.name);
        if (values.size() != p.value.size())
          throw ValidationError("checkpoint block size mismatch for " + prefix);
        std::copy(values.begin(), values.end(), p.value.data());
      }
    return net;
  }

 private:
  json header_;
  std::vector<char> data_;
};

}  // namespace mvdet::nn
