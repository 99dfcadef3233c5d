#pragma once

// Dense row-major double tensors plus a small JSON manifest format used to
// load and store named weight sets.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqnav/errors.hpp"

namespace seqnav {

// Row-major dense tensor of doubles. The last axis varies fastest, so a
// {channels, rows, cols} tensor stores scanlines contiguously.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    values_.assign(element_count(shape_), 0.0);
  }

  static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values) {
    Tensor t;
    detail::require(element_count(shape) == values.size(),
                    "Tensor::from_values: value count does not match shape");
    t.shape_ = std::move(shape);
    t.values_ = std::move(values);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double& operator()(std::size_t i) {
    detail::require(rank() == 1 && i < shape_[0], "Tensor: rank-1 index out of range");
    return values_[i];
  }
  double operator()(std::size_t i) const {
    detail::require(rank() == 1 && i < shape_[0], "Tensor: rank-1 index out of range");
    return values_[i];
  }
  double& operator()(std::size_t r, std::size_t c) {
    detail::require(rank() == 2 && r < shape_[0] && c < shape_[1],
                    "Tensor: rank-2 index out of range");
    return values_[r * shape_[1] + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return const_cast<Tensor&>(*this)(r, c);
  }
  double& operator()(std::size_t ch, std::size_t r, std::size_t c) {
    detail::require(rank() == 3 && ch < shape_[0] && r < shape_[1] && c < shape_[2],
                    "Tensor: rank-3 index out of range");
    return values_[(ch * shape_[1] + r) * shape_[2] + c];
  }
  double operator()(std::size_t ch, std::size_t r, std::size_t c) const {
    return const_cast<Tensor&>(*this)(ch, r, c);
  }
  double& operator()(std::size_t o, std::size_t i, std::size_t r, std::size_t c) {
    detail::require(rank() == 4 && o < shape_[0] && i < shape_[1] && r < shape_[2] && c < shape_[3],
                    "Tensor: rank-4 index out of range");
    return values_[((o * shape_[1] + i) * shape_[2] + r) * shape_[3] + c];
  }
  double operator()(std::size_t o, std::size_t i, std::size_t r, std::size_t c) const {
    return const_cast<Tensor&>(*this)(o, i, r, c);
  }

  bool same_shape(const std::vector<std::size_t>& s) const { return shape_ == s; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }
  friend bool operator!=(const Tensor& a, const Tensor& b) { return !(a == b); }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

using TensorMap = std::map<std::string, Tensor>;

inline constexpr const char* kTensorManifestFormat = "seqnav-tensors/1";

// Serializes named tensors as {"format": ..., "tensors": [{name, shape,
// values}, ...]} with entries in name order. Doubles round-trip exactly.
inline std::string tensors_to_json(const TensorMap& tensors) {
  nlohmann::json root;
  root["format"] = kTensorManifestFormat;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["values"] = t.values();
    list.push_back(std::move(entry));
  }
  root["tensors"] = std::move(list);
  return root.dump();
}

inline TensorMap tensors_from_json(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("tensor manifest: invalid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("format") || !root["format"].is_string())
    throw ParseError("tensor manifest: missing format tag");
  if (root["format"].get<std::string>() != kTensorManifestFormat)
    throw ParseError("tensor manifest: unsupported format '" +
                     root["format"].get<std::string>() + "', expected '" +
                     kTensorManifestFormat + "'");
  if (!root.contains("tensors") || !root["tensors"].is_array())
    throw ParseError("tensor manifest: missing tensors array");

  TensorMap out;
  for (const auto& entry : root["tensors"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string())
      throw ParseError("tensor manifest: tensor entry missing name");
    const std::string name = entry["name"].get<std::string>();
    if (out.count(name))
      throw ParseError("tensor manifest: duplicate tensor name '" + name + "'");
    if (!entry.contains("shape") || !entry["shape"].is_array())
      throw ParseError("tensor manifest: tensor '" + name + "' missing shape");
    std::vector<std::size_t> shape;
    for (const auto& d : entry["shape"]) {
      if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0)
        throw ParseError("tensor manifest: tensor '" + name +
                         "' has a non-positive dimension");
      shape.push_back(static_cast<std::size_t>(d.get<std::uint64_t>()));
    }
    if (!entry.contains("values") || !entry["values"].is_array())
      throw ParseError("tensor manifest: tensor '" + name + "' missing values");
    std::vector<double> values;
    values.reserve(entry["values"].size());
    for (const auto& v : entry["values"]) {
      if (!v.is_number())
        throw ParseError("tensor manifest: tensor '" + name +
                         "' has a non-numeric value");
      values.push_back(v.get<double>());
    }
    if (values.size() != Tensor::element_count(shape))
      throw ParseError("tensor manifest: tensor '" + name +
                       "' value count does not match its shape");
    out.emplace(name, Tensor::from_values(std::move(shape), std::move(values)));
  }
  return out;
}

// Fetches a required tensor with an exact shape from a parsed manifest.
inline const Tensor& manifest_tensor(const TensorMap& tensors, const std::string& name,
                                     const std::vector<std::size_t>& shape) {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw ParseError("tensor manifest: missing tensor '" + name + "'");
  if (!it->second.same_shape(shape)) {
    std::string got = "{";
    for (std::size_t i = 0; i < it->second.shape().size(); ++i)
      got += (i ? "," : "") + std::to_string(it->second.shape()[i]);
    got += "}";
    throw ParseError("tensor manifest: tensor '" + name + "' has shape " + got +
                     " but a different shape is required");
  }
  return it->second;
}

}  // namespace seqnav
