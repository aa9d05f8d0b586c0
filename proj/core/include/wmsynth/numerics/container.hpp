#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmsynth/numerics/layers.hpp"

namespace wmsynth::numerics {

// Binary parameter container:
//   "WMSC" | u32 format version | u64 manifest length | manifest (JSON, UTF-8) | payload
// The manifest lists every tensor with name, shape, byte offset into the
// payload and byte length. Payloads are raw little-endian float32.
inline constexpr std::uint32_t kContainerVersion = 1;

class ContainerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Container {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
};

std::string serialize_container(const Container& c);
Container parse_container(const std::string& bytes);

// Refuses to replace an existing file unless `force` is set.
void write_container(const std::filesystem::path& path, const Container& c, bool force = false);
Container read_container(const std::filesystem::path& path);

// Appends every parameter of `store` as "<prefix><name>".
void append_parameters(Container& c, const ParameterStore& store, const std::string& prefix = "");
// Overwrites values of existing parameters from "<prefix><name>" entries. Every
// parameter must be present with a matching shape.
void load_parameters(const Container& c, ParameterStore& store, const std::string& prefix = "");

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes, bool force = false);

}  // namespace wmsynth::numerics
