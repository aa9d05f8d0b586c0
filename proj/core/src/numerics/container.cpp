#include "wmsynth/numerics/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace wmsynth::numerics {

static_assert(std::endian::native == std::endian::little,
              "container payloads are written in host order and must be little-endian");

namespace {

constexpr char kMagic[4] = {'W', 'M', 'S', 'C'};

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw ContainerError("container truncated in header");
  U v;
  std::memcpy(&v, in.data() + pos, sizeof(U));
  pos += sizeof(U);
  return v;
}

}  // namespace

const Tensor& Container::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw ContainerError("container has no tensor '" + name + "'");
}

bool Container::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::string serialize_container(const Container& c) {
  nlohmann::json manifest;
  manifest["format_version"] = kContainerVersion;
  manifest["kind"] = c.kind;
  manifest["meta"] = c.meta;
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : c.tensors) {
    const std::uint64_t nbytes = t.tensor.size() * sizeof(float);
    entries.push_back({{"name", t.name}, {"shape", t.tensor.shape()}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  manifest["tensors"] = entries;
  const std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : c.tensors) {
    out.append(reinterpret_cast<const char*>(t.tensor.data().data()), t.tensor.size() * sizeof(float));
  }
  return out;
}

Container parse_container(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ContainerError("not a parameter container (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kContainerVersion) {
    throw ContainerError("container format version " + std::to_string(version) + ", expected " +
                         std::to_string(kContainerVersion));
  }
  const auto mlen = get<std::uint64_t>(bytes, pos);
  if (pos + mlen > bytes.size()) throw ContainerError("container truncated in manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(pos, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(std::string("container manifest is not valid JSON: ") + e.what());
  }
  pos += mlen;
  const std::size_t payload = pos;

  Container c;
  c.kind = manifest.at("kind").get<std::string>();
  c.meta = manifest.at("meta");
  std::uint64_t expected_end = 0;
  for (const auto& e : manifest.at("tensors")) {
    NamedTensor nt;
    nt.name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<Shape>();
    const auto offset = e.at("offset").get<std::uint64_t>();
    const auto nbytes = e.at("nbytes").get<std::uint64_t>();
    if (nbytes != shape_numel(shape) * sizeof(float)) {
      throw ContainerError("tensor '" + nt.name + "' byte length does not match shape " + shape_string(shape));
    }
    if (payload + offset + nbytes > bytes.size()) {
      throw ContainerError("container truncated: tensor '" + nt.name + "' extends past end of file");
    }
    std::vector<float> data(shape_numel(shape));
    std::memcpy(data.data(), bytes.data() + payload + offset, nbytes);
    nt.tensor = Tensor(shape, std::move(data));
    expected_end = std::max(expected_end, offset + nbytes);
    c.tensors.push_back(std::move(nt));
  }
  if (payload + expected_end != bytes.size()) {
    throw ContainerError("container has " + std::to_string(bytes.size() - payload) +
                         " payload bytes, manifest describes " + std::to_string(expected_end));
  }
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContainerError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes, bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw ContainerError("refusing to overwrite existing '" + path.string() + "' (use force)");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling temp file, then rename, so readers never see partial output.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ContainerError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContainerError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_container(const std::filesystem::path& path, const Container& c, bool force) {
  write_file(path, serialize_container(c), force);
}

Container read_container(const std::filesystem::path& path) { return parse_container(read_file(path)); }

void append_parameters(Container& c, const ParameterStore& store, const std::string& prefix) {
  for (const auto& [name, p] : store.items()) c.tensors.push_back({prefix + name, p.value});
}

void load_parameters(const Container& c, ParameterStore& store, const std::string& prefix) {
  for (auto& [name, p] : store.items()) {
    const Tensor& t = c.tensor(prefix + name);
    if (t.shape() != p.value.shape()) throw ShapeError("checkpoint tensor '" + name + "'", t.shape(), p.value.shape());
    p.value = t;
  }
}

}  // namespace wmsynth::numerics
