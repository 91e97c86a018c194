#include "dbd/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dbd::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

void append_array(std::vector<std::uint8_t>& blob, const std::vector<float>& values) {
  const size_t offset = blob.size();
  blob.resize(offset + values.size() * 4);
  std::memcpy(blob.data() + offset, values.data(), values.size() * 4);
}

}  // namespace

void save_checkpoint(Model<float>& model, const fs::path& dir, int step) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory", dir.string());

  json manifest;
  manifest["spec"] = model.spec().to_json();
  manifest["spec_hash"] = model.spec().hash();
  manifest["step"] = step;
  manifest["has_optimizer_state"] = false;

  std::vector<std::uint8_t> blob;
  json arrays = json::array();
  size_t offset = 0;
  for (Param<float>* p : model.params()) {
    arrays.push_back({{"name", p->name}, {"shape", p->shape}, {"offset", offset},
                      {"count", p->value.size()}});
    append_array(blob, p->value);
    offset = blob.size();
  }
  for (Buffer<float>* b : model.buffers()) {
    arrays.push_back({{"name", b->name},
                      {"shape", std::vector<int>{static_cast<int>(b->value.size())}},
                      {"offset", offset},
                      {"count", b->value.size()}});
    append_array(blob, b->value);
    offset = blob.size();
  }
  manifest["arrays"] = std::move(arrays);

  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", (dir / "params.bin").string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write failed", (dir / "params.bin").string());
  }
}

namespace {

json load_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing checkpoint manifest", (dir / "manifest.json").string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("corrupt checkpoint manifest: " + std::string(e.what()),
                      static_cast<long long>(e.byte));
  }
}

}  // namespace

ModelSpec peek_checkpoint_spec(const fs::path& dir) {
  const json manifest = load_manifest(dir);
  const json& spec = manifest.at("spec");
  ModelSpec out;
  out.in_channels = spec.at("in_channels").get<int>();
  out.channels = spec.at("channels").get<std::vector<int>>();
  out.projection_dim = spec.at("projection_dim").get<int>();
  out.num_classes = spec.at("num_classes").get<int>();
  return out;
}

int load_checkpoint(Model<float>& model, const fs::path& dir) {
  const json manifest = load_manifest(dir);
  if (manifest.at("spec_hash").get<std::uint64_t>() != model.spec().hash())
    throw FormatError("checkpoint spec hash does not match the model architecture");

  std::ifstream in(dir / "params.bin", std::ios::binary | std::ios::ate);
  if (!in) throw IoError("missing checkpoint blob", (dir / "params.bin").string());
  const auto blob_size = static_cast<size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> blob(blob_size);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_size));
  if (!in) throw IoError("read failed", (dir / "params.bin").string());

  auto params = model.params();
  auto buffers = model.buffers();
  size_t pi = 0, bi = 0;
  for (const auto& entry : manifest.at("arrays")) {
    const auto offset = entry.at("offset").get<size_t>();
    const auto count = entry.at("count").get<size_t>();
    const auto name = entry.at("name").get<std::string>();
    if (offset + count * 4 > blob.size())
      throw FormatError("checkpoint blob truncated at array " + name,
                        static_cast<long long>(blob.size()));
    std::vector<float>* target = nullptr;
    if (pi < params.size() && params[pi]->name == name) {
      target = &params[pi]->value;
      ++pi;
    } else if (bi < buffers.size() && buffers[bi]->name == name) {
      target = &buffers[bi]->value;
      ++bi;
    } else {
      throw FormatError("checkpoint array " + name + " does not match the model layout");
    }
    if (target->size() != count)
      throw FormatError("checkpoint array " + name + " has wrong element count");
    std::memcpy(target->data(), blob.data() + offset, count * 4);
  }
  if (pi != params.size() || bi != buffers.size())
    throw FormatError("checkpoint is missing arrays for this architecture");
  return manifest.at("step").get<int>();
}

}  // namespace dbd::nn
