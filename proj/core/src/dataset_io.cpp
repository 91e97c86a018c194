#include "dbd/dataset_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

namespace dbd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open for reading", path.string());
  const std::streamsize n = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!in) throw IoError("read failed", path.string());
  return bytes;
}

json load_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("missing manifest", path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("corrupt manifest.json: " + std::string(e.what()),
                      static_cast<long long>(e.byte));
  }
  for (const char* key : {"format_version", "num_classes", "channels", "height", "width",
                          "sample_count"}) {
    if (!manifest.contains(key)) throw FormatError(std::string("manifest missing field ") + key);
  }
  if (manifest["format_version"].get<int>() != kFormatVersion)
    throw FormatError("unsupported dataset format version " +
                      manifest["format_version"].dump());
  return manifest;
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory", dir.string());

  const Image& first = dataset.samples.front().image;
  for (size_t i = 0; i < dataset.samples.size(); ++i) {
    if (!dataset.samples[i].image.same_shape(first))
      throw ContractError("dataset images must share one shape (sample " + std::to_string(i) +
                          " differs)");
    if (dataset.samples[i].sample_id != static_cast<std::int64_t>(i))
      throw ContractError("save_dataset requires positional sample_ids 0..N-1");
  }

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["name"] = dataset.name;
  manifest["num_classes"] = dataset.num_classes;
  manifest["channels"] = first.channels;
  manifest["height"] = first.height;
  manifest["width"] = first.width;
  manifest["sample_count"] = dataset.samples.size();
  {
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
  }

  std::vector<std::uint8_t> pixels;
  pixels.reserve(dataset.samples.size() * first.size());
  for (const auto& s : dataset.samples) {
    for (float p : s.image.pixels) {
      const float v = std::clamp(p, 0.0f, 1.0f);
      pixels.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    }
  }
  write_bytes(dir / "images.u8", pixels);

  std::vector<std::uint8_t> labels;
  labels.reserve(dataset.samples.size() * 2);
  for (const auto& s : dataset.samples) {
    const auto v = static_cast<std::uint16_t>(s.label);
    labels.push_back(static_cast<std::uint8_t>(v & 0xff));
    labels.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  write_bytes(dir / "labels.u16", labels);
}

Dataset load_dataset(const fs::path& dir) {
  const json manifest = load_manifest(dir);
  const auto n = manifest["sample_count"].get<size_t>();
  const int channels = manifest["channels"].get<int>();
  const int height = manifest["height"].get<int>();
  const int width = manifest["width"].get<int>();
  if (n == 0 || channels <= 0 || height <= 0 || width <= 0)
    throw FormatError("manifest declares an empty or degenerate dataset");

  const size_t image_bytes = static_cast<size_t>(channels) * height * width;
  const auto pixels = read_bytes(dir / "images.u8");
  if (pixels.size() != n * image_bytes)
    throw FormatError("images.u8 truncated: expected " + std::to_string(n * image_bytes) +
                          " bytes, found " + std::to_string(pixels.size()),
                      static_cast<long long>(pixels.size()));
  const auto labels = read_bytes(dir / "labels.u16");
  if (labels.size() != n * 2)
    throw FormatError("labels.u16 truncated: expected " + std::to_string(n * 2) +
                          " bytes, found " + std::to_string(labels.size()),
                      static_cast<long long>(labels.size()));

  Dataset out;
  out.num_classes = manifest["num_classes"].get<int>();
  out.name = manifest.value("name", std::string{});
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    Image img(channels, height, width);
    const std::uint8_t* src = pixels.data() + i * image_bytes;
    for (size_t j = 0; j < image_bytes; ++j)
      img.pixels[j] = static_cast<float>(src[j]) / 255.0f;
    const int label = labels[2 * i] | (labels[2 * i + 1] << 8);
    out.samples[i] = {std::move(img), label, static_cast<std::int64_t>(i)};
  }
  out.validate();
  return out;
}

void save_poisoned_dataset(const PoisonedDataset& poisoned, const fs::path& dir) {
  if (poisoned.records.size() != poisoned.dataset.samples.size())
    throw ContractError("poison records must align with samples");
  save_dataset(poisoned.dataset, dir);

  json root;
  root["target_label"] = poisoned.target_label;
  root["poisoning_rate"] = poisoned.poisoning_rate;
  json records = json::array();
  for (const auto& r : poisoned.records) {
    records.push_back({{"sample_id", r.sample_id},
                       {"is_poisoned", r.is_poisoned},
                       {"original_label", r.original_label},
                       {"generator_id", r.generator_id}});
  }
  root["records"] = std::move(records);
  std::ofstream out(dir / "poison.json", std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", (dir / "poison.json").string());
  out << root.dump(2) << "\n";
}

PoisonedDataset load_poisoned_dataset(const fs::path& dir) {
  PoisonedDataset out;
  out.dataset = load_dataset(dir);

  const fs::path path = dir / "poison.json";
  std::ifstream in(path);
  if (!in) throw IoError("missing poison records", path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("corrupt poison.json: " + std::string(e.what()),
                      static_cast<long long>(e.byte));
  }
  out.target_label = root.at("target_label").get<int>();
  out.poisoning_rate = root.at("poisoning_rate").get<double>();
  for (const auto& r : root.at("records")) {
    out.records.push_back({r.at("sample_id").get<std::int64_t>(),
                           r.at("is_poisoned").get<bool>(),
                           r.at("original_label").get<int>(),
                           r.at("generator_id").get<std::string>()});
  }
  if (out.records.size() != out.dataset.samples.size())
    throw FormatError("poison.json record count does not match sample count");
  return out;
}

void save_image_blob(const Image& image, const fs::path& dir) {
  Dataset wrapper;
  wrapper.num_classes = 2;  // dummy label space for the 1-sample container
  wrapper.name = "image-blob";
  wrapper.samples.push_back({image, 0, 0});
  save_dataset(wrapper, dir);
}

Image load_image_blob(const fs::path& dir) {
  Dataset wrapper = load_dataset(dir);
  return wrapper.samples.front().image;
}

}  // namespace dbd
