#include "duogesture/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "duogesture/errors.hpp"

namespace duogesture {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'D', 'G', 'A', 'R'};
constexpr const char* kClipFormat = "duogesture-clip";
constexpr int kClipVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::size_t dtype_width(DType d) { return d == DType::f64 ? 8 : 4; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

json shape_json(const std::vector<std::uint32_t>& shape) { return json(shape); }

void expect_shape(const std::string& name, const NdArray& arr,
                  const std::vector<std::uint32_t>& shape) {
  if (arr.shape != shape) {
    std::string want, got;
    for (auto d : shape) want += std::to_string(d) + " ";
    for (auto d : arr.shape) got += std::to_string(d) + " ";
    throw ManifestMismatchError("array '" + name + "' has shape [" + got + "], manifest says [" +
                                want + "]");
  }
}

template <typename T>
T manifest_get(const json& j, const char* key) {
  if (!j.contains(key)) throw ManifestMismatchError(std::string("manifest missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ManifestMismatchError(std::string("manifest field '") + key + "': " + e.what());
  }
}

json read_manifest(const fs::path& dir) {
  const auto text = read_file(dir / "manifest.json");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ManifestMismatchError("manifest.json in " + dir.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace

std::string_view dtype_name(DType d) {
  switch (d) {
    case DType::f32:
      return "f32";
    case DType::f64:
      return "f64";
    case DType::i32:
      return "i32";
  }
  return "?";
}

NdArray NdArray::from_f32(std::vector<std::uint32_t> shape, std::vector<float> values) {
  NdArray a{std::move(shape), std::move(values)};
  if (a.size() != a.element_count()) throw ShapeError("NdArray: value count does not match shape");
  return a;
}

NdArray NdArray::from_f64(std::vector<std::uint32_t> shape, std::vector<double> values) {
  NdArray a{std::move(shape), std::move(values)};
  if (a.size() != a.element_count()) throw ShapeError("NdArray: value count does not match shape");
  return a;
}

NdArray NdArray::from_i32(std::vector<std::uint32_t> shape, std::vector<std::int32_t> values) {
  NdArray a{std::move(shape), std::move(values)};
  if (a.size() != a.element_count()) throw ShapeError("NdArray: value count does not match shape");
  return a;
}

std::size_t NdArray::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::size_t NdArray::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

std::string encode_array(const NdArray& array) {
  if (array.shape.size() > 255) throw ShapeError("NdArray: more than 255 dimensions");
  if (array.size() != array.element_count()) throw ShapeError("NdArray: value count does not match shape");
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(array.dtype()));
  out.push_back(static_cast<char>(array.shape.size()));
  out.push_back(0);
  out.push_back(0);
  for (auto d : array.shape) put_u32(out, d);
  out.reserve(out.size() + array.size() * dtype_width(array.dtype()));
  std::visit(
      [&](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        for (T v : values) {
          if constexpr (std::is_same_v<T, double>) {
            put_u64(out, std::bit_cast<std::uint64_t>(v));
          } else if constexpr (std::is_same_v<T, float>) {
            put_u32(out, std::bit_cast<std::uint32_t>(v));
          } else {
            put_u32(out, static_cast<std::uint32_t>(v));
          }
        }
      },
      array.data);
  return out;
}

NdArray decode_array(const std::string& bytes) {
  if (bytes.size() < 8) throw PayloadMismatchError("array header truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw MagicMismatchError("array magic is '" + bytes.substr(0, 4) + "', expected 'DGAR'");
  }
  const auto code = static_cast<std::uint8_t>(bytes[4]);
  if (code > 2) throw DataError("unknown array dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = static_cast<unsigned char>(bytes[5]);
  const std::size_t header = 8 + 4 * ndim;
  if (bytes.size() < header) throw PayloadMismatchError("array header truncated");
  std::vector<std::uint32_t> shape(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32(bytes, 8 + 4 * i);
    count *= shape[i];
  }
  const std::size_t width = dtype_width(dtype);
  const std::size_t payload = bytes.size() - header;
  if (payload != count * width) {
    throw PayloadMismatchError("array payload has " + std::to_string(payload) + " bytes, shape needs " +
                               std::to_string(count * width));
  }
  switch (dtype) {
    case DType::f32: {
      std::vector<float> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
      return NdArray{std::move(shape), std::move(v)};
    }
    case DType::f64: {
      std::vector<double> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<double>(get_u64(bytes, header + 8 * i));
      return NdArray{std::move(shape), std::move(v)};
    }
    case DType::i32: {
      std::vector<std::int32_t> v(count);
      for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<std::int32_t>(get_u32(bytes, header + 4 * i));
      return NdArray{std::move(shape), std::move(v)};
    }
  }
  throw DataError("unreachable dtype");
}

void write_array_file(const fs::path& path, const NdArray& array) {
  write_file(path, encode_array(array));
}

NdArray read_array_file(const fs::path& path) {
  try {
    return decode_array(read_file(path));
  } catch (const MagicMismatchError& e) {
    throw MagicMismatchError(path.string() + ": " + e.what());
  } catch (const PayloadMismatchError& e) {
    throw PayloadMismatchError(path.string() + ": " + e.what());
  }
}

void write_archive(const Clip& clip, const fs::path& dir) {
  const auto& m = clip.motion;
  const auto& f = clip.features;
  fs::create_directories(dir);

  const auto L = static_cast<std::uint32_t>(m.length);
  const auto J = static_cast<std::uint32_t>(m.joints);
  std::vector<std::pair<std::string, NdArray>> arrays;
  arrays.emplace_back("frames", NdArray::from_f32({L, J, kRot6d}, m.frames));
  arrays.emplace_back("e_a", NdArray::from_f32({static_cast<std::uint32_t>(f.length),
                                                static_cast<std::uint32_t>(f.audio_dim)},
                                               f.e_a));
  arrays.emplace_back("e_s", NdArray::from_f32({static_cast<std::uint32_t>(f.length),
                                                static_cast<std::uint32_t>(f.word_dim)},
                                               f.e_s));
  arrays.emplace_back("e_m", NdArray::from_f32({static_cast<std::uint32_t>(f.style_dim)}, f.e_m));
  arrays.emplace_back("e_eps", NdArray::from_f32({static_cast<std::uint32_t>(f.style_dim)}, f.e_eps));
  arrays.emplace_back("seed_pose",
                      NdArray::from_f32({kSeedFrames, static_cast<std::uint32_t>(f.joints), kRot6d},
                                        f.seed_pose));

  json manifest;
  manifest["format"] = kClipFormat;
  manifest["version"] = kClipVersion;
  manifest["fps"] = m.fps;
  manifest["length"] = m.length;
  manifest["joints"] = m.joints;
  manifest["speaker_id"] = m.speaker_id;
  manifest["emotion_id"] = m.emotion_id;
  manifest["feature_speaker_id"] = f.speaker_id;
  json spans = json::array();
  for (const auto& s : m.word_spans) spans.push_back({s.start, s.end, s.word_id});
  manifest["word_spans"] = spans;
  manifest["semantic_flags"] = m.semantic_flags;
  json regions;
  for (Region r : kAllRegions) regions[std::string(region_name(r))] = m.regions[static_cast<int>(r)];
  manifest["regions"] = regions;
  manifest["audio_onsets_s"] = clip.audio_onsets;
  manifest["feature_dims"] = {{"audio", f.audio_dim}, {"word", f.word_dim}, {"style", f.style_dim}};
  json inventory;
  for (const auto& [name, arr] : arrays) {
    const std::string file = name + ".dgar";
    inventory[name] = {{"file", file}, {"shape", shape_json(arr.shape)},
                       {"dtype", std::string(dtype_name(arr.dtype()))}};
    write_array_file(dir / file, arr);
  }
  manifest["arrays"] = inventory;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Clip read_archive(const fs::path& dir) {
  const json manifest = read_manifest(dir);
  if (manifest_get<std::string>(manifest, "format") != kClipFormat) {
    throw ManifestMismatchError(dir.string() + " is not a clip archive");
  }
  Clip clip;
  auto& m = clip.motion;
  auto& f = clip.features;
  m.fps = manifest_get<double>(manifest, "fps");
  m.length = manifest_get<int>(manifest, "length");
  m.joints = manifest_get<int>(manifest, "joints");
  m.speaker_id = manifest_get<int>(manifest, "speaker_id");
  m.emotion_id = manifest_get<int>(manifest, "emotion_id");
  for (const auto& s : manifest_get<json>(manifest, "word_spans")) {
    if (!s.is_array() || s.size() != 3) throw ManifestMismatchError("word span must be [start,end,word]");
    m.word_spans.push_back({s[0].get<int>(), s[1].get<int>(), s[2].get<int>()});
  }
  m.semantic_flags = manifest_get<std::vector<int>>(manifest, "semantic_flags");
  const json regions = manifest_get<json>(manifest, "regions");
  for (Region r : kAllRegions) {
    const std::string name(region_name(r));
    if (!regions.contains(name)) throw ManifestMismatchError("manifest missing region '" + name + "'");
    m.regions[static_cast<int>(r)] = regions.at(name).get<std::vector<int>>();
  }
  clip.audio_onsets = manifest.value("audio_onsets_s", std::vector<double>{});
  const json dims = manifest_get<json>(manifest, "feature_dims");
  f.length = m.length;
  f.joints = m.joints;
  f.audio_dim = manifest_get<int>(dims, "audio");
  f.word_dim = manifest_get<int>(dims, "word");
  f.style_dim = manifest_get<int>(dims, "style");
  f.speaker_id = manifest.value("feature_speaker_id", m.speaker_id);

  const json inventory = manifest_get<json>(manifest, "arrays");
  auto load = [&](const std::string& name, const std::vector<std::uint32_t>& expected) {
    if (!inventory.contains(name)) throw ManifestMismatchError("manifest lists no array '" + name + "'");
    const json& entry = inventory.at(name);
    const auto declared = manifest_get<std::vector<std::uint32_t>>(entry, "shape");
    if (declared != expected) {
      throw ManifestMismatchError("manifest shape of '" + name + "' disagrees with clip dimensions");
    }
    const fs::path path = dir / manifest_get<std::string>(entry, "file");
    if (!fs::exists(path)) throw ManifestMismatchError("array file missing: " + path.string());
    NdArray arr = read_array_file(path);
    if (arr.dtype() != DType::f32) throw ManifestMismatchError("array '" + name + "' must be f32");
    expect_shape(name, arr, expected);
    return arr.f32();
  };
  const auto L = static_cast<std::uint32_t>(m.length);
  const auto J = static_cast<std::uint32_t>(m.joints);
  m.frames = load("frames", {L, J, kRot6d});
  f.e_a = load("e_a", {L, static_cast<std::uint32_t>(f.audio_dim)});
  f.e_s = load("e_s", {L, static_cast<std::uint32_t>(f.word_dim)});
  f.e_m = load("e_m", {static_cast<std::uint32_t>(f.style_dim)});
  f.e_eps = load("e_eps", {static_cast<std::uint32_t>(f.style_dim)});
  f.seed_pose = load("seed_pose", {kSeedFrames, J, kRot6d});
  return clip;
}

const NdArray& NamedArrays::at(const std::string& name) const {
  for (const auto& [n, a] : arrays) {
    if (n == name) return a;
  }
  throw ManifestMismatchError("no array named '" + name + "' in " + format + " bundle");
}

bool NamedArrays::contains(const std::string& name) const {
  return std::any_of(arrays.begin(), arrays.end(), [&](const auto& p) { return p.first == name; });
}

void write_named_arrays(const NamedArrays& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = bundle.format;
  manifest["version"] = 1;
  try {
    manifest["metadata"] = json::parse(bundle.metadata_json);
  } catch (const json::exception& e) {
    throw DataError(std::string("metadata is not valid JSON: ") + e.what());
  }
  json inventory = json::array();
  std::size_t index = 0;
  for (const auto& [name, arr] : bundle.arrays) {
    char file[32];
    std::snprintf(file, sizeof(file), "a%05zu.dgar", index++);
    inventory.push_back({{"name", name}, {"file", file}, {"shape", shape_json(arr.shape)},
                         {"dtype", std::string(dtype_name(arr.dtype()))}});
    write_array_file(dir / file, arr);
  }
  manifest["arrays"] = inventory;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

NamedArrays read_named_arrays(const fs::path& dir) {
  const json manifest = read_manifest(dir);
  NamedArrays bundle;
  bundle.format = manifest_get<std::string>(manifest, "format");
  bundle.metadata_json = manifest.value("metadata", json::object()).dump();
  for (const auto& entry : manifest_get<json>(manifest, "arrays")) {
    const auto name = manifest_get<std::string>(entry, "name");
    const auto shape = manifest_get<std::vector<std::uint32_t>>(entry, "shape");
    NdArray arr = read_array_file(dir / manifest_get<std::string>(entry, "file"));
    expect_shape(name, arr, shape);
    if (dtype_name(arr.dtype()) != manifest_get<std::string>(entry, "dtype")) {
      throw ManifestMismatchError("array '" + name + "' dtype disagrees with manifest");
    }
    bundle.arrays.emplace_back(name, std::move(arr));
  }
  return bundle;
}

std::vector<fs::path> list_clip_dirs(const fs::path& dataset_dir) {
  if (!fs::is_directory(dataset_dir)) throw DataError(dataset_dir.string() + " is not a directory");
  std::vector<fs::path> out;
  if (fs::exists(dataset_dir / "manifest.json")) {
    out.push_back(dataset_dir);
    return out;
  }
  for (const auto& entry : fs::directory_iterator(dataset_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no clip archives under " + dataset_dir.string());
  return out;
}

std::vector<Clip> read_dataset(const fs::path& dataset_dir) {
  std::vector<Clip> clips;
  for (const auto& p : list_clip_dirs(dataset_dir)) clips.push_back(read_archive(p));
  return clips;
}

}  // namespace duogesture
