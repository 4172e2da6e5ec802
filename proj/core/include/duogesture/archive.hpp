#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "duogesture/types.hpp"

namespace duogesture {

/// On-disk element type codes. 0 is the clip format's float32; 1 and 2 are used by
/// checkpoints (exact parameters) and token grids.
enum class DType : std::uint8_t { f32 = 0, f64 = 1, i32 = 2 };

std::string_view dtype_name(DType d);

/// Row-major n-dimensional array as stored in a ".dgar" file.
///
/// Layout (little-endian): "DGAR" | dtype u8 | ndim u8 | pad u16 | ndim x u32 dims |
/// payload. A 2-D array therefore has a 16-byte header.
struct NdArray {
  std::vector<std::uint32_t> shape;
  std::variant<std::vector<float>, std::vector<double>, std::vector<std::int32_t>> data;

  static NdArray from_f32(std::vector<std::uint32_t> shape, std::vector<float> values);
  static NdArray from_f64(std::vector<std::uint32_t> shape, std::vector<double> values);
  static NdArray from_i32(std::vector<std::uint32_t> shape, std::vector<std::int32_t> values);

  DType dtype() const { return static_cast<DType>(data.index()); }
  std::size_t element_count() const;
  std::size_t size() const;  // stored element count

  const std::vector<float>& f32() const { return std::get<std::vector<float>>(data); }
  const std::vector<double>& f64() const { return std::get<std::vector<double>>(data); }
  const std::vector<std::int32_t>& i32() const { return std::get<std::vector<std::int32_t>>(data); }

  friend bool operator==(const NdArray&, const NdArray&) = default;
};

std::string encode_array(const NdArray& array);
/// Throws MagicMismatchError or PayloadMismatchError.
NdArray decode_array(const std::string& bytes);

void write_array_file(const std::filesystem::path& path, const NdArray& array);
NdArray read_array_file(const std::filesystem::path& path);

/// Writes manifest.json plus one .dgar file per tensor into `dir` (created if needed).
void write_archive(const Clip& clip, const std::filesystem::path& dir);
/// Inverse of write_archive. Throws ManifestMismatchError when the manifest and the
/// array files disagree, and the array decoding errors above for corrupt files.
Clip read_archive(const std::filesystem::path& dir);

/// Generic named-array directory (checkpoints, generation output). `metadata_json`
/// is an arbitrary JSON object stored under "metadata" in manifest.json.
struct NamedArrays {
  std::string format;
  std::string metadata_json = "{}";
  std::vector<std::pair<std::string, NdArray>> arrays;

  const NdArray& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_named_arrays(const NamedArrays& bundle, const std::filesystem::path& dir);
NamedArrays read_named_arrays(const std::filesystem::path& dir);

/// Dataset directory: dataset.json plus clip_XXXXX archives.
std::vector<std::filesystem::path> list_clip_dirs(const std::filesystem::path& dataset_dir);
std::vector<Clip> read_dataset(const std::filesystem::path& dataset_dir);

}  // namespace duogesture
