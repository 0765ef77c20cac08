#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "laid/image.hpp"
#include "laid/rng.hpp"

namespace laid {

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };
std::string_view to_string(Split s);

// Label 0 = natural, 1 = synthetic.
struct ManifestEntry {
  std::string path;
  std::uint8_t label = 0;
  std::string generator;
  Split split = Split::Train;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

// Walks <root>/<generator>/[train|val|test/]<nature|ai>/... for .ppm/.pgm files.
// "val" and "test" directories both map to the Test split (the held-out pool
// that split_val_test divides).
DatasetManifest scan_image_tree(const std::string& root);

// Tab-separated with header "path\tlabel\tgenerator\tsplit".
std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(std::string_view text);

// total / (2 * generators) entries per (label, generator) stratum, drawn
// uniformly without replacement. Output order: strata sorted by (generator,
// label), draw order within a stratum.
DatasetManifest stratified_subsample(const DatasetManifest& manifest, std::size_t total, Rng& rng);

// Per-stratum 50/50 partition; an odd stratum gives its extra item to validation.
std::pair<DatasetManifest, DatasetManifest> split_val_test(const DatasetManifest& manifest,
                                                           Rng& rng);

enum class DomainTag : std::uint8_t { Spatial = 0, Spectral = 1 };
std::string_view to_string(DomainTag d);

// Same-shaped preprocessed tensors with one label byte each.
struct TensorCache {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  RangeTag range = RangeTag::Byte0255;
  DomainTag domain = DomainTag::Spatial;
  std::vector<ImageTensor> tensors;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return tensors.size(); }
  void push_back(ImageTensor t, std::uint8_t label);
  bool operator==(const TensorCache&) const = default;
};

// "LAIDTNSR", u32 version, u64 count, u32 h, u32 w, u32 c, u8 range, u8 domain,
// f32 LE payload (HWC per tensor), one label byte per tensor, u64 FNV-1a of
// every preceding byte.
std::vector<std::uint8_t> serialize_cache(const TensorCache& cache);
TensorCache deserialize_cache(std::span<const std::uint8_t> bytes);
void write_cache(const TensorCache& cache, const std::string& path);
TensorCache read_cache(const std::string& path);

TensorCache build_spectral_cache(const TensorCache& spatial);

// Binary or ASCII PGM/PPM, scaled to [0, 255] by the file's maxval.
ImageTensor read_pnm(const std::string& path);
void write_ppm(const ImageTensor& img, const std::string& path);

// Reads, converts to 3 channels, and resizes every entry to size x size.
TensorCache preprocess_images(const DatasetManifest& manifest, std::size_t size);

struct SynthOptions {
  std::size_t train_per_class = 2000;
  std::size_t val_per_class = 500;
  std::size_t test_per_class = 500;
  std::size_t size = 64;
};

struct SynthDataset {
  TensorCache train;
  TensorCache val;
  TensorCache test;
};

// Natural class: low-pass 1/f random fields. Synthetic class: the same kind of
// field decimated and nearest-neighbour upsampled 2x (periodic grid artifact).
SynthDataset synth_dataset(const SynthOptions& opts, const Rng& rng);

// Single sample of either class; exposed for statistics tests.
ImageTensor synth_image(std::uint8_t label, std::size_t size, Rng& rng);

}  // namespace laid
