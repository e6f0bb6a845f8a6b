#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cdgan/mask.hpp"
#include "cdgan/png_io.hpp"
#include "cdgan/rng.hpp"
#include "cdgan/tensor.hpp"

namespace cdgan {

// One registered before/after pair with its ground-truth change mask.
struct SampleRecord {
  Image image_a;
  Image image_b;
  Mask mask;
  std::string id;
};

// Synthetic change scenes: flat-ish background, random simple polygons, and
// per-object add/remove/shift edits. Nuisance perturbations (brightness,
// noise, hue) touch image_b only and never the mask.
struct SimConfig {
  int height = 128;
  int width = 128;
  int polygons_min = 2;
  int polygons_max = 5;
  int vertices_min = 3;
  int vertices_max = 8;
  float shift_min = 3.0f;
  float shift_max = 10.0f;
  float p_add = 0.3f;
  float p_remove = 0.3f;
  float p_shift = 0.3f;
  float brightness = 0.0f;   // global multiplicative delta range, +-fraction
  float noise_sigma = 0.0f;  // per-pixel gaussian, 8-bit units
  bool hue_jitter = false;   // small independent channel gains
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct SimStats {
  int edits = 0;  // objects added + removed + shifted
  bool brightness_applied = false;
  bool noise_applied = false;
  bool hue_applied = false;
};

SampleRecord simulate_pair(const SimConfig& config, Rng& rng, SimStats* stats = nullptr);

// The simulator's fill rule: even-odd test at integer pixel centers
// (x + 0.5, y + 0.5). A pixel belongs to the polygon iff its center is inside.
Mask rasterize_polygon(const std::vector<float>& xs, const std::vector<float>& ys, int h, int w);

enum class DatasetLayout {
  kTripletDirs,  // <root>/a/<id>.png, <root>/b/<id>.png, <root>/mask/<id>.png
  kAicdStyle,    // <root>/<id>_A.png, <root>/<id>_B.png, <root>/<id>_gt.png
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path a, b, mask;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;  // lexicographic by id
  std::string split;
};

// Scans the directory for complete (a, b, mask) triples. Incomplete triples
// are skipped with a warning on stderr; zero complete triples is a DataError.
DatasetManifest load_dataset(const std::filesystem::path& root, DatasetLayout layout,
                             const std::string& split = "");

// Decodes one manifest entry, checking per-triple shape agreement.
// Mask pixels >= 128 read as changed.
SampleRecord load_record(const ManifestEntry& entry);

std::vector<SampleRecord> load_records(const DatasetManifest& manifest);

// Same window applied to both images and the mask; origin uniform over valid
// positions. An exact-size input comes back unchanged.
SampleRecord random_crop(const SampleRecord& record, int size, Rng& rng);

// v -> v/127.5 - 1 per channel; returns C x H x W.
Tensor normalize(const Image& image);
// round((v+1)*127.5) clamped to [0, 255]; inverse of normalize within one
// quantization level.
Image denormalize(const Tensor& chw);

// Mask as a {-1,+1} tensor of shape 1 x H x W (the value space of the
// generator's tanh output).
Tensor mask_to_pm1(const Mask& mask);

// Random horizontal/vertical flips and quarter turns, the same transform on
// all three rasters. rot90 requires square patches.
SampleRecord augment(const SampleRecord& record, Rng& rng, bool flips, bool rot90);

// The geometric primitives augment composes.
Image flip_image(const Image& img, bool hflip, bool vflip);
Image rot90_image(const Image& img);  // one quarter turn counter-clockwise
Mask flip_mask(const Mask& m, bool hflip, bool vflip);
Mask rot90_mask(const Mask& m);

}  // namespace cdgan
