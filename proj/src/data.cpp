#include "cdgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "cdgan/errors.hpp"

namespace cdgan {

namespace fs = std::filesystem;

void SimConfig::validate() const {
  if (height < 64 || width < 64) throw ConfigError("simulator canvas must be at least 64x64");
  if (polygons_min < 0 || polygons_max < polygons_min)
    throw ConfigError("invalid polygon count range");
  if (vertices_min < 3 || vertices_max < vertices_min)
    throw ConfigError("polygon vertex range must start at 3");
  if (shift_min < 0.0f || shift_max < shift_min) throw ConfigError("invalid shift range");
  if (p_add < 0.0f || p_remove < 0.0f || p_shift < 0.0f || p_add + p_remove + p_shift > 1.0f)
    throw ConfigError("edit probabilities must be non-negative and sum to at most 1");
  if (brightness < 0.0f || noise_sigma < 0.0f) throw ConfigError("nuisance settings must be >= 0");
}

namespace {

struct Poly {
  std::vector<float> xs, ys;  // closed implicitly
};

float poly_area(const Poly& p) {
  double a = 0.0;
  const size_t n = p.xs.size();
  for (size_t i = 0; i < n; ++i) {
    const size_t j = (i + 1) % n;
    a += static_cast<double>(p.xs[i]) * p.ys[j] - static_cast<double>(p.xs[j]) * p.ys[i];
  }
  return static_cast<float>(std::abs(a) * 0.5);
}

// Star-shaped polygon around (cx, cy): evenly spaced angles with jitter and
// random radii. Star-shaped implies simple (non-self-intersecting).
Poly random_polygon(float cx, float cy, float radius, int vertices, Rng& rng) {
  std::uniform_real_distribution<float> jitter(-0.35f, 0.35f);
  std::uniform_real_distribution<float> rad(0.55f, 1.0f);
  for (;;) {
    Poly p;
    for (int i = 0; i < vertices; ++i) {
      const float ang = 2.0f * static_cast<float>(M_PI) * (static_cast<float>(i) + jitter(rng)) /
                        static_cast<float>(vertices);
      const float r = radius * rad(rng);
      p.xs.push_back(cx + r * std::cos(ang));
      p.ys.push_back(cy + r * std::sin(ang));
    }
    // degenerate (collinear) polygons are resampled, never emitted
    if (poly_area(p) >= 2.0f) return p;
  }
}

// Even-odd rule at the pixel center (x+0.5, y+0.5).
bool point_in_poly(const Poly& p, float px, float py) {
  bool inside = false;
  const size_t n = p.xs.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const float yi = p.ys[i], yj = p.ys[j];
    if ((yi > py) != (yj > py)) {
      const float xint = p.xs[j] + (py - p.ys[j]) * (p.xs[i] - p.xs[j]) / (yi - yj);
      if (px < xint) inside = !inside;
    }
  }
  return inside;
}

Mask rasterize(const Poly& p, int h, int w) {
  Mask m = Mask::zeros(h, w);
  float x0 = p.xs[0], x1 = p.xs[0], y0 = p.ys[0], y1 = p.ys[0];
  for (size_t i = 1; i < p.xs.size(); ++i) {
    x0 = std::min(x0, p.xs[i]);
    x1 = std::max(x1, p.xs[i]);
    y0 = std::min(y0, p.ys[i]);
    y1 = std::max(y1, p.ys[i]);
  }
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int iy1 = std::min(h - 1, static_cast<int>(std::ceil(y1)));
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int ix1 = std::min(w - 1, static_cast<int>(std::ceil(x1)));
  for (int y = iy0; y <= iy1; ++y)
    for (int x = ix0; x <= ix1; ++x)
      if (point_in_poly(p, static_cast<float>(x) + 0.5f, static_cast<float>(y) + 0.5f))
        m.set(y, x, true);
  return m;
}

Poly translate(const Poly& p, float dx, float dy) {
  Poly q = p;
  for (float& x : q.xs) x += dx;
  for (float& y : q.ys) y += dy;
  return q;
}

void fill_footprint(Image& img, const Mask& fp, const std::uint8_t rgb[3]) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      if (fp.at(y, x))
        for (int c = 0; c < 3; ++c) img.set(y, x, c, rgb[c]);
}

std::uint8_t clamp_u8(float v) {
  return static_cast<std::uint8_t>(std::min(255.0f, std::max(0.0f, std::round(v))));
}

struct BBox {
  float x0, y0, x1, y1;
  bool overlaps(const BBox& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
};

enum class Edit { kUnchanged, kAdd, kRemove, kShift };

}  // namespace

SampleRecord simulate_pair(const SimConfig& cfg, Rng& rng, SimStats* stats) {
  cfg.validate();
  const int H = cfg.height, W = cfg.width;

  // Background: flat color + low-frequency gradient + baked noise, identical
  // in both frames.
  std::uniform_real_distribution<float> u01(0.0f, 1.0f);
  std::uniform_real_distribution<float> base_dist(50.0f, 190.0f);
  std::uniform_real_distribution<float> grad_dist(-25.0f, 25.0f);
  std::uniform_real_distribution<float> bgnoise(-4.0f, 4.0f);
  float base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = base_dist(rng);
    gx[c] = grad_dist(rng);
    gy[c] = grad_dist(rng);
  }
  Image bg = Image::filled(H, W, 3, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const float fx = static_cast<float>(x) / static_cast<float>(W);
      const float fy = static_cast<float>(y) / static_cast<float>(H);
      for (int c = 0; c < 3; ++c)
        bg.set(y, x, c, clamp_u8(base[c] + gx[c] * fx + gy[c] * fy + bgnoise(rng)));
    }

  SampleRecord rec;
  rec.image_a = bg;
  rec.image_b = bg;
  rec.mask = Mask::zeros(H, W);

  const float rmin = static_cast<float>(std::min(H, W)) / 10.0f;
  const float rmax = static_cast<float>(std::min(H, W)) / 5.0f;
  const float margin = cfg.shift_max + 2.0f;

  std::uniform_int_distribution<int> count_dist(cfg.polygons_min, cfg.polygons_max);
  std::uniform_int_distribution<int> vert_dist(cfg.vertices_min, cfg.vertices_max);
  std::uniform_real_distribution<float> radius_dist(rmin, rmax);
  const int count = count_dist(rng);

  int edits = 0;
  std::vector<BBox> occupied;
  for (int obj = 0; obj < count; ++obj) {
    const float radius = radius_dist(rng);
    const float pad = radius + margin;
    if (2.0f * pad + 2.0f >= static_cast<float>(std::min(H, W))) continue;
    std::uniform_real_distribution<float> cx_dist(pad, static_cast<float>(W) - pad);
    std::uniform_real_distribution<float> cy_dist(pad, static_cast<float>(H) - pad);

    // disjoint placement by dilated bounding circle, rejection sampled
    float cx = 0.0f, cy = 0.0f;
    bool placed = false;
    for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
      cx = cx_dist(rng);
      cy = cy_dist(rng);
      const BBox box{cx - pad, cy - pad, cx + pad, cy + pad};
      placed = std::none_of(occupied.begin(), occupied.end(),
                            [&](const BBox& o) { return box.overlaps(o); });
      if (placed) occupied.push_back(box);
    }
    if (!placed) continue;

    const Poly poly = random_polygon(cx, cy, radius, vert_dist(rng), rng);

    // object color with a minimum contrast against the background base
    std::uniform_real_distribution<float> color_dist(20.0f, 235.0f);
    std::uint8_t rgb[3];
    for (int tries = 0; tries < 20; ++tries) {
      float lum_diff = 0.0f;
      for (int c = 0; c < 3; ++c) {
        const float v = color_dist(rng);
        rgb[c] = clamp_u8(v);
        lum_diff += std::abs(v - base[c]);
      }
      if (lum_diff / 3.0f >= 40.0f) break;
    }

    const float edit_draw = u01(rng);
    Edit edit = Edit::kUnchanged;
    if (edit_draw < cfg.p_add)
      edit = Edit::kAdd;
    else if (edit_draw < cfg.p_add + cfg.p_remove)
      edit = Edit::kRemove;
    else if (edit_draw < cfg.p_add + cfg.p_remove + cfg.p_shift)
      edit = Edit::kShift;

    switch (edit) {
      case Edit::kUnchanged: {
        const Mask fp = rasterize(poly, H, W);
        fill_footprint(rec.image_a, fp, rgb);
        fill_footprint(rec.image_b, fp, rgb);
        break;
      }
      case Edit::kAdd: {
        const Mask fp = rasterize(poly, H, W);
        fill_footprint(rec.image_b, fp, rgb);
        for (size_t i = 0; i < fp.v.size(); ++i) rec.mask.v[i] |= fp.v[i];
        ++edits;
        break;
      }
      case Edit::kRemove: {
        const Mask fp = rasterize(poly, H, W);
        fill_footprint(rec.image_a, fp, rgb);
        for (size_t i = 0; i < fp.v.size(); ++i) rec.mask.v[i] |= fp.v[i];
        ++edits;
        break;
      }
      case Edit::kShift: {
        std::uniform_real_distribution<float> mag_dist(cfg.shift_min, cfg.shift_max);
        std::uniform_real_distribution<float> ang_dist(0.0f, 2.0f * static_cast<float>(M_PI));
        const float mag = mag_dist(rng);
        const float ang = ang_dist(rng);
        int dx = static_cast<int>(std::round(mag * std::cos(ang)));
        int dy = static_cast<int>(std::round(mag * std::sin(ang)));
        if (dx == 0 && dy == 0) dx = 1;
        const Mask fp_a = rasterize(poly, H, W);
        const Mask fp_b = rasterize(translate(poly, static_cast<float>(dx), static_cast<float>(dy)), H, W);
        fill_footprint(rec.image_a, fp_a, rgb);
        fill_footprint(rec.image_b, fp_b, rgb);
        for (size_t i = 0; i < fp_a.v.size(); ++i) rec.mask.v[i] |= fp_a.v[i] ^ fp_b.v[i];
        ++edits;
        break;
      }
    }
  }

  // Nuisance perturbations on image_b only; the mask stays untouched.
  SimStats st;
  st.edits = edits;
  if (cfg.brightness > 0.0f) {
    std::uniform_real_distribution<float> bdist(-cfg.brightness, cfg.brightness);
    const float factor = 1.0f + bdist(rng);
    for (std::uint8_t& v : rec.image_b.px) v = clamp_u8(static_cast<float>(v) * factor);
    st.brightness_applied = true;
  }
  if (cfg.hue_jitter) {
    std::uniform_real_distribution<float> gain_dist(0.92f, 1.08f);
    float gains[3] = {gain_dist(rng), gain_dist(rng), gain_dist(rng)};
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (int c = 0; c < 3; ++c)
          rec.image_b.set(y, x, c, clamp_u8(static_cast<float>(rec.image_b.at(y, x, c)) * gains[c]));
    st.hue_applied = true;
  }
  if (cfg.noise_sigma > 0.0f) {
    std::normal_distribution<float> noise(0.0f, cfg.noise_sigma);
    for (std::uint8_t& v : rec.image_b.px) v = clamp_u8(static_cast<float>(v) + noise(rng));
    st.noise_applied = true;
  }
  if (stats != nullptr) *stats = st;
  return rec;
}

Mask rasterize_polygon(const std::vector<float>& xs, const std::vector<float>& ys, int h, int w) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw ShapeError("rasterize_polygon needs at least 3 vertices");
  Poly p{xs, ys};
  return rasterize(p, h, w);
}

namespace {

bool probe_shape(const fs::path& p, int* h, int* w) {
  try {
    Image img = read_png(p);
    *h = img.h;
    *w = img.w;
    return true;
  } catch (const DataError&) {
    return false;
  }
}

}  // namespace

DatasetManifest load_dataset(const fs::path& root, DatasetLayout layout, const std::string& split) {
  if (!fs::is_directory(root)) throw DataError("dataset directory does not exist: " + root.string());

  DatasetManifest manifest;
  manifest.root = root;
  manifest.split = split;

  std::vector<std::string> ids;
  const fs::path adir = (layout == DatasetLayout::kTripletDirs) ? root / "a" : root;
  if (fs::is_directory(adir)) {
    for (const auto& e : fs::directory_iterator(adir)) {
      if (!e.is_regular_file() || e.path().extension() != ".png") continue;
      const std::string stem = e.path().stem().string();
      if (layout == DatasetLayout::kTripletDirs) {
        ids.push_back(stem);
      } else if (stem.size() > 2 && stem.ends_with("_A")) {
        ids.push_back(stem.substr(0, stem.size() - 2));
      }
    }
  }
  std::sort(ids.begin(), ids.end());

  for (const std::string& id : ids) {
    ManifestEntry entry;
    entry.id = id;
    if (layout == DatasetLayout::kTripletDirs) {
      entry.a = root / "a" / (id + ".png");
      entry.b = root / "b" / (id + ".png");
      entry.mask = root / "mask" / (id + ".png");
    } else {
      entry.a = root / (id + "_A.png");
      entry.b = root / (id + "_B.png");
      entry.mask = root / (id + "_gt.png");
    }
    if (!fs::is_regular_file(entry.b) || !fs::is_regular_file(entry.mask)) {
      std::cerr << "warning: skipping incomplete triple '" << id << "' under " << root.string()
                << "\n";
      continue;
    }
    int ha = 0, wa = 0, hb = 0, wb = 0, hm = 0, wm = 0;
    if (!probe_shape(entry.a, &ha, &wa) || !probe_shape(entry.b, &hb, &wb) ||
        !probe_shape(entry.mask, &hm, &wm)) {
      std::cerr << "warning: skipping undecodable triple '" << id << "'\n";
      continue;
    }
    if (ha != hb || wa != wb || ha != hm || wa != wm) {
      std::cerr << "warning: skipping triple '" << id << "' with mismatched sizes\n";
      continue;
    }
    manifest.entries.push_back(std::move(entry));
  }

  if (manifest.entries.empty())
    throw DataError("no complete (a, b, mask) triples under " + root.string());
  return manifest;
}

SampleRecord load_record(const ManifestEntry& entry) {
  SampleRecord rec;
  rec.id = entry.id;
  rec.image_a = read_png(entry.a);
  rec.image_b = read_png(entry.b);
  Image m = read_png(entry.mask);
  if (rec.image_a.h != rec.image_b.h || rec.image_a.w != rec.image_b.w ||
      rec.image_a.h != m.h || rec.image_a.w != m.w)
    throw DataError("triple '" + entry.id + "' has mismatched raster sizes");
  rec.mask = Mask::zeros(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) rec.mask.set(y, x, m.at(y, x, 0) >= 128);
  return rec;
}

std::vector<SampleRecord> load_records(const DatasetManifest& manifest) {
  std::vector<SampleRecord> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) out.push_back(load_record(e));
  return out;
}

namespace {

Image crop_image(const Image& img, int y0, int x0, int size) {
  Image out = Image::filled(size, size, img.channels, 0);
  for (int y = 0; y < size; ++y)
    std::copy_n(img.px.begin() + (static_cast<size_t>(y0 + y) * img.w + x0) * img.channels,
                static_cast<size_t>(size) * img.channels,
                out.px.begin() + static_cast<size_t>(y) * size * img.channels);
  return out;
}

Mask crop_mask(const Mask& m, int y0, int x0, int size) {
  Mask out = Mask::zeros(size, size);
  for (int y = 0; y < size; ++y)
    std::copy_n(m.v.begin() + static_cast<size_t>(y0 + y) * m.w + x0, static_cast<size_t>(size),
                out.v.begin() + static_cast<size_t>(y) * size);
  return out;
}

}  // namespace

SampleRecord random_crop(const SampleRecord& record, int size, Rng& rng) {
  const int H = record.image_a.h, W = record.image_a.w;
  if (size < 1 || H < size || W < size)
    throw ShapeError("random_crop: input " + std::to_string(H) + "x" + std::to_string(W) +
                     " is smaller than crop size " + std::to_string(size));
  if (H == size && W == size) return record;
  std::uniform_int_distribution<int> ydist(0, H - size), xdist(0, W - size);
  const int y0 = ydist(rng), x0 = xdist(rng);
  SampleRecord out;
  out.id = record.id;
  out.image_a = crop_image(record.image_a, y0, x0, size);
  out.image_b = crop_image(record.image_b, y0, x0, size);
  out.mask = crop_mask(record.mask, y0, x0, size);
  return out;
}

Tensor normalize(const Image& image) {
  Tensor t = Tensor::zeros({image.channels, image.h, image.w});
  const long hw = static_cast<long>(image.h) * image.w;
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x)
      for (int c = 0; c < image.channels; ++c)
        t.at(static_cast<long>(c) * hw + static_cast<long>(y) * image.w + x) =
            static_cast<float>(image.at(y, x, c)) / 127.5f - 1.0f;
  return t;
}

Image denormalize(const Tensor& chw) {
  if (chw.rank() != 3) throw ShapeError("denormalize expects C x H x W, got " + shape_str(chw.shape()));
  const int C = chw.dim(0), H = chw.dim(1), W = chw.dim(2);
  Image img = Image::filled(H, W, C, 0);
  const long hw = static_cast<long>(H) * W;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c)
        img.set(y, x, c,
                clamp_u8((chw.at(static_cast<long>(c) * hw + static_cast<long>(y) * W + x) + 1.0f) *
                         127.5f));
  return img;
}

Tensor mask_to_pm1(const Mask& mask) {
  Tensor t = Tensor::zeros({1, mask.h, mask.w});
  for (size_t i = 0; i < mask.v.size(); ++i) t.at(static_cast<long>(i)) = mask.v[i] ? 1.0f : -1.0f;
  return t;
}

Image flip_image(const Image& img, bool hflip, bool vflip) {
  Image out = img;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.set(vflip ? img.h - 1 - y : y, hflip ? img.w - 1 - x : x, c, img.at(y, x, c));
  return out;
}

Image rot90_image(const Image& img) {  // counter-clockwise
  Image out = Image::filled(img.w, img.h, img.channels, 0);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.channels; ++c) out.set(img.w - 1 - x, y, c, img.at(y, x, c));
  return out;
}

Mask flip_mask(const Mask& m, bool hflip, bool vflip) {
  Mask out = m;
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      out.set(vflip ? m.h - 1 - y : y, hflip ? m.w - 1 - x : x, m.at(y, x));
  return out;
}

Mask rot90_mask(const Mask& m) {
  Mask out = Mask::zeros(m.w, m.h);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) out.set(m.w - 1 - x, y, m.at(y, x));
  return out;
}

SampleRecord augment(const SampleRecord& record, Rng& rng, bool flips, bool rot90) {
  if (rot90 && record.image_a.h != record.image_a.w)
    throw ShapeError("augment: rot90 requires square patches");
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> quarter(0, 3);
  const bool hflip = flips && coin(rng) != 0;
  const bool vflip = flips && coin(rng) != 0;
  const int turns = rot90 ? quarter(rng) : 0;

  SampleRecord out;
  out.id = record.id;
  out.image_a = flip_image(record.image_a, hflip, vflip);
  out.image_b = flip_image(record.image_b, hflip, vflip);
  out.mask = flip_mask(record.mask, hflip, vflip);
  for (int k = 0; k < turns; ++k) {
    out.image_a = rot90_image(out.image_a);
    out.image_b = rot90_image(out.image_b);
    out.mask = rot90_mask(out.mask);
  }
  return out;
}

}  // namespace cdgan
