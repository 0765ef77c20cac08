#include "laid/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "laid/binio.hpp"
#include "laid/error.hpp"
#include "laid/fft.hpp"

namespace laid {

namespace fs = std::filesystem;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::string_view to_string(DomainTag d) {
  return d == DomainTag::Spatial ? "spatial" : "spectral";
}

// ---------------------------------------------------------------------------
// Manifests

DatasetManifest scan_image_tree(const std::string& root) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::Data, "no such directory '" + root + "'");
  DatasetManifest m;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext != ".ppm" && ext != ".pgm") continue;
    const fs::path rel = fs::relative(e.path(), root);
    std::vector<std::string> parts;
    for (const auto& p : rel) parts.push_back(p.string());
    if (parts.size() < 3) continue;
    ManifestEntry entry;
    entry.path = e.path().string();
    entry.generator = parts[0];
    bool labelled = false;
    for (std::size_t i = 1; i + 1 < parts.size(); ++i) {
      if (parts[i] == "val" || parts[i] == "test") entry.split = Split::Test;
      if (parts[i] == "nature") {
        entry.label = 0;
        labelled = true;
      } else if (parts[i] == "ai") {
        entry.label = 1;
        labelled = true;
      }
    }
    if (labelled) m.entries.push_back(std::move(entry));
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const auto& a, const auto& b) { return a.path < b.path; });
  return m;
}

std::string format_manifest(const DatasetManifest& m) {
  std::string out = "path\tlabel\tgenerator\tsplit\n";
  for (const auto& e : m.entries) {
    out += e.path + '\t' + std::to_string(e.label) + '\t' + e.generator + '\t' +
           std::string(to_string(e.split)) + '\n';
  }
  return out;
}

DatasetManifest parse_manifest(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  DatasetManifest m;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("path", 0) == 0) continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) f.push_back(field);
    if (f.size() < 3 || (f[1] != "0" && f[1] != "1")) {
      throw Error(ErrorKind::Data, "manifest line " + std::to_string(line_no) + " malformed");
    }
    ManifestEntry e{f[0], static_cast<std::uint8_t>(f[1] == "1"), f[2], Split::Train};
    if (f.size() > 3) {
      if (f[3] == "val") e.split = Split::Val;
      else if (f[3] == "test") e.split = Split::Test;
      else if (f[3] != "train") {
        throw Error(ErrorKind::Data, "manifest line " + std::to_string(line_no) + " bad split");
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

namespace {

using StratumKey = std::pair<std::string, std::uint8_t>;

std::map<StratumKey, std::vector<std::size_t>> strata_of(const DatasetManifest& m) {
  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    strata[{m.entries[i].generator, m.entries[i].label}].push_back(i);
  }
  return strata;
}

std::string stratum_name(const StratumKey& k) {
  return k.first + "/" + (k.second ? "ai" : "nature");
}

}  // namespace

DatasetManifest stratified_subsample(const DatasetManifest& manifest, std::size_t total, Rng& rng) {
  auto strata = strata_of(manifest);
  std::map<std::string, int> generators;
  for (const auto& [key, idx] : strata) generators[key.first] |= 1 << key.second;
  if (generators.empty()) throw Error(ErrorKind::Data, "empty manifest");
  for (const auto& [gen, mask] : generators) {
    if (mask != 3) {
      throw Error(ErrorKind::Data, "stratum " + stratum_name({gen, mask == 1 ? 1 : 0}) + " is empty");
    }
  }
  const std::size_t g = generators.size();
  if (total == 0 || total % (2 * g) != 0) {
    throw Error(ErrorKind::Parameter, "total " + std::to_string(total) +
                                          " is not divisible by 2 x " + std::to_string(g) +
                                          " generators");
  }
  const std::size_t per = total / (2 * g);
  DatasetManifest out;
  out.entries.reserve(total);
  for (auto& [key, idx] : strata) {
    if (idx.size() < per) {
      throw Error(ErrorKind::Data, "stratum " + stratum_name(key) + " has " +
                                       std::to_string(idx.size()) + " items, need " +
                                       std::to_string(per));
    }
    // Partial Fisher-Yates: the first `per` slots are a uniform sample.
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
      out.entries.push_back(manifest.entries[idx[i]]);
    }
  }
  return out;
}

std::pair<DatasetManifest, DatasetManifest> split_val_test(const DatasetManifest& manifest,
                                                           Rng& rng) {
  auto strata = strata_of(manifest);
  DatasetManifest val, test;
  for (auto& [key, idx] : strata) {
    if (idx.size() < 2) {
      throw Error(ErrorKind::Data, "stratum " + stratum_name(key) + " needs at least 2 items");
    }
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t n_val = (idx.size() + 1) / 2;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      ManifestEntry e = manifest.entries[idx[i]];
      e.split = i < n_val ? Split::Val : Split::Test;
      (i < n_val ? val : test).entries.push_back(std::move(e));
    }
  }
  return {std::move(val), std::move(test)};
}

// ---------------------------------------------------------------------------
// Tensor cache

void TensorCache::push_back(ImageTensor t, std::uint8_t label) {
  if (tensors.empty() && height == 0) {
    height = t.height();
    width = t.width();
    channels = t.channels();
    range = t.range();
  }
  if (t.height() != height || t.width() != width || t.channels() != channels) {
    throw Error(ErrorKind::Dimension, "tensor shape differs from cache shape");
  }
  if (label > 1) throw Error(ErrorKind::Data, "labels must be 0 or 1");
  tensors.push_back(std::move(t));
  labels.push_back(label);
}

namespace {
constexpr char kCacheMagic[9] = "LAIDTNSR";
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize_cache(const TensorCache& cache) {
  if (cache.labels.size() != cache.tensors.size()) {
    throw Error(ErrorKind::Data, "cache label count does not match tensor count");
  }
  binio::Writer w;
  w.tag(kCacheMagic);
  w.u32(kCacheVersion);
  w.u64(cache.tensors.size());
  w.u32(static_cast<std::uint32_t>(cache.height));
  w.u32(static_cast<std::uint32_t>(cache.width));
  w.u32(static_cast<std::uint32_t>(cache.channels));
  w.u8(static_cast<std::uint8_t>(cache.range));
  w.u8(static_cast<std::uint8_t>(cache.domain));
  w.buffer().reserve(w.size() + cache.tensors.size() * (cache.height * cache.width * cache.channels * 4 + 1) + 8);
  for (const auto& t : cache.tensors) {
    if (t.height() != cache.height || t.width() != cache.width || t.channels() != cache.channels) {
      throw Error(ErrorKind::Dimension, "tensor shape differs from cache header");
    }
    for (float v : t.data()) w.f32(v);
  }
  for (std::uint8_t l : cache.labels) w.u8(l);
  w.u64(binio::fnv1a64(w.buffer()));
  return std::move(w.buffer());
}

TensorCache deserialize_cache(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(ErrorKind::Data, "tensor cache truncated");
  binio::Reader r(bytes, ErrorKind::Data);
  if (!r.tag(kCacheMagic)) throw Error(ErrorKind::Data, "not a tensor cache (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCacheVersion) {
    throw Error(ErrorKind::Data, "unsupported tensor cache version " + std::to_string(version));
  }
  TensorCache c;
  const std::uint64_t count = r.u64();
  c.height = r.u32();
  c.width = r.u32();
  c.channels = r.u32();
  const std::uint8_t range = r.u8();
  const std::uint8_t domain = r.u8();
  if (range > 2 || domain > 1) throw Error(ErrorKind::Data, "bad range or domain tag");
  c.range = static_cast<RangeTag>(range);
  c.domain = static_cast<DomainTag>(domain);
  const std::size_t per = c.height * c.width * c.channels;
  if (r.remaining() != count * per * 4 + count + 8) {
    throw Error(ErrorKind::Data, "declared tensor count does not match payload length");
  }
  const std::uint64_t expected = binio::fnv1a64(bytes.first(bytes.size() - 8));
  c.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::vector<float> data(per);
    for (float& v : data) v = r.f32();
    c.tensors.emplace_back(c.height, c.width, c.channels, c.range, std::move(data));
  }
  c.labels.resize(count);
  for (auto& l : c.labels) {
    l = r.u8();
    if (l > 1) throw Error(ErrorKind::Data, "label byte outside {0,1}");
  }
  if (r.u64() != expected) throw Error(ErrorKind::Data, "tensor cache checksum mismatch");
  return c;
}

void write_cache(const TensorCache& cache, const std::string& path) {
  binio::write_file(path, serialize_cache(cache));
}

TensorCache read_cache(const std::string& path) {
  return deserialize_cache(binio::read_file(path));
}

TensorCache build_spectral_cache(const TensorCache& spatial) {
  if (spatial.domain != DomainTag::Spatial) {
    throw Error(ErrorKind::Data, "spectral cache must be built from a spatial cache");
  }
  TensorCache out;
  out.height = spatial.height;
  out.width = spatial.width;
  out.channels = spatial.channels;
  out.range = RangeTag::Byte0255;
  out.domain = DomainTag::Spectral;
  out.tensors.reserve(spatial.size());
  for (const auto& t : spatial.tensors) out.tensors.push_back(spectral_image(t));
  out.labels = spatial.labels;
  return out;
}

// ---------------------------------------------------------------------------
// PNM

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok += c;
  }
  return tok;
}

}  // namespace

ImageTensor read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot open image '" + path + "'");
  const std::string magic = next_token(in);
  std::size_t ch = 0;
  bool ascii = false;
  if (magic == "P5") ch = 1;
  else if (magic == "P6") ch = 3;
  else if (magic == "P2") { ch = 1; ascii = true; }
  else if (magic == "P3") { ch = 3; ascii = true; }
  else throw Error(ErrorKind::Data, "'" + path + "' is not a PGM/PPM file");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Data, "'" + path + "' has a malformed header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw Error(ErrorKind::Data, "'" + path + "' has invalid dimensions or maxval");
  }
  ImageTensor img(h, w, ch, RangeTag::Byte0255);
  const double scale = 255.0 / static_cast<double>(maxval);
  auto data = img.data();
  if (ascii) {
    for (float& v : data) {
      const std::string t = next_token(in);
      if (t.empty()) throw Error(ErrorKind::Data, "'" + path + "' is truncated");
      v = static_cast<float>(std::min(std::stod(t), static_cast<double>(maxval)) * scale);
    }
  } else {
    const std::size_t bytes_per = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(data.size() * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
      throw Error(ErrorKind::Data, "'" + path + "' is truncated");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double v = bytes_per == 2 ? raw[2 * i] * 256.0 + raw[2 * i + 1] : raw[i];
      data[i] = static_cast<float>(std::min(v, static_cast<double>(maxval)) * scale);
    }
  }
  return img;
}

void write_ppm(const ImageTensor& img, const std::string& path) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw Error(ErrorKind::Dimension, "PNM output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << (img.channels() == 3 ? "P6" : "P5") << "\n" << img.width() << " " << img.height() << "\n255\n";
  for (float v : img.data()) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 255.0f)))));
  }
}

TensorCache preprocess_images(const DatasetManifest& manifest, std::size_t size) {
  if (size == 0) throw Error(ErrorKind::Parameter, "preprocess size must be >= 1");
  TensorCache cache;
  cache.domain = DomainTag::Spatial;
  for (const auto& e : manifest.entries) {
    ImageTensor img = read_pnm(e.path);
    if (img.channels() == 1) {
      ImageTensor rgb(img.height(), img.width(), 3, RangeTag::Byte0255);
      for (std::size_t y = 0; y < img.height(); ++y) {
        for (std::size_t x = 0; x < img.width(); ++x) {
          for (std::size_t c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x, 0);
        }
      }
      img = std::move(rgb);
    }
    cache.push_back(resize_bilinear(img, size, size), e.label);
  }
  return cache;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

constexpr double kFieldCutoff = 0.2;      // cycles/pixel, Gaussian low-pass
constexpr double kFieldKnee = 1.0 / 64.0;  // keeps the 1/f weight finite at DC

// Zero-mean, unit-variance low-pass 1/f field.
std::vector<double> smooth_field(std::size_t n, Rng& rng) {
  std::vector<double> noise(n * n);
  for (double& v : noise) v = rng.normal();
  ComplexPlane spec = fft2d(noise, n, n);
  for (std::size_t u = 0; u < n; ++u) {
    const double fu = static_cast<double>(u <= n / 2 ? u : n - u) / static_cast<double>(n);
    for (std::size_t v = 0; v < n; ++v) {
      const double fv = static_cast<double>(v <= n / 2 ? v : n - v) / static_cast<double>(n);
      const double f = std::sqrt(fu * fu + fv * fv);
      const double gain = std::exp(-(f / kFieldCutoff) * (f / kFieldCutoff)) / (f + kFieldKnee);
      spec.re[u * n + v] *= gain;
      spec.im[u * n + v] *= gain;
    }
  }
  spec.re[0] = spec.im[0] = 0.0;
  const ComplexPlane field = ifft2d(spec);
  double ss = 0.0;
  for (double v : field.re) ss += v * v;
  const double sd = std::sqrt(ss / static_cast<double>(n * n));
  std::vector<double> out(field.re);
  for (double& v : out) v = sd > 0 ? v / sd : 0.0;
  return out;
}

}  // namespace

ImageTensor synth_image(std::uint8_t label, std::size_t size, Rng& rng) {
  if (size < 4 || size % 2 != 0) throw Error(ErrorKind::Parameter, "synthetic size must be even and >= 4");
  const double brightness = 128.0 + rng.uniform(-16.0, 16.0);
  const double contrast = rng.uniform(28.0, 44.0);
  const auto shared = smooth_field(size, rng);
  ImageTensor img(size, size, 3, RangeTag::Byte0255);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto own = smooth_field(size, rng);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        // Synthetic samples repeat the top-left pixel of each 2x2 block.
        const std::size_t sy = label ? y & ~std::size_t{1} : y;
        const std::size_t sx = label ? x & ~std::size_t{1} : x;
        const double f = 0.8 * shared[sy * size + sx] + 0.6 * own[sy * size + sx];
        img.at(y, x, c) = static_cast<float>(std::clamp(std::round(brightness + contrast * f), 0.0, 255.0));
      }
    }
  }
  return img;
}

SynthDataset synth_dataset(const SynthOptions& opts, const Rng& rng) {
  if (opts.train_per_class < 8 || opts.val_per_class < 8) {
    throw Error(ErrorKind::Parameter, "synthetic dataset needs at least 8 samples per class");
  }
  SynthDataset ds;
  auto fill = [&](TensorCache& cache, std::size_t per_class, std::uint64_t split_id) {
    cache.domain = DomainTag::Spatial;
    cache.height = cache.width = opts.size;
    cache.channels = 3;
    cache.range = RangeTag::Byte0255;
    const Rng split_rng = rng.child(split_id);
    // Classes interleaved so any prefix is balanced.
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::uint8_t label = 0; label < 2; ++label) {
        Rng sample_rng = split_rng.child(2 * i + label);
        cache.push_back(synth_image(label, opts.size, sample_rng), label);
      }
    }
  };
  fill(ds.train, opts.train_per_class, 0);
  fill(ds.val, opts.val_per_class, 1);
  fill(ds.test, opts.test_per_class, 2);
  return ds;
}

}  // namespace laid
