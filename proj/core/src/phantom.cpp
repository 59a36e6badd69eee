#include "pfci/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "pfci/errors.hpp"
#include "pfci/parallel.hpp"

namespace pfci {

namespace {

double draw(std::mt19937_64& rng, const Interval& r) {
  if (r.hi <= r.lo) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

void check_interval(const Interval& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw ParameterError(std::string("phantom interval ") + name + " is empty or non-finite");
  }
}

void check_hu(int hu, const char* name) {
  if (hu < kMinHu || hu > kMaxHu) throw ParameterError(std::string(name) + " HU outside the CT envelope");
}

// True when the ellipsoid's bounding box fits inside the voxel grid.
bool fits(const Ellipsoid& e, const Dims3& d) {
  return e.cx - e.ax >= 0.0 && e.cx + e.ax <= d.nx - 1.0 && e.cy - e.ay >= 0.0 && e.cy + e.ay <= d.ny - 1.0 &&
         e.cz - e.az >= 0.0 && e.cz + e.az <= d.nz - 1.0;
}

std::string case_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case_%04d", id);
  return buf;
}

}  // namespace

void PhantomParams::validate() const {
  if (dims.nx < 8 || dims.ny < 8 || dims.nz < 8) throw ParameterError("phantom grid must be at least 8^3");
  if (!(spacing.x > 0) || !(spacing.y > 0) || !(spacing.z > 0)) throw ParameterError("spacing must be positive");
  for (auto [r, n] : {std::pair{thorax_x, "thorax_x"}, {thorax_y, "thorax_y"}, {thorax_z, "thorax_z"},
                      {heart_x, "heart_x"}, {heart_y, "heart_y"}, {heart_z, "heart_z"},
                      {heart_shift_x, "heart_shift_x"}, {heart_shift_y, "heart_shift_y"},
                      {heart_shift_z, "heart_shift_z"}, {fat_thickness, "fat_thickness"}}) {
    check_interval(r, n);
  }
  if (heart_x.lo <= 0 || heart_y.lo <= 0 || heart_z.lo <= 0) throw ParameterError("heart semi-axes must be positive");
  if (thorax_x.lo <= 0 || thorax_y.lo <= 0 || thorax_z.lo <= 0) {
    throw ParameterError("thorax semi-axes must be positive");
  }
  if (fat_thickness.lo < 0) throw ParameterError("fat thickness must be non-negative");
  if (!kFatWindow.contains(fat_hu)) throw ParameterError("fat HU must lie in [-190, -30]");
  if (background_hu >= -1000) throw ParameterError("background HU must be below -1000");
  for (auto [hu, n] : {std::pair{lung_hu, "lung"}, {soft_tissue_hu, "soft tissue"}, {fat_hu, "fat"},
                       {spine_hu, "spine"}, {background_hu, "background"}}) {
    check_hu(hu, n);
  }
  // Tissue that can share the ROI with the shell must stay outside the fat window.
  if (kFatWindow.contains(soft_tissue_hu)) throw ParameterError("soft-tissue HU must lie outside the fat window");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ParameterError("noise SD must be >= 0");
}

bool Ellipsoid::contains(double x, double y, double z) const noexcept {
  const double dx = (x - cx) / ax;
  const double dy = (y - cy) / ay;
  const double dz = (z - cz) / az;
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

int Ellipsoid::column_count(int x, int z, int ny) const noexcept {
  const double dx = (x - cx) / ax;
  const double dz = (z - cz) / az;
  const double q = 1.0 - dx * dx - dz * dz;
  if (q < 0.0) return 0;
  const double r = ay * std::sqrt(q);
  int lo = std::max(0, static_cast<int>(std::ceil(cy - r)));
  int hi = std::min(ny - 1, static_cast<int>(std::floor(cy + r)));
  // The closed-form endpoints can be off by one ulp-induced step at the boundary.
  while (lo <= hi && !contains(x, lo, z)) ++lo;
  while (lo > 0 && contains(x, lo - 1, z)) --lo;
  while (hi >= lo && !contains(x, hi, z)) --hi;
  while (hi < ny - 1 && hi >= lo && contains(x, hi + 1, z)) ++hi;
  return std::max(0, hi - lo + 1);
}

FloatImage PhantomSpec::fat_image() const {
  std::vector<double> px(fat_table.begin(), fat_table.end());
  return FloatImage(dims.nx, dims.nz, std::move(px));
}

Phantom generate_phantom(std::uint64_t seed, const PhantomParams& params) {
  params.validate();
  const Dims3 d = params.dims;
  std::mt19937_64 rng(seed);

  const double hx = 0.5 * (d.nx - 1), hy = 0.5 * (d.ny - 1), hz = 0.5 * (d.nz - 1);

  PhantomSpec spec;
  spec.seed = seed;
  spec.dims = d;
  spec.thorax = {hx, hy, hz, draw(rng, params.thorax_x) * hx, draw(rng, params.thorax_y) * hy,
                 draw(rng, params.thorax_z) * hz};

  spec.heart.cx = hx + draw(rng, params.heart_shift_x) * hx;
  spec.heart.cy = hy + draw(rng, params.heart_shift_y) * hy;
  spec.heart.cz = hz + draw(rng, params.heart_shift_z) * hz;
  spec.heart.ax = draw(rng, params.heart_x) * hx;
  spec.heart.ay = draw(rng, params.heart_y) * hy;
  spec.heart.az = draw(rng, params.heart_z) * hz;

  spec.pericardium = spec.heart;
  spec.pericardium.ax += draw(rng, params.fat_thickness);
  spec.pericardium.ay += draw(rng, params.fat_thickness);
  spec.pericardium.az += draw(rng, params.fat_thickness);
  if (!fits(spec.pericardium, d)) throw ParameterError("pericardial region does not fit the grid");

  const double lung_dx = 0.48 * spec.thorax.ax;
  const double lung_y = hy + 0.05 * spec.thorax.ay;
  spec.lung_left = {hx + lung_dx, lung_y, hz, 0.36 * spec.thorax.ax, 0.72 * spec.thorax.ay, 0.85 * hz};
  spec.lung_right = {hx - lung_dx, lung_y, hz, 0.36 * spec.thorax.ax, 0.72 * spec.thorax.ay, 0.85 * hz};
  spec.spine_cx = hx;
  spec.spine_cy = hy + 0.78 * spec.thorax.ay;
  spec.spine_r = std::max(1.0, 0.14 * spec.thorax.ay);

  std::vector<std::int16_t> hu(d.count());
  std::vector<std::uint8_t> roi(d.count(), 0);
  std::vector<std::uint8_t> shell(d.count(), 0);
  std::normal_distribution<double> noise(0.0, params.noise_sd > 0 ? params.noise_sd : 1.0);

  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        int v = params.background_hu;
        bool body = false;
        if (spec.thorax.contains(x, y, z)) {
          body = true;
          v = params.soft_tissue_hu;
          if (spec.lung_left.contains(x, y, z) || spec.lung_right.contains(x, y, z)) v = params.lung_hu;
          const double sx = x - spec.spine_cx, sy = y - spec.spine_cy;
          if (sx * sx + sy * sy <= spec.spine_r * spec.spine_r) v = params.spine_hu;
        }
        if (spec.pericardium.contains(x, y, z)) {
          body = true;
          roi[i] = 1;
          if (spec.heart.contains(x, y, z)) {
            v = params.soft_tissue_hu;
          } else {
            v = params.fat_hu;
            shell[i] = 1;
          }
        }
        if (params.noise_sd > 0.0 && body && !shell[i]) {
          double nv = std::round(v + noise(rng));
          // Noisy ROI voxels must not drift into the fat window.
          if (roi[i] && kFatWindow.contains(static_cast<int>(nv))) {
            nv = nv > kFatWindow.hi - (kFatWindow.hi - kFatWindow.lo) / 2.0 ? kFatWindow.hi + 1.0
                                                                             : kFatWindow.lo - 1.0;
          }
          v = static_cast<int>(std::clamp(nv, -1000.0, static_cast<double>(kMaxHu)));
        }
        hu[i] = static_cast<std::int16_t>(v);
      }
    }
  }

  spec.fat_table.assign(static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.nz), 0);
  for (int z = 0; z < d.nz; ++z) {
    for (int x = 0; x < d.nx; ++x) {
      spec.fat_table[static_cast<std::size_t>(z) * d.nx + x] =
          spec.pericardium.column_count(x, z, d.ny) - spec.heart.column_count(x, z, d.ny);
    }
  }

  return Phantom{CtVolume(d, params.spacing, std::move(hu)), Roi3D(d, params.spacing, std::move(roi)),
                 std::move(spec)};
}

const CaseRecord& CorpusManifest::find(int case_id) const {
  for (const auto& c : cases) {
    if (c.case_id == case_id) return c;
  }
  throw DataError("case " + std::to_string(case_id) + " not in manifest");
}

std::vector<int> CorpusManifest::paired_ids() const {
  std::vector<int> out;
  for (const auto& c : cases)
    if (c.paired) out.push_back(c.case_id);
  return out;
}

std::vector<int> CorpusManifest::ct_only_ids() const {
  std::vector<int> out;
  for (const auto& c : cases)
    if (!c.paired) out.push_back(c.case_id);
  return out;
}

std::uint64_t case_seed(std::uint64_t corpus_seed, int case_id) {
  // splitmix64 finalizer over (seed, id)
  std::uint64_t z = corpus_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(case_id) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CorpusManifest generate_corpus(int n_total, int n_paired, std::uint64_t seed, const PhantomParams& params,
                               const std::filesystem::path& out_dir, const AttenuationParams& att, int jobs) {
  if (n_total < 0 || n_paired < 0) throw ParameterError("case counts must be non-negative");
  if (n_paired > n_total) {
    throw ParameterError("paired count " + std::to_string(n_paired) + " exceeds total " + std::to_string(n_total));
  }
  params.validate();
  if (!(att.mu_air >= 0.0) || !(att.mu_air < att.mu_water)) {
    throw ParameterError("pseudo-CXR requires 0 <= mu_air < mu_water");
  }

  CorpusManifest manifest;
  manifest.corpus_seed = seed;
  manifest.root = out_dir;
  if (n_total == 0) return manifest;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create corpus directory " + out_dir.string() + (ec ? ": " + ec.message() : ""));
  }

  manifest.cases.resize(static_cast<std::size_t>(n_total));
  parallel_for(n_total, jobs, [&](int id) {
    CaseRecord rec;
    rec.case_id = id;
    rec.paired = id < n_paired;
    rec.seed = case_seed(seed, id);
    const std::string base = case_name(id);
    rec.volume = base + ".ctv";
    rec.roi = base + ".ctm";
    Phantom ph = generate_phantom(rec.seed, params);
    save_ctv(ph.volume, out_dir / rec.volume);
    save_ctm(ph.roi, out_dir / rec.roi);
    if (rec.paired) {
      rec.cxr = base + "_cxr.pfm";
      save_pfm(pseudo_cxr(ph.volume, att), out_dir / rec.cxr);
    }
    manifest.cases[static_cast<std::size_t>(id)] = std::move(rec);
  });
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : manifest.cases) {
    nlohmann::ordered_json j;
    j["case_id"] = c.case_id;
    j["volume"] = c.volume;
    j["roi"] = c.roi;
    j["cxr"] = c.cxr.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(c.cxr);
    j["paired"] = c.paired;
    j["seed"] = c.seed;
    j["corpus_seed"] = manifest.corpus_seed;
    arr.push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << arr.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json arr;
  try {
    in >> arr;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw FormatError(path.string() + ": manifest must be a JSON array");

  CorpusManifest m;
  m.root = path.parent_path();
  std::set<int> seen;
  try {
    for (const auto& j : arr) {
      CaseRecord c;
      c.case_id = j.at("case_id").get<int>();
      c.volume = j.at("volume").get<std::string>();
      c.roi = j.at("roi").get<std::string>();
      c.cxr = j.at("cxr").is_null() ? std::string() : j.at("cxr").get<std::string>();
      c.paired = j.at("paired").get<bool>();
      c.seed = j.value("seed", std::uint64_t{0});
      m.corpus_seed = j.value("corpus_seed", std::uint64_t{0});
      if (c.paired && c.cxr.empty()) throw FormatError("paired case without a radiograph");
      if (!seen.insert(c.case_id).second) throw DataError("duplicate case id " + std::to_string(c.case_id));
      m.cases.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (const auto& c : m.cases) {
    for (const auto& f : {c.volume, c.roi, c.cxr}) {
      if (!f.empty() && !std::filesystem::exists(m.root / f)) {
        throw IoError("case " + std::to_string(c.case_id) + ": missing file " + (m.root / f).string());
      }
    }
  }
  return m;
}

}  // namespace pfci
