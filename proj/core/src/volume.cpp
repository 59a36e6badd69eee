#include "pfci/volume.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include "pfci/errors.hpp"

namespace pfci {

namespace {

constexpr std::string_view kCtvMagic = "CTV1";
constexpr std::string_view kCtmMagic = "CTM1";

struct Header {
  Dims3 dims;
  Spacing3 spacing;
};

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(std::string_view tok, const std::filesystem::path& path) {
  T value{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw FormatError(path.string() + ": bad header field '" + std::string(tok) + "'");
  }
  return value;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Splits "MAGIC\nheader\n" off the front of `blob` and returns the payload offset.
std::size_t parse_header(std::string_view blob, std::string_view magic, const std::filesystem::path& path,
                         Header& out) {
  auto nl1 = blob.find('\n');
  if (nl1 == std::string_view::npos || blob.substr(0, nl1) != magic) {
    throw FormatError(path.string() + ": missing " + std::string(magic) + " magic");
  }
  auto nl2 = blob.find('\n', nl1 + 1);
  if (nl2 == std::string_view::npos) throw FormatError(path.string() + ": missing header line");
  std::string_view line = blob.substr(nl1 + 1, nl2 - nl1 - 1);

  std::string_view toks[6];
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    auto sp = line.find(' ', pos);
    if (sp == std::string_view::npos) sp = line.size();
    if (n == 6) throw FormatError(path.string() + ": header has more than 6 fields");
    toks[n++] = line.substr(pos, sp - pos);
    pos = sp + 1;
  }
  if (n != 6) throw FormatError(path.string() + ": header needs 6 fields");

  out.dims = {parse_number<int>(toks[0], path), parse_number<int>(toks[1], path), parse_number<int>(toks[2], path)};
  out.spacing = {parse_number<double>(toks[3], path), parse_number<double>(toks[4], path),
                 parse_number<double>(toks[5], path)};
  if (out.dims.nx < 1 || out.dims.ny < 1 || out.dims.nz < 1) {
    throw FormatError(path.string() + ": dimensions must be >= 1");
  }
  return nl2 + 1;
}

std::string make_header(std::string_view magic, const Dims3& d, const Spacing3& s) {
  std::ostringstream os;
  os << magic << '\n'
     << d.nx << ' ' << d.ny << ' ' << d.nz << ' ' << format_double(s.x) << ' ' << format_double(s.y) << ' '
     << format_double(s.z) << '\n';
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& header, const char* payload,
                std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload, static_cast<std::streamsize>(bytes));
  if (!out) throw IoError("write failed for " + path.string());
}

void check_spacing(const Spacing3& s) {
  if (!(s.x > 0.0) || !(s.y > 0.0) || !(s.z > 0.0)) throw ParameterError("voxel spacing must be positive");
}

template <class Mask>
void save_mask(const Mask& mask, const std::filesystem::path& path) {
  auto header = make_header(kCtmMagic, mask.dims(), mask.spacing());
  auto bits = mask.bits();
  write_file(path, header, reinterpret_cast<const char*>(bits.data()), bits.size());
}

}  // namespace

CtVolume::CtVolume(Dims3 dims, Spacing3 spacing, std::vector<std::int16_t> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
  if (dims_.nx < 1 || dims_.ny < 1 || dims_.nz < 1) throw ParameterError("volume dimensions must be >= 1");
  check_spacing(spacing_);
  if (voxels_.size() != dims_.count()) {
    throw SizeMismatchError("volume expects " + std::to_string(dims_.count()) + " voxels, got " +
                            std::to_string(voxels_.size()));
  }
  for (std::size_t i = 0; i < voxels_.size(); ++i) {
    if (voxels_[i] < kMinHu || voxels_[i] > kMaxHu) {
      throw RangeError("voxel " + std::to_string(i) + " = " + std::to_string(voxels_[i]) +
                       " HU outside [-4096, 4095]");
    }
  }
}

template <class Tag>
MaskVolume<Tag>::MaskVolume(Dims3 dims, Spacing3 spacing, std::vector<std::uint8_t> bits)
    : dims_(dims), spacing_(spacing), bits_(std::move(bits)) {
  if (bits_.size() != dims_.count()) {
    throw SizeMismatchError("mask expects " + std::to_string(dims_.count()) + " voxels, got " +
                            std::to_string(bits_.size()));
  }
  for (auto b : bits_) {
    if (b > 1) throw RangeError("mask voxels must be 0 or 1");
  }
}

template <class Tag>
std::size_t MaskVolume<Tag>::popcount() const noexcept {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

template class MaskVolume<RoiTag>;
template class MaskVolume<FatTag>;

CtVolume load_ctv(const std::filesystem::path& path) {
  const std::string blob = read_all(path);
  Header h;
  const std::size_t off = parse_header(blob, kCtvMagic, path, h);
  const std::size_t expected = h.dims.count() * 2;
  const std::size_t have = blob.size() - off;
  if (have != expected) {
    throw SizeMismatchError(path.string() + ": payload holds " + std::to_string(have / 2) + " voxels, header declares " +
                            std::to_string(h.dims.count()));
  }
  std::vector<std::int16_t> voxels(h.dims.count());
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + off);
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
    voxels[i] = static_cast<std::int16_t>(u);
  }
  return CtVolume(h.dims, h.spacing, std::move(voxels));
}

void save_ctv(const CtVolume& vol, const std::filesystem::path& path) {
  auto header = make_header(kCtvMagic, vol.dims(), vol.spacing());
  auto src = vol.voxels();
  std::string payload(src.size() * 2, '\0');
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(src[i]);
    payload[2 * i] = static_cast<char>(u & 0xFF);
    payload[2 * i + 1] = static_cast<char>(u >> 8);
  }
  write_file(path, header, payload.data(), payload.size());
}

Roi3D load_ctm(const std::filesystem::path& path) {
  const std::string blob = read_all(path);
  Header h;
  const std::size_t off = parse_header(blob, kCtmMagic, path, h);
  const std::size_t have = blob.size() - off;
  if (have != h.dims.count()) {
    throw SizeMismatchError(path.string() + ": payload holds " + std::to_string(have) + " voxels, header declares " +
                            std::to_string(h.dims.count()));
  }
  std::vector<std::uint8_t> bits(blob.begin() + static_cast<std::ptrdiff_t>(off), blob.end());
  return Roi3D(h.dims, h.spacing, std::move(bits));
}

void save_ctm(const Roi3D& roi, const std::filesystem::path& path) { save_mask(roi, path); }
void save_ctm(const BinaryVolume& mask, const std::filesystem::path& path) { save_mask(mask, path); }

BinaryVolume extract_fat_mask(const CtVolume& vol, const Roi3D& roi, HuRange window) {
  if (!(vol.dims() == roi.dims())) throw ShapeError("ROI dims do not match volume dims");
  if (window.lo > window.hi) throw ParameterError("HU window lo > hi");
  BinaryVolume out(vol.dims(), vol.spacing());
  auto hu = vol.voxels();
  auto in = roi.bits();
  auto dst = out.bits();
  for (std::size_t i = 0; i < hu.size(); ++i) {
    dst[i] = (in[i] != 0 && window.contains(hu[i])) ? 1 : 0;
  }
  return out;
}

}  // namespace pfci
