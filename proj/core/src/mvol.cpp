#include "tloss/mvol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "tloss/byte_io.hpp"

namespace tloss {

namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'V', 'O', 'L'};

void put_header(detail::ByteWriter& out, const Dims& dims, const Spacing& spacing,
                MvolDtype dtype) {
  out.put_bytes(kMagic);
  out.put<std::uint32_t>(kMvolVersion);
  for (int a = 0; a < 3; ++a) out.put<std::uint32_t>(static_cast<std::uint32_t>(dims[a]));
  for (int a = 0; a < 3; ++a) out.put<float>(static_cast<float>(spacing[a]));
  out.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
}

float narrow(double v) {
  if (!(std::abs(v) <= static_cast<double>(std::numeric_limits<float>::max()))) {
    throw DomainError("MVOL: value " + std::to_string(v) + " is not representable as f32");
  }
  return static_cast<float>(v);
}

template <typename FieldT>
std::vector<std::uint8_t> encode_field(const FieldT& v) {
  detail::ByteWriter out;
  out.reserve(kMvolHeaderBytes + 4 * v.size());
  put_header(out, v.dims(), v.spacing(), MvolDtype::kFieldF32);
  for (double x : v.values()) out.put<float>(narrow(x));
  return std::move(out).take();
}

MvolHeader read_header(detail::ByteReader& in) {
  auto magic = in.get_bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw ParseError("MVOL: bad magic (expected \"MVOL\")");
  }
  MvolHeader h;
  h.version = in.get<std::uint32_t>("version");
  if (h.version != kMvolVersion) {
    throw ParseError("MVOL: unsupported version " + std::to_string(h.version));
  }
  h.dims.d = in.get<std::uint32_t>("dim d");
  h.dims.h = in.get<std::uint32_t>("dim h");
  h.dims.w = in.get<std::uint32_t>("dim w");
  try {
    validate_dims(h.dims);
  } catch (const ShapeError& e) {
    throw ParseError(std::string("MVOL: invalid dims: ") + e.what());
  }
  h.spacing.d = in.get<float>("spacing d");
  h.spacing.h = in.get<float>("spacing h");
  h.spacing.w = in.get<float>("spacing w");
  for (int a = 0; a < 3; ++a) {
    if (!(h.spacing[a] > 0.0) || !std::isfinite(h.spacing[a])) {
      throw ParseError("MVOL: spacing must be positive and finite");
    }
  }
  auto dtype = in.get<std::uint8_t>("dtype");
  if (dtype > 1) throw ParseError("MVOL: unknown dtype " + std::to_string(dtype));
  h.dtype = static_cast<MvolDtype>(dtype);
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_mvol(const Volume3D& v) { return encode_field(v); }
std::vector<std::uint8_t> encode_mvol(const ProbabilityMask& v) { return encode_field(v); }

std::vector<std::uint8_t> encode_mvol(const BinaryMask& m) {
  detail::ByteWriter out;
  out.reserve(kMvolHeaderBytes + m.size());
  put_header(out, m.dims(), m.spacing(), MvolDtype::kMaskU8);
  out.put_bytes(m.values());
  return std::move(out).take();
}

MvolHeader decode_mvol_header(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "MVOL");
  return read_header(in);
}

AnyVolume decode_mvol(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "MVOL");
  const MvolHeader h = read_header(in);
  const auto n = static_cast<std::size_t>(h.dims.count());
  const std::size_t elem = h.dtype == MvolDtype::kMaskU8 ? 1 : 4;
  if (in.remaining() != n * elem) {
    const std::size_t want = n * elem;
    if (in.remaining() < want) {
      throw ParseError("MVOL: truncated payload: dims " + to_string(h.dims) + " need " +
                       std::to_string(want) + " bytes, have " +
                       std::to_string(in.remaining()) + " (missing " +
                       std::to_string(want - in.remaining()) + ")");
    }
    throw ParseError("MVOL: " + std::to_string(in.remaining() - want) +
                     " trailing bytes after payload for dims " + to_string(h.dims));
  }
  if (h.dtype == MvolDtype::kMaskU8) {
    auto payload = in.get_bytes(n, "payload");
    std::vector<std::uint8_t> data(payload.begin(), payload.end());
    for (auto b : data) {
      if (b > 1) throw ParseError("MVOL: mask voxel value " + std::to_string(b) + " not in {0,1}");
    }
    return BinaryMask(h.dims, std::move(data), h.spacing);
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    float f = in.get<float>("payload");
    if (!std::isfinite(f)) throw ParseError("MVOL: non-finite field value");
    data[i] = f;
  }
  return Volume3D(h.dims, std::move(data), h.spacing);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void save_volume(const std::filesystem::path& path, const Volume3D& v) {
  write_file(path, encode_mvol(v));
}
void save_volume(const std::filesystem::path& path, const ProbabilityMask& v) {
  write_file(path, encode_mvol(v));
}
void save_volume(const std::filesystem::path& path, const BinaryMask& m) {
  write_file(path, encode_mvol(m));
}

AnyVolume load_volume(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return decode_mvol(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Volume3D load_field(const std::filesystem::path& path) {
  auto any = load_volume(path);
  if (auto* v = std::get_if<Volume3D>(&any)) return std::move(*v);
  throw ParseError(path.string() + ": expected f32 field (dtype 1), found u8 mask");
}

ProbabilityMask load_probability(const std::filesystem::path& path) {
  Volume3D v = load_field(path);
  try {
    return ProbabilityMask(v.dims(), std::vector<double>(v.values().begin(), v.values().end()),
                           v.spacing());
  } catch (const DomainError&) {
    throw ParseError(path.string() + ": field values outside [0,1]");
  }
}

BinaryMask load_mask(const std::filesystem::path& path) {
  auto any = load_volume(path);
  if (auto* m = std::get_if<BinaryMask>(&any)) return std::move(*m);
  throw ParseError(path.string() + ": expected u8 mask (dtype 0), found f32 field");
}

Volume3D round_to_f32(const Volume3D& v) {
  std::vector<double> data(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) data[i] = static_cast<double>(narrow(v[i]));
  Spacing s;
  for (int a = 0; a < 3; ++a) s[a] = static_cast<double>(static_cast<float>(v.spacing()[a]));
  return Volume3D(v.dims(), std::move(data), s);
}

}  // namespace tloss
