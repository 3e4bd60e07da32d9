#include "alt/image_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "alt/util/errors.hpp"

namespace alt::raster {

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                            0x0D, 0x0A, 0x1A, 0x0A};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

std::uint32_t read_u32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::vector<unsigned char>& out, const char type[4],
                 const unsigned char* data, std::size_t len) {
  put_u32(out, static_cast<std::uint32_t>(len));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  const uLong crc =
      crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + len));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void encode_png(const ImageU8& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0 ||
      img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3)
    throw DataError("encode_png: inconsistent image buffer");

  // Raw scanlines with filter byte 0 (None) for byte determinism.
  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  std::vector<unsigned char> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(&raw[y * (stride + 1) + 1], &img.rgb[y * stride], stride);
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw DataError("encode_png: deflate failed");
  comp.resize(comp_len);

  std::vector<unsigned char> out;
  out.insert(out.end(), kPngSignature, kPngSignature + 8);

  unsigned char ihdr[13];
  ihdr[0] = static_cast<unsigned char>(img.width >> 24);
  ihdr[1] = static_cast<unsigned char>(img.width >> 16);
  ihdr[2] = static_cast<unsigned char>(img.width >> 8);
  ihdr[3] = static_cast<unsigned char>(img.width);
  ihdr[4] = static_cast<unsigned char>(img.height >> 24);
  ihdr[5] = static_cast<unsigned char>(img.height >> 16);
  ihdr[6] = static_cast<unsigned char>(img.height >> 8);
  ihdr[7] = static_cast<unsigned char>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: truecolor
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter method
  ihdr[12] = 0;  // no interlace
  write_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  write_chunk(out, "IDAT", comp.data(), comp.size());
  write_chunk(out, "IEND", nullptr, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("encode_png: cannot open " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("encode_png: write failed for " + path);
}

ImageU8 decode_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("decode_png: cannot open " + path);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (data.size() < 8 || std::memcmp(data.data(), kPngSignature, 8) != 0)
    throw DataError("decode_png: not a png: " + path);

  int width = 0, height = 0;
  std::vector<unsigned char> idat;
  std::size_t pos = 8;
  while (pos + 8 <= data.size()) {
    const std::uint32_t len = read_u32(&data[pos]);
    if (pos + 12 + len > data.size())
      throw DataError("decode_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&data[pos + 4]);
    const unsigned char* payload = &data[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(read_u32(payload));
      height = static_cast<int>(read_u32(payload + 4));
      if (payload[8] != 8 || payload[9] != 2 || payload[12] != 0)
        throw DataError("decode_png: unsupported format (need RGB8, no interlace)");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (width <= 0 || height <= 0 || idat.empty())
    throw DataError("decode_png: missing IHDR/IDAT");

  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  std::vector<unsigned char> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw DataError("decode_png: inflate failed");

  ImageU8 img;
  img.width = width;
  img.height = height;
  img.rgb.assign(stride * height, 0);
  std::vector<unsigned char> prev(stride, 0);
  for (int y = 0; y < height; ++y) {
    const unsigned char filter = raw[y * (stride + 1)];
    const unsigned char* src = &raw[y * (stride + 1) + 1];
    unsigned char* dst = &img.rgb[y * stride];
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= 3 ? dst[x - 3] : 0;            // left
      const int b = prev[x];                            // up
      const int c = x >= 3 ? prev[x - 3] : 0;           // up-left
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw DataError("decode_png: bad filter type");
      }
      dst[x] = static_cast<unsigned char>(v & 0xFF);
    }
    std::memcpy(prev.data(), dst, stride);
  }
  return img;
}

}  // namespace alt::raster
