#include <png.h>

#include <csetjmp>
#include <cstdio>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cxr/error.hpp"
#include "cxr/image.hpp"

namespace cxr {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("unreadable: cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int maxval_for(int depth) {
  if (depth != 8 && depth != 16) fail_usage("bit depth must be 8 or 16");
  return depth == 8 ? 255 : 65535;
}

std::uint32_t quantize(double v, int maxval) {
  return static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
}

// Reads one whitespace-delimited header token, skipping '#' comments.
class PgmHeader {
 public:
  explicit PgmHeader(std::span<const std::uint8_t> b) : bytes_(b) {}

  long next_int() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail_data("unreadable: bad PGM header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1L << 30)) fail_data("unreadable: PGM header value too large");
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail_data("unreadable: bad PGM header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

struct MemoryReader {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes->size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, r->bytes->data() + r->pos, n);
  r->pos += n;
}

// Classic libpng API: samples are read verbatim, with no gamma handling.
GrayImage decode_png(const std::vector<std::uint8_t>& bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) fail_data("unreadable: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail_data("unreadable: libpng init failed");
  }
  MemoryReader reader{&bytes, 0};
  std::vector<std::vector<std::uint8_t>> rows;
  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  // longjmp lands in this frame; rows stays owned by its vector.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail_data("unreadable: corrupt or truncated PNG");
  }
  png_set_read_fn(png, &reader, read_from_memory);
  png_read_info(png, info);
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if ((color_type & PNG_COLOR_MASK_COLOR) != 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail_data("unsupported format: color PNG");
  }
  if (w == 0 || h == 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail_data("zero-dimension image");
  }
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if ((color_type & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  rows.assign(h, std::vector<std::uint8_t>(rowbytes));
  std::vector<png_bytep> row_ptrs(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = rows[y].data();
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int depth = bit_depth == 16 ? 16 : 8;
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (png_uint_32 y = 0; y < h; ++y) {
    const std::uint8_t* r = rows[y].data();
    for (png_uint_32 x = 0; x < w; ++x) {
      const unsigned v = depth == 16 ? (static_cast<unsigned>(r[2 * x]) << 8 | r[2 * x + 1]) : r[x];
      data[static_cast<std::size_t>(y) * w + x] = v / maxval;
    }
  }
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(data), depth);
}

// Classic API writer so 16-bit samples are stored verbatim (big-endian).
void write_png(const GrayImage& img, const std::filesystem::path& path, int depth) {
  const int maxval = maxval_for(depth);
  const int w = img.width();
  const int h = img.height();
  const std::size_t bps = static_cast<std::size_t>(depth / 8);
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(w) * h * bps);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::uint32_t q = quantize(img.pixels()[i], maxval);
    if (depth == 16) {
      raster[2 * i] = static_cast<std::uint8_t>(q >> 8);
      raster[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    } else {
      raster[i] = static_cast<std::uint8_t>(q);
    }
  }
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) fail_data("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail_data("cannot write " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, raster.data() + static_cast<std::size_t>(y) * w * bps);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

std::vector<std::uint8_t> encode_pgm(const GrayImage& img, int depth) {
  const int maxval = maxval_for(depth);
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size() * (depth / 8));
  for (double v : img.pixels()) {
    const std::uint32_t q = quantize(v, maxval);
    if (depth == 16) out.push_back(static_cast<std::uint8_t>(q >> 8));
    out.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  return out;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail_data("unsupported format");
  PgmHeader hdr(bytes);
  const long w = hdr.next_int();
  const long h = hdr.next_int();
  const long maxval = hdr.next_int();
  if (w == 0 || h == 0) fail_data("zero-dimension image");
  if (maxval != 255 && maxval != 65535) fail_data("unsupported format: PGM maxval " + std::to_string(maxval));
  const std::size_t start = hdr.raster_start();
  const int bps = maxval == 255 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - start < n * bps) fail_data("unreadable: truncated PGM raster");

  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = bytes.data() + start + i * bps;
    const unsigned v = bps == 1 ? p[0] : (static_cast<unsigned>(p[0]) << 8 | p[1]);
    data[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(data), bps * 8);
}

GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngSig), std::end(kPngSig), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  if (bytes.empty()) fail_data("unreadable: empty file " + path.string());
  fail_data("unsupported format: " + path.string());
}

void save_image(const GrayImage& img, const std::filesystem::path& path, int depth) {
  if (img.empty()) fail_data("cannot save an empty image");
  if (path.extension() == ".png") {
    write_png(img, path, depth);
    return;
  }
  const auto bytes = encode_pgm(img, depth);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_data("cannot write " + path.string());
}

}  // namespace cxr
