#include "groupcdl/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <cctype>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace groupcdl {
namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw IoError(std::string("libpng: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image: " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian order for uint16 reads
  png_read_update_info(png, info);

  const int rows = static_cast<int>(png_get_image_height(png, info));
  const int cols = static_cast<int>(png_get_image_width(png, info));
  const int channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  if (channels != 1 && channels != 3) throw IoError("unsupported PNG channel count: " + path.string());

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buf(rowbytes * rows);
  std::vector<png_bytep> ptrs(rows);
  for (int r = 0; r < rows; ++r) ptrs[r] = buf.data() + r * rowbytes;
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);

  Image img(channels, rows, cols);
  const double scale = 1.0 / ((1 << depth) - 1);
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t idx = static_cast<std::size_t>(k) * channels + c;
        double v;
        if (depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, ptrs[r] + 2 * idx, 2);
          v = s;
        } else {
          v = ptrs[r][idx];
        }
        img(c, r, k) = v * scale;
      }
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img, int depth) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write image: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, fp.get());
  const int channels = img.channels();
  png_set_IHDR(png, info, img.cols(), img.rows(), depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);

  const double maxval = (1 << depth) - 1;
  const std::size_t rowbytes = static_cast<std::size_t>(img.cols()) * channels * (depth / 8);
  std::vector<png_byte> row(rowbytes);
  for (int r = 0; r < img.rows(); ++r) {
    for (int k = 0; k < img.cols(); ++k) {
      for (int c = 0; c < channels; ++c) {
        const auto q = static_cast<std::uint16_t>(std::lround(std::clamp(img(c, r, k), 0.0, 1.0) * maxval));
        const std::size_t idx = static_cast<std::size_t>(k) * channels + c;
        if (depth == 16) {
          std::memcpy(row.data() + 2 * idx, &q, 2);
        } else {
          row[idx] = static_cast<png_byte>(q);
        }
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

// Skips whitespace and '#' comments in a PNM header, then reads an integer.
int pnm_header_int(std::istream& in) {
  int ch;
  while ((ch = in.peek()) != EOF) {
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  if (!in) throw IoError("malformed PNM header");
  return value;
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw IoError("not a binary PGM/PPM file: " + path.string());
  }
  const int channels = magic[1] == '5' ? 1 : 3;
  const int cols = pnm_header_int(in);
  const int rows = pnm_header_int(in);
  const int maxval = pnm_header_int(in);
  if (cols <= 0 || rows <= 0 || maxval <= 0 || maxval > 65535) throw IoError("bad PNM header: " + path.string());
  in.get();  // single whitespace before raster

  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols * channels * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError("truncated PNM raster: " + path.string());

  Image img(channels, rows, cols);
  const double scale = 1.0 / maxval;
  std::size_t idx = 0;
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      for (int c = 0; c < channels; ++c, ++idx) {
        const unsigned v = bytes == 2 ? (raw[2 * idx] << 8) | raw[2 * idx + 1] : raw[idx];
        img(c, r, k) = v * scale;
      }
    }
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img, int depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path.string());
  const int maxval = (1 << depth) - 1;
  out << (img.channels() == 1 ? "P5" : "P6") << '\n' << img.cols() << ' ' << img.rows() << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(img.size() * (depth / 8));
  for (int r = 0; r < img.rows(); ++r) {
    for (int k = 0; k < img.cols(); ++k) {
      for (int c = 0; c < img.channels(); ++c) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(img(c, r, k), 0.0, 1.0) * maxval));
        if (depth == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
        raw.push_back(static_cast<unsigned char>(q & 0xff));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing image: " + path.string());
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw IoError("unsupported image extension: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("bit depth must be 8 or 16");
  if (img.channels() != 1 && img.channels() != 3) throw GeometryError("only 1- or 3-channel images can be written");
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    write_png(path, img, bit_depth);
  } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    if ((ext == ".pgm") != (img.channels() == 1) && ext != ".pnm") {
      throw GeometryError("channel count does not match " + ext);
    }
    write_pnm(path, img, bit_depth);
  } else {
    throw IoError("unsupported image extension: " + path.string());
  }
}

}  // namespace groupcdl
