#include "rtk/image.hpp"

#include "rtk/error.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

namespace rtk {

Frame Frame::filled(int width, int height, int channels, std::uint8_t value) {
  Frame f;
  f.width = width;
  f.height = height;
  f.channels = channels;
  if (width > 0 && height > 0 && channels > 0) {
    f.data.assign(f.pixel_count() * static_cast<std::size_t>(channels), value);
  }
  f.validate();
  return f;
}

void Frame::validate() const {
  if (width <= 0 || height <= 0) {
    throw InputError("frame dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    throw InputError("frame must have 1 or 3 channels, got " + std::to_string(channels));
  }
  if (data.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw InputError("frame buffer size does not match its dimensions");
  }
}

namespace {

class NetpbmReader {
 public:
  explicit NetpbmReader(std::string bytes) : bytes_(std::move(bytes)) {}

  int next_int(const std::string& what) {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw InputError("netpbm: expected " + what);
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 24) {
        throw InputError("netpbm: " + what + " too large");
      }
    }
    return static_cast<int>(v);
  }

  // Binary payloads start after exactly one whitespace byte.
  const char* payload(std::size_t size) {
    ++pos_;
    if (pos_ + size > bytes_.size()) {
      throw InputError("netpbm: truncated pixel data");
    }
    return bytes_.data() + pos_;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
          ++pos_;
        }
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string bytes_;
  std::size_t pos_ = 2;
};

Frame read_netpbm(std::string bytes) {
  const char kind = bytes[1];
  const bool ascii = kind == '2' || kind == '3';
  const int channels = (kind == '3' || kind == '6') ? 3 : 1;
  NetpbmReader in(std::move(bytes));
  Frame f;
  f.width = in.next_int("width");
  f.height = in.next_int("height");
  f.channels = channels;
  const int maxval = in.next_int("maxval");
  if (maxval <= 0 || maxval > 255) {
    throw InputError("netpbm: only 8-bit images are supported (maxval " + std::to_string(maxval) + ")");
  }
  if (f.width <= 0 || f.height <= 0) {
    throw InputError("netpbm: empty image");
  }
  const std::size_t n = f.pixel_count() * static_cast<std::size_t>(channels);
  f.data.resize(n);
  if (ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = in.next_int("pixel value");
      if (v > maxval) {
        throw InputError("netpbm: pixel value exceeds maxval");
      }
      f.data[i] = static_cast<std::uint8_t>(v);
    }
  } else {
    const char* src = in.payload(n);
    std::copy(src, src + n, reinterpret_cast<char*>(f.data.data()));
  }
  return f;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw InputError("cannot open " + path.string());
  }
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

// libpng reports errors through longjmp, so no C++ object with a destructor
// may live in these frames between setjmp and the jump.
bool png_read_rows(std::FILE* file, std::string* err, Frame* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    *err = "out of memory";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int color = png_get_color_type(png, info);
  out->width = static_cast<int>(png_get_image_width(png, info));
  out->height = static_cast<int>(png_get_image_height(png, info));
  out->channels = (color & PNG_COLOR_MASK_COLOR) ? 3 : 1;
  const std::size_t stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(out->width) * static_cast<std::size_t>(out->channels)) {
    png_destroy_read_struct(&png, &info, nullptr);
    *err = "unsupported pixel layout";
    return false;
  }
  out->data.resize(stride * static_cast<std::size_t>(out->height));
  for (int y = 0; y < out->height; ++y) {
    png_read_row(png, out->data.data() + stride * static_cast<std::size_t>(y), nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool png_write_rows(std::FILE* file, std::string* err, const Frame* frame) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_fail, png_warn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    *err = "out of memory";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame->width), static_cast<png_uint_32>(frame->height), 8,
               frame->channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(frame->width) * static_cast<std::size_t>(frame->channels);
  for (int y = 0; y < frame->height; ++y) {
    png_write_row(png, frame->data.data() + stride * static_cast<std::size_t>(y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

} // namespace

Frame read_frame(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] >= '2' && bytes[1] <= '6' && bytes[1] != '4') {
    Frame f = read_netpbm(std::move(bytes));
    f.validate();
    return f;
  }
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw InputError(path.string() + ": not a PGM/PPM or PNG image");
  }
  bytes.clear();
  FilePtr file = open_file(path, "rb");
  std::string err;
  Frame f;
  if (!png_read_rows(file.get(), &err, &f)) {
    throw InputError(path.string() + ": " + err);
  }
  f.validate();
  return f;
}

void write_netpbm(const Frame& frame, const std::filesystem::path& path) {
  frame.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << (frame.channels == 3 ? "P6" : "P5") << '\n' << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.data.data()), static_cast<std::streamsize>(frame.data.size()));
}

void write_png(const Frame& frame, const std::filesystem::path& path) {
  frame.validate();
  FilePtr file = open_file(path, "wb");
  std::string err;
  if (!png_write_rows(file.get(), &err, &frame)) {
    throw InputError(path.string() + ": " + err);
  }
}

} // namespace rtk
