#include "gdp/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gdp {

namespace {

std::runtime_error io_error(const std::filesystem::path& p, const std::string& msg) {
  return std::runtime_error(p.string() + ": " + msg);
}

bool has_prefix(const std::filesystem::path& path, const char* magic, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open file");
  std::array<char, 8> buf{};
  in.read(buf.data(), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n && std::memcmp(buf.data(), magic, n) == 0;
}

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

ImageTensor load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw io_error(path, std::string("unreadable PNG: ") + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw io_error(path, "unsupported bit depth");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw io_error(path, "PNG decode failed: " + msg);
  }
  ImageTensor out({channels, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        out.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0f;
      }
    }
  }
  return out;
}

void save_png(const std::filesystem::path& path, const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw io_error(path, "PNG output needs 1 or 3 channels");
  }
  const int ch = img.channels();
  std::vector<std::uint8_t> buf(img.size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < ch; ++c) {
        buf[(static_cast<std::size_t>(y) * img.width() + x) * ch + c] = to_byte(img.at(c, y, x));
      }
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw io_error(path, std::string("PNG write failed: ") + image.message);
  }
}

ImageTensor load_raw_float(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open file");
  std::string header;
  if (!std::getline(in, header)) throw io_error(path, "missing GDPF header");
  std::istringstream hs(header);
  std::string magic;
  Shape s;
  if (!(hs >> magic >> s.channels >> s.height >> s.width) || magic != "GDPF") {
    throw io_error(path, "malformed GDPF header");
  }
  require_valid(s, "load_raw_float");
  std::vector<float> data(s.size());
  for (auto& v : data) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw io_error(path, "truncated GDPF data");
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    v = std::bit_cast<float>(bits);
  }
  return ImageTensor(s, std::move(data));
}

void save_raw_float(const std::filesystem::path& path, const ImageTensor& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(path, "cannot open for writing");
  out << "GDPF " << img.channels() << ' ' << img.height() << ' ' << img.width() << '\n';
  for (float v : img.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    const std::array<char, 4> b{static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                static_cast<char>((bits >> 16) & 0xff),
                                static_cast<char>((bits >> 24) & 0xff)};
    out.write(b.data(), 4);
  }
  if (!out) throw io_error(path, "write failed");
}

ImageTensor load_image(const std::filesystem::path& path) {
  static constexpr char kPngMagic[] = "\x89PNG";
  if (has_prefix(path, kPngMagic, 4)) return load_png(path);
  if (has_prefix(path, "GDPF", 4)) return load_raw_float(path);
  throw io_error(path, "unrecognized image format");
}

void save_image(const std::filesystem::path& path, const ImageTensor& img) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    save_png(path, img);
  } else {
    save_raw_float(path, img);
  }
}

}  // namespace gdp
