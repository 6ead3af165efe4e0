#pragma once

#include <filesystem>

#include "gdp/image.hpp"

namespace gdp {

/// Reads an 8-bit gray/RGB PNG (values v/255) or a raw-float GDPF file.
/// The format is detected from the file contents, not the extension.
ImageTensor load_image(const std::filesystem::path& path);

/// Writes PNG when the extension is .png (clamped to [0,1], rounded to the
/// nearest 8-bit code), otherwise the raw-float GDPF format.
void save_image(const std::filesystem::path& path, const ImageTensor& img);

/// GDPF: ASCII header "GDPF <C> <H> <W>\n" then C*H*W little-endian float32,
/// channel-major.
ImageTensor load_raw_float(const std::filesystem::path& path);
void save_raw_float(const std::filesystem::path& path, const ImageTensor& img);

ImageTensor load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const ImageTensor& img);

}  // namespace gdp
