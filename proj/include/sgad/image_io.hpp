#pragma once

// PNG (libpng) and binary PPM/PGM (P6/P5, 8-bit) image files.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sgad/image.hpp"

namespace sgad {

namespace detail {

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (char& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return e;
}

}  // namespace detail

// libpng's simplified API: no setjmp/longjmp across C++ frames.
inline void write_png(const Image& img, const std::filesystem::path& path) {
  SGAD_REQUIRE(img.channels == 1 || img.channels == 3, InvalidArgument,
               "write_png: channels must be 1 or 3");
  std::vector<std::uint8_t> bytes(img.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = detail::to_byte(img.data[i]);
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  desc.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&desc, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw IoError("png write failed: " + path.string() + ": " + msg);
  }
}

inline Image read_png(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("cannot open: " + path.string());
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.string().c_str())) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw IoError("not a readable PNG file: " + path.string() + ": " + msg);
  }
  const bool color = (desc.format & PNG_FORMAT_FLAG_COLOR) != 0;
  desc.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img(static_cast<int>(desc.height), static_cast<int>(desc.width), color ? 3 : 1);
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw IoError("corrupt PNG: " + path.string() + ": " + msg);
  }
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = bytes[i] / 255.0f;
  return img;
}

// Binary PPM (P6) for RGB, PGM (P5) for single channel.
inline void write_ppm(const Image& img, const std::filesystem::path& path) {
  SGAD_REQUIRE(img.channels == 1 || img.channels == 3, InvalidArgument,
               "write_ppm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  std::vector<char> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) bytes[i] = static_cast<char>(detail::to_byte(img.data[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P6" && magic != "P5") throw IoError("not a binary PPM/PGM file: " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("corrupt PPM header: " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported PPM header: " + path.string());
  const int ch = magic == "P6" ? 3 : 1;
  Image img(h, w, ch);
  std::vector<unsigned char> bytes(img.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw IoError("truncated PPM: " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0f;
  return img;
}

inline bool is_image_file(const std::filesystem::path& p) {
  const std::string e = detail::lower_ext(p);
  return e == ".png" || e == ".ppm" || e == ".pgm";
}

inline Image read_image(const std::filesystem::path& path) {
  const std::string e = detail::lower_ext(path);
  if (e == ".png") return read_png(path);
  if (e == ".ppm" || e == ".pgm") return read_ppm(path);
  throw IoError("unsupported image extension: " + path.string());
}

inline void write_image(const Image& img, const std::filesystem::path& path) {
  const std::string e = detail::lower_ext(path);
  if (e == ".png") return write_png(img, path);
  if (e == ".ppm" || e == ".pgm") return write_ppm(img, path);
  throw IoError("unsupported image extension: " + path.string());
}

}  // namespace sgad
