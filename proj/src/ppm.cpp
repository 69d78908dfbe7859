#include "tetrad/ppm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "tetrad/errors.hpp"

namespace tetrad::ppm {

namespace {

class HeaderReader {
public:
  HeaderReader(const std::vector<char>& data, const std::string& name) : data_(data), name_(name) {}

  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number() {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
      value = value * 10 + (data_[pos_] - '0');
      if (value > 1'000'000) fail("header value too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail("expected a number in header");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_]))) {
      fail("missing whitespace before raster");
    }
    return pos_ + 1;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(name_ + ": " + what);
  }

private:
  const std::vector<char>& data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

Image read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + path.string());

  HeaderReader header(data, path.string());
  if (data.size() < 2 || data[0] != 'P' || data[1] != '6') header.fail("not a binary PPM (P6)");
  header.advance(2);
  const long width = header.number();
  const long height = header.number();
  const long maxval = header.number();
  if (width <= 0 || height <= 0) header.fail("non-positive dimensions");
  if (maxval <= 0 || maxval > 255) header.fail("only 8-bit maxval is supported");

  const std::size_t start = header.raster_start();
  Image image(static_cast<int>(width), static_cast<int>(height));
  if (data.size() - start < image.pixels.size()) header.fail("truncated raster");
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(start), image.pixels.size(),
              image.pixels.begin());
  return image;
}

void write(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace tetrad::ppm
