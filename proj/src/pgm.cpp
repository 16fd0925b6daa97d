#include "ctct/pgm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ctct/error.hpp"

namespace ctct {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok += static_cast<char>(c);
  }
  return tok;
}

int parse_int(const std::string& tok, const std::string& path) {
  try {
    size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::UnsupportedFormat, path + ": bad header token '" + tok + "'");
  }
}

}  // namespace

Image load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5')
    throw Error(ErrorKind::UnsupportedFormat, path + ": not a binary PGM (P5)");
  int w = parse_int(next_token(in), path);
  int h = parse_int(next_token(in), path);
  int maxval = parse_int(next_token(in), path);
  if (w < 1 || h < 1) throw Error(ErrorKind::UnsupportedFormat, path + ": bad dimensions");
  if (maxval != 255)
    throw Error(ErrorKind::UnsupportedFormat, path + ": maxval " + std::to_string(maxval) +
                                                  " unsupported (need 255)");
  // header tokenizer consumed the single whitespace byte before the payload
  Image img(h, w);
  std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size())
    throw Error(ErrorKind::TruncatedFile, path + ": payload shorter than header promises");
  for (size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / 255.f;
  return img;
}

void save_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.pixels.size());
  for (size_t i = 0; i < buf.size(); ++i) {
    float v = std::min(1.f, std::max(0.f, img.pixels[i]));
    buf[i] = static_cast<unsigned char>(std::lround(v * 255.f));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path);
}

}  // namespace ctct
