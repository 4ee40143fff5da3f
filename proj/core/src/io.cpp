#include "ulfemi/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace ulfemi {

namespace fs = std::filesystem;

namespace {

void put_le64(std::ostream &os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  }
  os.write(buf, 8);
}

double get_le64(char const *p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

} // namespace

void write_kspace(std::ostream &os, KSpaceMatrix const &k, KSpaceHeader header) {
  k.validate();
  header.n_read = static_cast<int>(k.n_read());
  header.n_phase = static_cast<int>(k.n_phase());
  header.dwell = k.dwell;
  if (header.channel.empty()) header.channel = k.channel;
  nlohmann::ordered_json j;
  j["format_version"] = header.format_version;
  j["dims"] = {header.n_read, header.n_phase};
  j["dwell"] = header.dwell;
  j["channel"] = header.channel;
  j["seed"] = header.seed;
  j["config_hash"] = header.config_hash;
  j["payload_bytes"] = 16ULL * static_cast<unsigned long long>(k.data.size());
  os << j.dump() << '\n';
  for (Eigen::Index r = 0; r < k.n_phase(); ++r) {
    for (Eigen::Index c = 0; c < k.n_read(); ++c) {
      put_le64(os, k.data(r, c).real());
      put_le64(os, k.data(r, c).imag());
    }
  }
  if (!os) {
    throw InvalidInputError("failed writing k-space data");
  }
}

void write_kspace(fs::path const &path, KSpaceMatrix const &k, KSpaceHeader header) {
  std::ostringstream buf;
  write_kspace(buf, k, std::move(header));
  write_text_file(path, buf.str());
}

KSpaceMatrix read_kspace(std::istream &is, KSpaceHeader *header) {
  std::string line;
  if (!std::getline(is, line)) {
    throw InvalidInputError("k-space file has no header");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (nlohmann::json::exception const &e) {
    throw InvalidInputError(fmt::format("k-space header is not valid JSON: {}", e.what()));
  }
  KSpaceHeader h;
  try {
    h.format_version = j.at("format_version").get<int>();
    h.n_read = j.at("dims").at(0).get<int>();
    h.n_phase = j.at("dims").at(1).get<int>();
    h.dwell = j.at("dwell").get<double>();
    h.channel = j.at("channel").get<std::string>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.config_hash = j.value("config_hash", std::string{});
  } catch (nlohmann::json::exception const &e) {
    throw InvalidInputError(fmt::format("k-space header is incomplete: {}", e.what()));
  }
  if (h.format_version != kKSpaceFormatVersion) {
    throw InvalidInputError(fmt::format("unsupported k-space format version {}", h.format_version));
  }
  if (h.n_read <= 0 || h.n_phase <= 0) {
    throw InvalidInputError("k-space header dims must be positive");
  }
  std::size_t const bytes = 16U * static_cast<std::size_t>(h.n_read) * static_cast<std::size_t>(h.n_phase);
  if (j.contains("payload_bytes") && j["payload_bytes"].get<std::size_t>() != bytes) {
    throw InvalidInputError("k-space header payload size disagrees with its dims");
  }
  std::vector<char> payload(bytes);
  is.read(payload.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(is.gcount()) != bytes) {
    throw InvalidInputError(fmt::format("k-space payload truncated: expected {} bytes, got {}", bytes, is.gcount()));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw InvalidInputError("k-space payload longer than its header declares");
  }
  KSpaceMatrix k{CMatrix(h.n_phase, h.n_read), h.dwell, h.channel};
  char const *p = payload.data();
  for (Eigen::Index r = 0; r < k.n_phase(); ++r) {
    for (Eigen::Index c = 0; c < k.n_read(); ++c) {
      k.data(r, c) = cx(get_le64(p), get_le64(p + 8));
      p += 16;
    }
  }
  if (header) *header = h;
  return k;
}

KSpaceMatrix read_kspace(fs::path const &path, KSpaceHeader *header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw MissingInputsError(fmt::format("cannot open k-space file {}", path.string()));
  }
  return read_kspace(is, header);
}

void write_pgm(std::ostream &os, RMatrix const &magnitude, double scale_max) {
  double const top = scale_max > 0.0 ? scale_max : magnitude.size() ? magnitude.maxCoeff() : 0.0;
  os << "P5\n" << magnitude.cols() << ' ' << magnitude.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < magnitude.rows(); ++r) {
    for (Eigen::Index c = 0; c < magnitude.cols(); ++c) {
      double const v = top > 0.0 ? std::clamp(magnitude(r, c) / top, 0.0, 1.0) : 0.0;
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  }
}

void write_pgm(fs::path const &path, RMatrix const &magnitude, double scale_max) {
  std::ostringstream buf;
  write_pgm(buf, magnitude, scale_max);
  write_text_file(path, buf.str());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream &is) {
  std::string tok;
  char ch = 0;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(is, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

int pgm_int(std::istream &is) {
  std::string const t = pgm_token(is);
  try {
    std::size_t used = 0;
    int const v = std::stoi(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (std::exception const &) {
    throw InvalidInputError(fmt::format("malformed PGM header token '{}'", t));
  }
}

} // namespace

RMatrix read_pgm(std::istream &is) {
  std::string const magic = pgm_token(is);
  if (magic != "P5" && magic != "P2") {
    throw InvalidInputError(fmt::format("not a PGM file (magic '{}')", magic));
  }
  int const w = pgm_int(is);
  int const h = pgm_int(is);
  int const maxval = pgm_int(is);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw InvalidInputError("PGM dimensions or maxval out of range");
  }
  RMatrix img(h, w);
  if (magic == "P2") {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) img(r, c) = pgm_int(is);
    }
    return img;
  }
  int const bpp = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * bpp);
  is.read(reinterpret_cast<char *>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw InvalidInputError("PGM pixel data truncated");
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::size_t const i = (static_cast<std::size_t>(r) * w + c) * bpp;
      img(r, c) = bpp == 1 ? raw[i] : (raw[i] << 8 | raw[i + 1]);  // 16-bit PGM is big-endian
    }
  }
  return img;
}

void write_complex_csv(std::ostream &os, CMatrix const &m) {
  os << "row,col,re,im\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      os << fmt::format("{},{},{:.17g},{:.17g}\n", r, c, m(r, c).real(), m(r, c).imag());
    }
  }
}

RMatrix read_csv_grid(std::istream &is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (std::exception const &) {
        throw InvalidInputError(fmt::format("CSV row {} has a non-numeric cell '{}'", rows.size(), cell));
      }
    }
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw InvalidInputError(fmt::format("CSV row {} has {} cells, expected {}", rows.size(), vals.size(),
                                          rows.front().size()));
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) {
    throw InvalidInputError("CSV grid is empty");
  }
  RMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Phantom load_phantom(fs::path const &path, double pixel_spacing) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw MissingInputsError(fmt::format("cannot open phantom {}", path.string()));
  }
  Phantom p;
  p.pixel_spacing = pixel_spacing;
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  p.image = ext == ".csv" ? read_csv_grid(is) : read_pgm(is);
  p.validate();
  return p;
}

void write_text_file(fs::path const &path, std::string const &content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw InvalidInputError(fmt::format("cannot write {}", path.string()));
    }
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) {
      throw InvalidInputError(fmt::format("failed writing {}", path.string()));
    }
  }
  fs::rename(tmp, path);
}

std::string read_text_file(fs::path const &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw MissingInputsError(fmt::format("cannot open {}", path.string()));
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

} // namespace ulfemi
