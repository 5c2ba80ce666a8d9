#pragma once

// Portable container of named double arrays.
//
// Layout (all integers little-endian):
//   8 bytes   magic "CFARRAY1"
//   u32       array count
//   per array:
//     u32     name length, then the UTF-8 name bytes
//     u64     rows, u64 cols
//     f64     rows*cols values, row-major
//
// Plain-text companions (manifests, sidecars) are JSON; tables are CSV.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "crossfusor/errors.hpp"

namespace crossfusor::io {

static_assert(std::endian::native == std::endian::little, "array container assumes a little-endian host");

using NamedArrays = std::map<std::string, Eigen::MatrixXd>;
using Json = nlohmann::json;

inline constexpr char kArrayMagic[8] = {'C', 'F', 'A', 'R', 'R', 'A', 'Y', '1'};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(static_cast<bool>(in), ErrorKind::data, "truncated array container: " + path);
  return value;
}

}  // namespace detail

inline void ensure_parent_dir(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  require(!ec, ErrorKind::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
}

inline void write_arrays(const std::filesystem::path& path, const NamedArrays& arrays) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open for writing: " + path.string());
  out.write(kArrayMagic, sizeof(kArrayMagic));
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, m] : arrays) {
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) detail::write_pod<double>(out, m(i, j));
    }
  }
  out.flush();
  require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

inline NamedArrays read_arrays(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::missing_input, "cannot open array container: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(static_cast<bool>(in) && std::memcmp(magic, kArrayMagic, sizeof(magic)) == 0, ErrorKind::data,
          "not an array container: " + path.string());
  const std::string p = path.string();
  const auto count = detail::read_pod<std::uint32_t>(in, p);
  NamedArrays arrays;
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto name_len = detail::read_pod<std::uint32_t>(in, p);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = detail::read_pod<std::uint64_t>(in, p);
    const auto cols = detail::read_pod<std::uint64_t>(in, p);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = detail::read_pod<double>(in, p);
    }
    arrays.emplace(std::move(name), std::move(m));
  }
  return arrays;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::missing_input, "cannot open JSON file: " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Minimal CSV writer: header once, then rows of numbers or strings.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
    ensure_parent_dir(path);
    out_.open(path, std::ios::trunc);
    require(static_cast<bool>(out_), ErrorKind::io, "cannot open for writing: " + path.string());
    out_ << std::setprecision(17);
    write_row(header);
  }

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    require(static_cast<bool>(out_), ErrorKind::io, "write failed: " + path_.string());
  }

  static std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace crossfusor::io
