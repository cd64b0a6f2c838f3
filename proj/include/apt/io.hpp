#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "apt/error.hpp"

namespace apt {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path + "'");
  return std::move(buf).str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), std::streamsize(content.size()));
  out.flush();
  if (!out) throw IoError("write failed on '" + path + "'");
}

}  // namespace apt
