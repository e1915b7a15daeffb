#include "rmat/bin_io.hpp"

#include <fstream>

namespace rmat {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> buf(static_cast<std::size_t>(size));
  if (size > 0) in.read(buf.data(), size);
  if (!in) throw ValidationError("failed reading file: " + path);
  return buf;
}

void write_file(const std::string& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open file for writing: " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ValidationError("failed writing file: " + path);
}

}  // namespace rmat
