#include "stagecost/fsio.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stagecost/errors.hpp"

namespace stagecost {

std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + what + ": " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + what + ": " + path);
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes,
                       const std::string& what) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + what + ": " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw IoError("short write for " + what + ": " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    throw IoError("cannot move " + what + " into place: " + target.string() + ": " +
                  ec.message());
  }
}

}  // namespace stagecost
