#include "unimask/io/files.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "unimask/error.hpp"

namespace unimask::io {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." +
                       std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw DataError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move output into '" + path.string() + "': " + ec.message());
  }
}

StagedDirectory::StagedDirectory(fs::path target) : target_(std::move(target)) {
  static std::atomic<unsigned> counter{0};
  const fs::path parent = target_.has_parent_path() ? target_.parent_path() : fs::path(".");
  staging_ = parent / ("." + target_.filename().string() + ".staging." +
                       std::to_string(::getpid()) + "." + std::to_string(counter++));
  std::error_code ec;
  fs::create_directories(staging_, ec);
  if (ec) throw DataError("cannot create '" + staging_.string() + "': " + ec.message());
}

StagedDirectory::~StagedDirectory() {
  if (published_) return;
  std::error_code ec;
  fs::remove_all(staging_, ec);
}

void StagedDirectory::publish() {
  std::error_code ec;
  if (!fs::exists(target_)) {
    fs::rename(staging_, target_, ec);
    if (ec) throw DataError("cannot move output into '" + target_.string() + "': " + ec.message());
    published_ = true;
    return;
  }
  for (const auto& e : fs::recursive_directory_iterator(staging_)) {
    const fs::path dest = target_ / fs::relative(e.path(), staging_);
    if (e.is_directory()) {
      fs::create_directories(dest, ec);
    } else {
      fs::rename(e.path(), dest, ec);
    }
    if (ec) throw DataError("cannot move output into '" + dest.string() + "': " + ec.message());
  }
  fs::remove_all(staging_, ec);
  published_ = true;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace unimask::io
