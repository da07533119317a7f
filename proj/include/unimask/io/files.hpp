#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace unimask::io {

// Writes to a sibling temp file and renames it over `path`, so readers never
// see a partial file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// A scratch directory next to `target`. publish() moves its contents into
// `target` (a single rename when `target` does not exist yet); otherwise the
// destructor removes it.
class StagedDirectory {
 public:
  explicit StagedDirectory(std::filesystem::path target);
  ~StagedDirectory();
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  const std::filesystem::path& path() const { return staging_; }
  void publish();

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
  bool published_ = false;
};

// Whole file as bytes; throws DataError when it cannot be read.
std::string read_file(const std::filesystem::path& path);

}  // namespace unimask::io
