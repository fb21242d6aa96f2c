#include "jif/backing.h"

#include <algorithm>
#include <cstring>
#include <filesystem>

namespace jif {

void ReadBackingPage(const Bytes &file, uint64_t offset,
                     std::span<std::byte> out) {
  size_t avail = 0;
  if (offset < file.size())
    avail = std::min<uint64_t>(out.size(), file.size() - offset);
  if (avail) std::memcpy(out.data(), file.data() + offset, avail);
  std::fill(out.begin() + avail, out.end(), std::byte{0});
}

void MemoryBackingStore::Add(std::string path, Bytes contents) {
  files_[std::move(path)] = std::move(contents);
}

const Bytes *MemoryBackingStore::Find(std::string_view path) const {
  auto it = files_.find(path);
  return it == files_.end() ? nullptr : &it->second;
}

const Bytes *DirectoryBackingStore::Find(std::string_view path) const {
  std::scoped_lock lock(mu_);
  if (auto it = cache_.find(path); it != cache_.end()) return it->second.get();

  std::filesystem::path full(root_);
  std::string_view rel = path;
  while (!rel.empty() && rel.front() == '/') rel.remove_prefix(1);
  full /= std::string(rel);

  std::unique_ptr<Bytes> contents;
  if (std::filesystem::is_regular_file(full)) {
    Status<Bytes> f = ReadFile(full.string());
    if (f) contents = std::make_unique<Bytes>(std::move(*f));
  }
  const Bytes *ret = contents.get();
  cache_.emplace(std::string(path), std::move(contents));
  return ret;
}

}  // namespace jif
