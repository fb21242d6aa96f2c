// backing.h - providers of backing-file contents (shared libraries, runtime
// images) that file-backed VMAs map.

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>

#include "jif/common.h"

namespace jif {

class BackingStore {
 public:
  virtual ~BackingStore() = default;

  // Full contents of the file at `path`, or nullptr when it is unavailable.
  // The returned buffer stays valid for the lifetime of the store.
  virtual const Bytes *Find(std::string_view path) const = 0;
};

// Copies `len` bytes at `offset` of file into out, zero-filling past EOF.
void ReadBackingPage(const Bytes &file, uint64_t offset,
                     std::span<std::byte> out);

class MemoryBackingStore : public BackingStore {
 public:
  void Add(std::string path, Bytes contents);
  const Bytes *Find(std::string_view path) const override;

 private:
  std::map<std::string, Bytes, std::less<>> files_;
};

// Resolves absolute paths under a root directory, e.g. /usr/lib/libc.so.6
// -> <root>/usr/lib/libc.so.6. Files are loaded on first use and cached.
class DirectoryBackingStore : public BackingStore {
 public:
  explicit DirectoryBackingStore(std::string root) : root_(std::move(root)) {}
  const Bytes *Find(std::string_view path) const override;

 private:
  std::string root_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::unique_ptr<Bytes>, std::less<>> cache_;
};

}  // namespace jif
