#pragma once

// Directory corpora: <root>/<class>/<file>. A file named <group>__<index>.<ext>
// is a fragment of file group <group>; any other file is its own group.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "json.hpp"

#include "ctxsteer/compressors.hpp"
#include "ctxsteer/distances.hpp"
#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix_io.hpp"

namespace ctxsteer {

enum class Encoding { raw, hex, automatic };

inline Encoding parse_encoding(std::string_view s) {
  if (s == "raw") return Encoding::raw;
  if (s == "hex") return Encoding::hex;
  if (s == "auto") return Encoding::automatic;
  fail(Errc::invalid_input, "unknown encoding '" + std::string(s) + "'");
}

struct IngestOptions {
  Encoding encoding = Encoding::automatic;
  bool for_rlz = false;                      // automatic: hex-encode non-text payloads
  std::vector<std::string> classes;          // empty = all class directories
};

struct ManifestEntry {
  std::string path;  // relative to root; also the object id
  std::string label;
  std::string group;
  bool hex = false;
  std::uint32_t crc32 = 0;  // of the raw file bytes
  std::size_t bytes = 0;
};

struct CorpusManifest {
  std::string root;
  std::vector<ManifestEntry> entries;
};

inline std::uint32_t crc32_of(ByteView data) {
  uLong c = crc32(0L, Z_NULL, 0);
  // crc32 takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < data.size()) {
    const auto len = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    c = crc32(c, data.data() + off, len);
    off += len;
  }
  return static_cast<std::uint32_t>(c);
}

/// Text = no NUL bytes and at most 5% bytes outside printable ASCII plus
/// common whitespace. UTF-8 prose stays well under the limit.
inline bool looks_like_text(ByteView data) {
  std::size_t odd = 0;
  for (auto b : data) {
    if (b == 0) return false;
    if (!(b >= 0x20 && b < 0x7f) && b != '\n' && b != '\r' && b != '\t') ++odd;
  }
  return odd * 20 <= data.size();
}

/// File-group id: the part before "__" when the rest is "<digits>[.ext]",
/// else the whole relative path.
inline std::string fragment_group(const std::string& filename, const std::string& fallback) {
  const auto sep = filename.rfind("__");
  if (sep == std::string::npos || sep == 0) return fallback;
  std::string rest = filename.substr(sep + 2);
  const auto dot = rest.find('.');
  const std::string index = dot == std::string::npos ? rest : rest.substr(0, dot);
  if (index.empty() || index.find_first_not_of("0123456789") != std::string::npos) return fallback;
  return filename.substr(0, sep);
}

struct Corpus {
  std::vector<CorpusObject> objects;
  CorpusManifest manifest;
};

inline Corpus ingest(const std::filesystem::path& root, const IngestOptions& options = {}) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), Errc::io_error, "corpus root '" + root.string() + "' is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().front() != '.') class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (!options.classes.empty()) {
    std::vector<fs::path> kept;
    for (const auto& want : options.classes) {
      auto it = std::find_if(class_dirs.begin(), class_dirs.end(), [&](const fs::path& p) { return p.filename() == want; });
      require(it != class_dirs.end(), Errc::empty_class, "class '" + want + "' not found under " + root.string());
      kept.push_back(*it);
    }
    std::sort(kept.begin(), kept.end());
    class_dirs = std::move(kept);
  }
  require(!class_dirs.empty(), Errc::empty_class, "no class directories under " + root.string());

  Corpus out;
  out.manifest.root = root.string();
  for (const auto& dir : class_dirs) {
    const std::string label = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().filename().string().front() != '.') files.push_back(e.path());
    std::sort(files.begin(), files.end());
    require(!files.empty(), Errc::empty_class, "class directory '" + dir.string() + "' is empty");
    for (const auto& file : files) {
      const std::string rel = label + "/" + file.filename().string();
      std::string content;
      try {
        content = read_file(file);
      } catch (const Error&) {
        fail(Errc::io_error, "cannot read " + file.string());
      }
      require(!content.empty(), Errc::invalid_input, "empty file " + file.string());
      Bytes raw = to_bytes(content);
      const bool hex = options.encoding == Encoding::hex ||
                       (options.encoding == Encoding::automatic && options.for_rlz && !looks_like_text(raw));
      ManifestEntry entry{rel, label, fragment_group(file.filename().string(), rel), hex, crc32_of(raw), raw.size()};
      CorpusObject obj = hex ? make_object(rel, label, hex_encode(raw), 16) : make_object(rel, label, std::move(raw));
      obj.group = entry.group;
      out.objects.push_back(std::move(obj));
      out.manifest.entries.push_back(std::move(entry));
    }
  }
  return out;
}

inline nlohmann::json to_json(const CorpusManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"path", e.path},
                       {"label", e.label},
                       {"group", e.group},
                       {"encoding", e.hex ? "hex" : "raw"},
                       {"crc32", e.crc32},
                       {"bytes", e.bytes}});
  return {{"root", m.root}, {"objects", entries}};
}

}  // namespace ctxsteer
