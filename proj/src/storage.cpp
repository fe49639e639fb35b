#include "semsplit/storage.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "semsplit/errors.hpp"
#include "semsplit/text.hpp"

namespace semsplit {

namespace {

using nlohmann::json;

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorCode::io_failure, "error reading " + path.string());
  return buf.str();
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorCode::io_failure, "error writing " + path.string());
}

bool looks_like_handle(const std::string& name) {
  if (name.size() != 32) return false;
  return std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

}  // namespace

std::string backend_name(BackendKind kind) {
  return kind == BackendKind::memory ? "memory" : "directory";
}

BackendKind backend_from_name(const std::string& name) {
  if (name == "memory") return BackendKind::memory;
  if (name == "directory") return BackendKind::directory;
  fail(ErrorCode::config_error, "unknown storage backend: " + name);
}

std::vector<std::string> payload_entries(const std::string& payload) {
  std::vector<std::string> entries;
  if (payload.empty()) return entries;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = payload.find('\n', start);
    if (pos == std::string::npos) {
      entries.push_back(payload.substr(start));
      break;
    }
    entries.push_back(payload.substr(start, pos - start));
    start = pos + 1;
  }
  return entries;
}

std::string join_entries(const std::vector<std::string>& entries) {
  std::string payload;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i) payload += '\n';
    payload += entries[i];
  }
  return payload;
}

Location::Location(std::string location_id, BackendKind backend,
                   std::filesystem::path directory, std::uint64_t handle_seed)
    : location_id_(std::move(location_id)),
      backend_(backend),
      directory_(std::move(directory)),
      rng_(handle_seed) {
  if (backend_ == BackendKind::directory) {
    if (directory_.empty()) {
      fail(ErrorCode::config_error,
           "directory backend requires a path for " + location_id_);
    }
    std::error_code ec;
    std::filesystem::create_directories(directory_, ec);
    if (ec) {
      fail(ErrorCode::io_failure,
           "cannot create " + directory_.string() + ": " + ec.message());
    }
  }
}

std::string Location::fresh_handle() {
  while (true) {
    static const char* hex = "0123456789abcdef";
    std::uint64_t hi = rng_();
    std::uint64_t lo = rng_();
    std::string handle(32, '0');
    for (int i = 0; i < 16; ++i) {
      handle[i] = hex[(hi >> (60 - 4 * i)) & 0xf];
      handle[16 + i] = hex[(lo >> (60 - 4 * i)) & 0xf];
    }
    bool taken = backend_ == BackendKind::memory
                     ? items_.count(handle) > 0
                     : std::filesystem::exists(directory_ / handle);
    if (!taken) return handle;
  }
}

std::string Location::read_item(const std::string& handle) const {
  if (backend_ == BackendKind::memory) {
    auto it = items_.find(handle);
    if (it == items_.end()) {
      fail(ErrorCode::unknown_handle,
           location_id_ + " has no item " + handle);
    }
    return it->second;
  }
  std::filesystem::path path = directory_ / handle;
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::unknown_handle, location_id_ + " has no item " + handle);
  }
  return read_file_bytes(path);
}

void Location::write_item(const std::string& handle,
                          const std::string& payload) {
  if (backend_ == BackendKind::memory) {
    items_[handle] = payload;
  } else {
    write_file_bytes(directory_ / handle, payload);
  }
}

std::vector<std::string> Location::sorted_handles() const {
  std::vector<std::string> result;
  if (backend_ == BackendKind::memory) {
    for (const auto& [handle, payload] : items_) result.push_back(handle);
    return result;  // map iteration is already sorted
  }
  std::error_code ec;
  for (const auto& entry :
       std::filesystem::directory_iterator(directory_, ec)) {
    if (entry.is_regular_file() &&
        looks_like_handle(entry.path().filename().string())) {
      result.push_back(entry.path().filename().string());
    }
  }
  if (ec) {
    fail(ErrorCode::io_failure,
         "cannot list " + directory_.string() + ": " + ec.message());
  }
  std::sort(result.begin(), result.end());
  return result;
}

std::string Location::store(const std::string& payload) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::string handle = fresh_handle();
  write_item(handle, payload);
  return handle;
}

std::string Location::fetch(const std::string& handle) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return read_item(handle);
}

bool Location::contains(const std::string& handle) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (backend_ == BackendKind::memory) return items_.count(handle) > 0;
  return std::filesystem::exists(directory_ / handle);
}

void Location::remove(const std::string& handle) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (backend_ == BackendKind::memory) {
    if (items_.erase(handle) == 0) {
      fail(ErrorCode::unknown_handle, location_id_ + " has no item " + handle);
    }
    return;
  }
  std::filesystem::path path = directory_ / handle;
  std::error_code ec;
  if (!std::filesystem::remove(path, ec) || ec) {
    fail(ErrorCode::unknown_handle, location_id_ + " has no item " + handle);
  }
}

std::vector<SearchHit> Location::search(const std::string& needle) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<SearchHit> hits;
  std::vector<std::string> needle_words = normalize_words(needle);
  if (needle_words.empty()) return hits;
  for (const std::string& handle : sorted_handles()) {
    std::string payload = read_item(handle);
    std::vector<std::string> entries = payload_entries(payload);
    for (std::size_t offset = 0; offset < entries.size(); ++offset) {
      std::vector<std::string> words;
      try {
        words = normalize_words(entries[offset]);
      } catch (const Error&) {
        continue;  // non-UTF-8 entry cannot match a normalized needle
      }
      if (word_sequence_contains(words, needle_words)) {
        hits.push_back({handle, offset});
      }
    }
  }
  return hits;
}

void Location::delete_entry(const std::string& handle, std::size_t offset) {
  replace_entry(handle, offset, kTombstoneEntry);
}

void Location::replace_entry(const std::string& handle, std::size_t offset,
                             const std::string& text) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::string> entries = payload_entries(read_item(handle));
  if (offset >= entries.size()) {
    fail(ErrorCode::offset_out_of_range,
         "offset " + std::to_string(offset) + " out of range for item with " +
             std::to_string(entries.size()) + " entries");
  }
  entries[offset] = text;
  write_item(handle, join_entries(entries));
}

std::size_t Location::append_entry(const std::string& handle,
                                   const std::string& text) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::string> entries = payload_entries(read_item(handle));
  entries.push_back(text);
  write_item(handle, join_entries(entries));
  return entries.size() - 1;
}

void Location::overwrite(const std::string& handle,
                         const std::string& payload) {
  std::lock_guard<std::mutex> lock(mutex_);
  read_item(handle);  // existence check
  write_item(handle, payload);
}

std::size_t Location::item_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (backend_ == BackendKind::memory) return items_.size();
  return sorted_handles().size();
}

std::vector<std::string> Location::handles() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return sorted_handles();
}

std::string Location::serialized_state() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::string state;
  for (const std::string& handle : sorted_handles()) {
    state += handle;
    state += '\n';
    state += read_item(handle);
    state += '\n';
  }
  return state;
}

void LocationPool::add_location(std::string location_id, BackendKind backend,
                                std::filesystem::path directory,
                                std::uint64_t seed) {
  if (by_id_.count(location_id)) {
    fail(ErrorCode::config_error, "duplicate location id: " + location_id);
  }
  locations_.emplace_back(location_id, backend, std::move(directory), seed);
  by_id_[locations_.back().location_id()] = &locations_.back();
}

LocationPool LocationPool::provision(std::size_t pool_size,
                                     BackendKind backend,
                                     const std::filesystem::path& root,
                                     std::optional<std::uint64_t> seed) {
  if (pool_size < 1) fail(ErrorCode::config_error, "pool size must be >= 1");
  if (backend == BackendKind::directory && root.empty()) {
    fail(ErrorCode::config_error, "directory backend requires a root path");
  }
  LocationPool pool;
  std::random_device rd;
  for (std::size_t i = 0; i < pool_size; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "loc-%04zu", i);
    std::filesystem::path dir;
    if (backend == BackendKind::directory) dir = root / name;
    std::uint64_t location_seed =
        seed ? *seed + i
             : (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    pool.add_location(name, backend, dir, location_seed);
  }
  return pool;
}

LocationPool LocationPool::from_manifest(
    const std::filesystem::path& manifest_path) {
  std::string bytes = read_file_bytes(manifest_path);
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error,
         "bad pool manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!doc.is_array() || doc.empty()) {
    fail(ErrorCode::parse_error,
         "pool manifest must be a non-empty JSON array");
  }
  LocationPool pool;
  std::random_device rd;
  for (const json& entry : doc) {
    if (!entry.is_object() || !entry.contains("location_id") ||
        !entry.contains("backend") || !entry.contains("path")) {
      fail(ErrorCode::parse_error,
           "manifest entries need location_id, backend, path");
    }
    BackendKind backend = backend_from_name(entry["backend"].get<std::string>());
    std::filesystem::path dir = entry["path"].get<std::string>();
    if (backend == BackendKind::directory && dir.is_relative()) {
      dir = manifest_path.parent_path() / dir;
    }
    std::uint64_t location_seed =
        (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    pool.add_location(entry["location_id"].get<std::string>(), backend, dir,
                      location_seed);
  }
  return pool;
}

void LocationPool::save_manifest(
    const std::filesystem::path& manifest_path) const {
  // Directory paths are stored relative to the manifest so the whole state
  // tree can be relocated; from_manifest resolves them the same way.
  std::filesystem::path base = manifest_path.parent_path();
  json doc = json::array();
  for (const Location& loc : locations_) {
    std::filesystem::path dir = loc.directory();
    if (loc.backend() == BackendKind::directory && !base.empty()) {
      std::error_code ec;
      std::filesystem::path rel = std::filesystem::relative(dir, base, ec);
      if (!ec && !rel.empty()) dir = rel;
    }
    doc.push_back({{"location_id", loc.location_id()},
                   {"backend", backend_name(loc.backend())},
                   {"path", dir.string()}});
  }
  write_file_bytes(manifest_path, doc.dump(2) + "\n");
}

bool LocationPool::has(const std::string& location_id) const {
  return by_id_.count(location_id) > 0;
}

Location& LocationPool::at(const std::string& location_id) {
  auto it = by_id_.find(location_id);
  if (it == by_id_.end()) {
    fail(ErrorCode::config_error, "unknown location: " + location_id);
  }
  return *it->second;
}

const Location& LocationPool::at(const std::string& location_id) const {
  auto it = by_id_.find(location_id);
  if (it == by_id_.end()) {
    fail(ErrorCode::config_error, "unknown location: " + location_id);
  }
  return *it->second;
}

std::vector<std::string> LocationPool::location_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, loc] : by_id_) ids.push_back(id);
  return ids;
}

std::string least_loaded_location(const LocationPool& pool,
                                  const std::set<std::string>& exclude) {
  const Location* best = nullptr;
  std::size_t best_load = 0;
  for (const Location& loc : pool.locations()) {
    if (exclude.count(loc.location_id())) continue;
    std::size_t load = loc.item_count();
    if (!best || load < best_load ||
        (load == best_load && loc.location_id() < best->location_id())) {
      best = &loc;
      best_load = load;
    }
  }
  if (!best) {
    fail(ErrorCode::pool_exhausted,
         "no eligible location left for this document");
  }
  return best->location_id();
}

std::string assign_locations(const std::set<std::uint64_t>& touched_chunks,
                             ChunkSet& chunks, LocationPool& pool) {
  if (pool.empty()) fail(ErrorCode::config_error, "empty location pool");
  if (touched_chunks.size() + 1 > pool.size()) {
    fail(ErrorCode::pool_exhausted,
         "document needs " + std::to_string(touched_chunks.size() + 1) +
             " distinct locations but the pool has " +
             std::to_string(pool.size()));
  }

  std::set<std::string> used;
  std::vector<std::uint64_t> unplaced;
  for (std::uint64_t chunk_id : touched_chunks) {
    Chunk* chunk = chunks.find(chunk_id);
    if (!chunk) {
      fail(ErrorCode::internal_error,
           "plan references unknown chunk " + std::to_string(chunk_id));
    }
    if (chunk->location_id) {
      if (!used.insert(*chunk->location_id).second) {
        fail(ErrorCode::internal_error,
             "two chunks of one document share location " +
                 *chunk->location_id);
      }
    } else {
      unplaced.push_back(chunk_id);
    }
  }

  for (std::uint64_t chunk_id : unplaced) {
    std::string chosen = least_loaded_location(pool, used);
    chunks.find(chunk_id)->location_id = chosen;
    used.insert(chosen);
  }
  return least_loaded_location(pool, used);
}

}  // namespace semsplit
