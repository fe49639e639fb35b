#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "semsplit/splitting.hpp"

namespace semsplit {

enum class BackendKind { memory, directory };

std::string backend_name(BackendKind kind);
BackendKind backend_from_name(const std::string& name);

// Single-byte entry marker left in place of a deleted entry so that the
// offsets of all later entries stay valid.
inline constexpr char kTombstoneByte = '\x7f';
inline const std::string kTombstoneEntry(1, kTombstoneByte);

// Payloads are UTF-8 with entries separated by LF. An empty payload has
// zero entries.
std::vector<std::string> payload_entries(const std::string& payload);
std::string join_entries(const std::vector<std::string>& entries);

struct SearchHit {
  std::string handle;
  std::size_t offset = 0;
};

// One independent storage location. It sees only handles and payload
// bytes: no document ids, user ids, or chunk ids ever reach it. All
// mutations on a location are serialized; distinct locations are fully
// independent.
class Location {
 public:
  Location(std::string location_id, BackendKind backend,
           std::filesystem::path directory, std::uint64_t handle_seed);

  Location(const Location&) = delete;
  Location& operator=(const Location&) = delete;

  const std::string& location_id() const { return location_id_; }
  BackendKind backend() const { return backend_; }
  const std::filesystem::path& directory() const { return directory_; }

  // Stores a payload under a fresh random 128-bit hex handle.
  std::string store(const std::string& payload);
  std::string fetch(const std::string& handle) const;
  bool contains(const std::string& handle) const;
  // Removes a whole item (used when rolling back a failed outsourcing).
  void remove(const std::string& handle);

  // Reports every (handle, entry offset) whose entry contains the
  // needle's word sequence contiguously; the match runs here, on the
  // location's own bytes.
  std::vector<SearchHit> search(const std::string& needle) const;

  void delete_entry(const std::string& handle, std::size_t offset);
  void replace_entry(const std::string& handle, std::size_t offset,
                     const std::string& text);
  // Appends an entry and returns its offset.
  std::size_t append_entry(const std::string& handle, const std::string& text);
  void overwrite(const std::string& handle, const std::string& payload);

  std::size_t item_count() const;
  std::vector<std::string> handles() const;  // sorted
  // Every byte this location holds (handles and payloads), in sorted
  // handle order; used by the no-leak scan.
  std::string serialized_state() const;

 private:
  std::string read_item(const std::string& handle) const;
  void write_item(const std::string& handle, const std::string& payload);
  std::vector<std::string> sorted_handles() const;
  std::string fresh_handle();

  std::string location_id_;
  BackendKind backend_;
  std::filesystem::path directory_;
  std::map<std::string, std::string> items_;  // memory backend only
  std::mt19937_64 rng_;
  mutable std::mutex mutex_;
};

// A provisioned multi-cloud: independent locations with disjoint state.
class LocationPool {
 public:
  LocationPool() = default;
  LocationPool(LocationPool&&) = default;
  LocationPool& operator=(LocationPool&&) = default;

  // Creates pool_size empty locations with ids loc-0000, loc-0001, ...
  // The directory backend creates one subdirectory of root per location.
  static LocationPool provision(std::size_t pool_size, BackendKind backend,
                                const std::filesystem::path& root = {},
                                std::optional<std::uint64_t> seed = std::nullopt);

  // Manifest format: JSON array of {location_id, backend, path}.
  static LocationPool from_manifest(const std::filesystem::path& manifest_path);
  void save_manifest(const std::filesystem::path& manifest_path) const;

  std::size_t size() const { return locations_.size(); }
  bool empty() const { return locations_.empty(); }
  bool has(const std::string& location_id) const;
  Location& at(const std::string& location_id);
  const Location& at(const std::string& location_id) const;
  Location& by_index(std::size_t index) { return locations_.at(index); }
  std::vector<std::string> location_ids() const;  // sorted
  std::deque<Location>& locations() { return locations_; }
  const std::deque<Location>& locations() const { return locations_; }

 private:
  void add_location(std::string location_id, BackendKind backend,
                    std::filesystem::path directory, std::uint64_t seed);

  std::deque<Location> locations_;
  std::map<std::string, Location*> by_id_;
};

// The location with the fewest stored items among those not in `exclude`,
// ties broken by location_id. Throws PoolExhausted when none is eligible.
std::string least_loaded_location(const LocationPool& pool,
                                  const std::set<std::string>& exclude);

// Chooses storage locations for one document's plan. Touched chunks that
// already have a location keep it; each unplaced chunk (ascending
// chunk_id) gets the least-loaded location not yet used by this document,
// ties broken by location_id; one further distinct location is chosen the
// same way for the sanitized document and returned. The document's chunk
// locations plus the returned location are pairwise distinct. Throws
// PoolExhausted when the pool has fewer than |touched_chunks| + 1
// locations.
std::string assign_locations(const std::set<std::uint64_t>& touched_chunks,
                             ChunkSet& chunks, LocationPool& pool);

}  // namespace semsplit
