//
// Sparse performance database: on-disk format, writer, and random-access
// reader.
//
// A database is a directory of three little-endian files:
//
//   meta.bin    magic "HPAN", u32 version; metric descriptors, profile
//               descriptors, and the global calling context tree, each as a
//               u32 count followed by fixed-layout entries. Strings are a
//               u16 byte length followed by UTF-8 bytes.
//   profile.db  magic "HPPR", u32 version, u32 profile count, index entries
//               {u32 profile_id, u64 offset, u64 record_count}, then packed
//               14-byte record bodies {u32 ctx_id, u16 metric_id, f64 value}
//               sorted by (ctx_id, metric_id) within each profile.
//   trace.db    magic "HPTR", u32 version, u32 trace count, index entries
//               {u32 profile_id, u64 offset, u64 event_count, u64 t_begin_ns,
//               u64 t_end_ns}, then packed 12-byte events
//               {u64 timestamp_ns, u32 ctx_id} with non-decreasing timestamps.
//
// Opening a database memory-maps profile.db and trace.db and parses only the
// headers and index blocks; record and event bodies are decoded lazily
// through binary search. The handle counts bytes read at open and records
// decoded afterwards so access locality is testable.
//
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace perfslice::store {

enum class metric_scope : uint8_t { inclusive = 0, exclusive = 1 };
enum class ctx_kind : uint8_t {
  function = 0,
  loop = 1,
  line = 2,
  gpu_kernel = 3,
  gpu_context = 4,
};

constexpr uint32_t k_no_parent = 0xFFFFFFFFu;
constexpr uint32_t k_summary_profile = 0;

struct metric_desc {
  uint32_t id = 0;
  metric_scope scope = metric_scope::inclusive;
  std::string name;
  std::string unit = "s";
};

struct profile_desc {
  uint32_t id = 0;
  int32_t rank = -1;
  int32_t thread = 0;
  std::string hostname;
  uint64_t posix_node_id = 0;
};

struct cct_node {
  uint32_t id = 0;
  uint32_t parent = k_no_parent;
  ctx_kind kind = ctx_kind::function;
  std::string name;
};

struct profile_record {
  uint32_t ctx_id = 0;
  uint16_t metric_id = 0;
  double value = 0.0;

  friend bool operator==(const profile_record&, const profile_record&) = default;
};

struct trace_event {
  uint64_t timestamp_ns = 0;
  uint32_t ctx_id = 0;

  friend bool operator==(const trace_event&, const trace_event&) = default;
};

struct meta_data {
  std::vector<metric_desc> metrics;    // dense ids 0..n-1
  std::vector<profile_desc> profiles;  // sorted by id
  std::vector<cct_node> contexts;      // dense ids 0..n-1, parent < id

  std::optional<uint16_t> find_metric(std::string_view name,
                                      metric_scope scope) const;
  const profile_desc* find_profile(uint32_t profile_id) const;
  uint32_t root_ctx() const { return 0; }
  // Chain of ctx ids from the root down to ctx (inclusive).
  std::vector<uint32_t> ancestor_chain(uint32_t ctx) const;
  // Adjacency list indexed by ctx id.
  std::vector<std::vector<uint32_t>> children() const;
};

struct trace_data {
  uint32_t profile_id = 0;
  std::vector<trace_event> events;
  uint64_t t_end_ns = 0;

  friend bool operator==(const trace_data&, const trace_data&) = default;
};

// Fully materialized logical content of a database. `records[i]` belongs to
// `meta.profiles[i]`.
struct database_image {
  meta_data meta;
  std::vector<std::vector<profile_record>> records;
  std::vector<trace_data> traces;  // sorted by profile_id
};

// Throws invalid_image when any type invariant fails, io_error on failed
// writes. Re-opening the written directory yields identical logical content.
void write_database(const database_image& image,
                    const std::filesystem::path& dir);

struct profile_index_entry {
  uint32_t profile_id = 0;
  uint64_t offset = 0;
  uint64_t record_count = 0;
};

struct trace_index_entry {
  uint32_t profile_id = 0;
  uint64_t offset = 0;
  uint64_t event_count = 0;
  uint64_t t_begin_ns = 0;
  uint64_t t_end_ns = 0;
};

// "all ids" or an explicit ascending id set.
struct id_filter {
  bool all = true;
  std::vector<uint32_t> ids;

  static id_filter all_ids() { return {}; }
  static id_filter of(std::vector<uint32_t> v);
  bool contains(uint32_t id) const;
};

struct metric_filter {
  bool all = true;
  std::vector<uint16_t> ids;

  static metric_filter all_ids() { return {}; }
  static metric_filter of(std::vector<uint16_t> v);
  bool contains(uint16_t id) const;
};

struct read_counters {
  uint64_t open_bytes = 0;        // bytes consumed while opening
  uint64_t record_probes = 0;     // records decoded during search/scan
  uint64_t records_returned = 0;  // records materialized for callers
  uint64_t event_probes = 0;
  uint64_t events_returned = 0;
};

class mapped_file {
 public:
  mapped_file() = default;
  explicit mapped_file(const std::filesystem::path& path);
  ~mapped_file();
  mapped_file(mapped_file&& other) noexcept;
  mapped_file& operator=(mapped_file&& other) noexcept;
  mapped_file(const mapped_file&) = delete;
  mapped_file& operator=(const mapped_file&) = delete;

  const std::byte* data() const { return data_; }
  uint64_t size() const { return size_; }

 private:
  const std::byte* data_ = nullptr;
  uint64_t size_ = 0;
};

class db_handle {
 public:
  // Reads meta.bin and the two index blocks; bodies stay on disk behind the
  // mapping. Throws format_error on bad magic/version or truncated indices.
  static db_handle open(const std::filesystem::path& dir);

  const std::filesystem::path& path() const { return dir_; }
  const meta_data& meta() const { return meta_; }
  const std::vector<profile_index_entry>& profile_index() const {
    return profile_index_;
  }
  const std::vector<trace_index_entry>& trace_index() const {
    return trace_index_;
  }
  const profile_index_entry* find_profile_entry(uint32_t profile_id) const;
  const trace_index_entry* find_trace_entry(uint32_t profile_id) const;

  // Exactly the records matching both filters, in (ctx_id, metric_id) order.
  // Explicit ctx filters are answered with one binary search per requested
  // id; the all-ids filter scans the body once.
  std::vector<profile_record> read_profile_records(
      uint32_t profile_id, const id_filter& ctxs,
      const metric_filter& metrics) const;

  struct trace_window {
    std::vector<trace_event> events;           // t0 <= timestamp < t1
    std::optional<trace_event> carry_in;       // last event strictly before t0
  };
  trace_window read_trace_window(uint32_t profile_id, uint64_t t0_ns,
                                 uint64_t t1_ns) const;
  // Whole trace plus its indexed end timestamp.
  std::pair<std::vector<trace_event>, uint64_t> read_trace_full(
      uint32_t profile_id) const;

  read_counters counters() const;
  void reset_counters() const;

  // Raw byte position of a record/event within its file, for tools that
  // need to patch databases (fault-injection tests).
  uint64_t record_file_offset(const profile_index_entry& e, uint64_t i) const;
  uint64_t event_file_offset(const trace_index_entry& e, uint64_t i) const;

  profile_record decode_record(const profile_index_entry& e, uint64_t i) const;
  trace_event decode_event(const trace_index_entry& e, uint64_t i) const;

 private:
  db_handle() = default;

  std::filesystem::path dir_;
  meta_data meta_;
  mapped_file profile_map_;
  mapped_file trace_map_;
  std::vector<profile_index_entry> profile_index_;
  std::vector<trace_index_entry> trace_index_;

  struct counter_block {
    std::atomic<uint64_t> open_bytes{0};
    std::atomic<uint64_t> record_probes{0};
    std::atomic<uint64_t> records_returned{0};
    std::atomic<uint64_t> event_probes{0};
    std::atomic<uint64_t> events_returned{0};
  };
  std::unique_ptr<counter_block> counters_ =
      std::make_unique<counter_block>();
};

struct validation_issue {
  std::string location;  // e.g. "profile 7 record 12"
  std::string message;

  friend bool operator==(const validation_issue&,
                         const validation_issue&) = default;
};

struct validation_report {
  std::vector<validation_issue> issues;
  bool ok() const { return issues.empty(); }
};

// Walks every record and event, reporting each invariant violation with its
// location. Empty report iff the database is valid.
validation_report validate_database(const db_handle& h);

// Reads everything back into an image (summary included). Test/tool helper.
database_image read_image(const db_handle& h);

constexpr uint64_t k_record_size = 14;  // u32 + u16 + f64
constexpr uint64_t k_event_size = 12;   // u64 + u32

}  // namespace perfslice::store
