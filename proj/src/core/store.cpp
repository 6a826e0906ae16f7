#include "store.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_set>

namespace perfslice::store {

namespace {

constexpr char k_meta_magic[4] = {'H', 'P', 'A', 'N'};
constexpr char k_profile_magic[4] = {'H', 'P', 'P', 'R'};
constexpr char k_trace_magic[4] = {'H', 'P', 'T', 'R'};
constexpr uint32_t k_version = 1;

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void put_u16(std::string& out, uint16_t v) { put_bytes(out, &v, 2); }
void put_u32(std::string& out, uint32_t v) { put_bytes(out, &v, 4); }
void put_i32(std::string& out, int32_t v) { put_bytes(out, &v, 4); }
void put_u64(std::string& out, uint64_t v) { put_bytes(out, &v, 8); }
void put_f64(std::string& out, double v) { put_bytes(out, &v, 8); }
void put_u8(std::string& out, uint8_t v) { put_bytes(out, &v, 1); }

void put_str(std::string& out, const std::string& s) {
  if (s.size() > 0xFFFF)
    raise(errc::invalid_image, "string longer than 65535 bytes: " + s.substr(0, 32));
  put_u16(out, static_cast<uint16_t>(s.size()));
  out.append(s);
}

// Bounds-checked cursor over a byte buffer; all multi-byte reads are
// little-endian (memcpy on a little-endian host).
struct cursor {
  const std::byte* p;
  uint64_t size;
  uint64_t pos = 0;
  const char* what;

  void need(uint64_t n) const {
    if (pos + n > size)
      raise(errc::format_error,
            std::string(what) + " truncated at byte " + std::to_string(pos));
  }
  uint8_t u8() {
    need(1);
    uint8_t v;
    std::memcpy(&v, p + pos, 1);
    pos += 1;
    return v;
  }
  uint16_t u16() {
    need(2);
    uint16_t v;
    std::memcpy(&v, p + pos, 2);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, p + pos, 4);
    pos += 4;
    return v;
  }
  int32_t i32() {
    need(4);
    int32_t v;
    std::memcpy(&v, p + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, p + pos, 8);
    pos += 8;
    return v;
  }
  std::string str() {
    uint16_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(p + pos), n);
    pos += n;
    return s;
  }
  void magic(const char expect[4]) {
    need(4);
    if (std::memcmp(p + pos, expect, 4) != 0)
      raise(errc::format_error, std::string(what) + ": bad magic");
    pos += 4;
  }
  void version() {
    uint32_t v = u32();
    if (v != k_version)
      raise(errc::format_error, std::string(what) + ": unsupported version " +
                                    std::to_string(v));
  }
};

uint32_t load_u32(const std::byte* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
uint16_t load_u16(const std::byte* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}
uint64_t load_u64(const std::byte* p) {
  uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}
double load_f64(const std::byte* p) {
  double v;
  std::memcpy(&v, p, 8);
  return v;
}

void check_meta(const meta_data& meta, std::vector<validation_issue>& out) {
  auto issue = [&](std::string loc, std::string msg) {
    out.push_back({std::move(loc), std::move(msg)});
  };

  std::set<std::pair<std::string, metric_scope>> metric_keys;
  for (size_t i = 0; i < meta.metrics.size(); ++i) {
    const auto& m = meta.metrics[i];
    if (m.id != i)
      issue("metric " + std::to_string(i),
            "metric ids must be dense from 0, found " + std::to_string(m.id));
    if (!metric_keys.insert({m.name, m.scope}).second)
      issue("metric " + std::to_string(i),
            "duplicate (name, scope): " + m.name);
  }

  uint32_t prev_profile = 0;
  for (size_t i = 0; i < meta.profiles.size(); ++i) {
    const auto& pd = meta.profiles[i];
    if (i > 0 && pd.id <= prev_profile)
      issue("profile " + std::to_string(pd.id),
            "profile ids must be strictly increasing");
    prev_profile = pd.id;
    if (pd.id == k_summary_profile && pd.rank != -1)
      issue("profile 0", "summary profile must carry rank -1");
    if (pd.id != k_summary_profile && pd.hostname.empty())
      issue("profile " + std::to_string(pd.id), "empty hostname");
  }

  for (size_t i = 0; i < meta.contexts.size(); ++i) {
    const auto& n = meta.contexts[i];
    if (n.id != i)
      issue("ctx " + std::to_string(i),
            "ctx ids must be dense from 0, found " + std::to_string(n.id));
    if (i == 0) {
      if (n.parent != k_no_parent) issue("ctx 0", "root must have no parent");
    } else {
      if (n.parent == k_no_parent)
        issue("ctx " + std::to_string(i), "multiple roots");
      else if (n.parent >= n.id)
        issue("ctx " + std::to_string(i),
              "parent id must be smaller than ctx id (topological order)");
    }
    if (static_cast<uint8_t>(n.kind) > 4)
      issue("ctx " + std::to_string(i), "unknown ctx kind");
  }
  if (meta.contexts.empty()) issue("meta", "calling context tree is empty");
}

void check_records(uint32_t profile_id, const std::vector<profile_record>& recs,
                   const meta_data& meta, std::vector<validation_issue>& out) {
  for (size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    std::string loc =
        "profile " + std::to_string(profile_id) + " record " + std::to_string(i);
    if (i > 0) {
      const auto& prev = recs[i - 1];
      if (std::pair(prev.ctx_id, prev.metric_id) >=
          std::pair(r.ctx_id, r.metric_id))
        out.push_back({loc, "records not strictly sorted by (ctx_id, metric_id)"});
    }
    if (r.ctx_id >= meta.contexts.size())
      out.push_back({loc, "ctx_id " + std::to_string(r.ctx_id) + " not in tree"});
    if (r.metric_id >= meta.metrics.size())
      out.push_back({loc, "unknown metric_id " + std::to_string(r.metric_id)});
    if (!std::isfinite(r.value) || r.value < 0.0)
      out.push_back({loc, "value must be finite and non-negative"});
  }
}

void check_trace(const trace_data& t, const meta_data& meta,
                 std::vector<validation_issue>& out) {
  std::string tloc = "trace " + std::to_string(t.profile_id);
  for (size_t i = 0; i < t.events.size(); ++i) {
    const auto& e = t.events[i];
    std::string loc = tloc + " event " + std::to_string(i);
    if (i > 0 && e.timestamp_ns < t.events[i - 1].timestamp_ns)
      out.push_back({loc, "timestamps must be non-decreasing"});
    if (e.ctx_id >= meta.contexts.size())
      out.push_back({loc, "ctx_id " + std::to_string(e.ctx_id) + " not in tree"});
  }
  if (!t.events.empty() && t.t_end_ns < t.events.back().timestamp_ns)
    out.push_back({tloc, "t_end precedes the last event"});
}

std::vector<validation_issue> check_image(const database_image& image) {
  std::vector<validation_issue> issues;
  check_meta(image.meta, issues);
  if (image.records.size() != image.meta.profiles.size())
    issues.push_back(
        {"image", "records list does not align with profile descriptors"});
  else
    for (size_t i = 0; i < image.records.size(); ++i)
      check_records(image.meta.profiles[i].id, image.records[i], image.meta,
                    issues);
  uint32_t prev = 0;
  for (size_t i = 0; i < image.traces.size(); ++i) {
    const auto& t = image.traces[i];
    if (i > 0 && t.profile_id <= prev)
      issues.push_back({"trace " + std::to_string(t.profile_id),
                        "trace profile ids must be strictly increasing"});
    prev = t.profile_id;
    if (image.meta.find_profile(t.profile_id) == nullptr)
      issues.push_back({"trace " + std::to_string(t.profile_id),
                        "no such profile in meta"});
    check_trace(t, image.meta, issues);
  }
  return issues;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(errc::io_error, "cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(errc::io_error, "write failed: " + path.string());
}

}  // namespace

std::optional<uint16_t> meta_data::find_metric(std::string_view name,
                                               metric_scope scope) const {
  for (const auto& m : metrics)
    if (m.scope == scope && m.name == name)
      return static_cast<uint16_t>(m.id);
  return std::nullopt;
}

const profile_desc* meta_data::find_profile(uint32_t profile_id) const {
  auto it = std::lower_bound(
      profiles.begin(), profiles.end(), profile_id,
      [](const profile_desc& p, uint32_t id) { return p.id < id; });
  if (it == profiles.end() || it->id != profile_id) return nullptr;
  return &*it;
}

std::vector<uint32_t> meta_data::ancestor_chain(uint32_t ctx) const {
  if (ctx >= contexts.size())
    raise(errc::not_found, "ctx " + std::to_string(ctx) + " not in tree");
  std::vector<uint32_t> chain;
  for (uint32_t c = ctx;; c = contexts[c].parent) {
    chain.push_back(c);
    if (contexts[c].parent == k_no_parent) break;
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::vector<std::vector<uint32_t>> meta_data::children() const {
  std::vector<std::vector<uint32_t>> kids(contexts.size());
  for (const auto& n : contexts)
    if (n.parent != k_no_parent) kids[n.parent].push_back(n.id);
  return kids;
}

id_filter id_filter::of(std::vector<uint32_t> v) {
  id_filter f;
  f.all = false;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  f.ids = std::move(v);
  return f;
}

bool id_filter::contains(uint32_t id) const {
  return all || std::binary_search(ids.begin(), ids.end(), id);
}

metric_filter metric_filter::of(std::vector<uint16_t> v) {
  metric_filter f;
  f.all = false;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  f.ids = std::move(v);
  return f;
}

bool metric_filter::contains(uint16_t id) const {
  return all || std::binary_search(ids.begin(), ids.end(), id);
}

void write_database(const database_image& image,
                    const std::filesystem::path& dir) {
  auto issues = check_image(image);
  if (!issues.empty())
    raise(errc::invalid_image,
          issues.front().location + ": " + issues.front().message +
              (issues.size() > 1
                   ? " (+" + std::to_string(issues.size() - 1) + " more)"
                   : ""));

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(errc::io_error, "cannot create " + dir.string());

  std::string meta;
  put_bytes(meta, k_meta_magic, 4);
  put_u32(meta, k_version);
  put_u32(meta, static_cast<uint32_t>(image.meta.metrics.size()));
  for (const auto& m : image.meta.metrics) {
    put_u32(meta, m.id);
    put_u8(meta, static_cast<uint8_t>(m.scope));
    put_str(meta, m.name);
    put_str(meta, m.unit);
  }
  put_u32(meta, static_cast<uint32_t>(image.meta.profiles.size()));
  for (const auto& p : image.meta.profiles) {
    put_u32(meta, p.id);
    put_i32(meta, p.rank);
    put_i32(meta, p.thread);
    put_str(meta, p.hostname);
    put_u64(meta, p.posix_node_id);
  }
  put_u32(meta, static_cast<uint32_t>(image.meta.contexts.size()));
  for (const auto& n : image.meta.contexts) {
    put_u32(meta, n.id);
    put_u32(meta, n.parent);
    put_u8(meta, static_cast<uint8_t>(n.kind));
    put_str(meta, n.name);
  }
  write_file(dir / "meta.bin", meta);

  std::string pdb;
  put_bytes(pdb, k_profile_magic, 4);
  put_u32(pdb, k_version);
  const uint32_t n_profiles = static_cast<uint32_t>(image.meta.profiles.size());
  put_u32(pdb, n_profiles);
  uint64_t offset = 12 + static_cast<uint64_t>(n_profiles) * 20;
  for (size_t i = 0; i < image.records.size(); ++i) {
    put_u32(pdb, image.meta.profiles[i].id);
    put_u64(pdb, offset);
    put_u64(pdb, image.records[i].size());
    offset += image.records[i].size() * k_record_size;
  }
  for (const auto& body : image.records)
    for (const auto& r : body) {
      put_u32(pdb, r.ctx_id);
      put_u16(pdb, r.metric_id);
      put_f64(pdb, r.value);
    }
  write_file(dir / "profile.db", pdb);

  std::string tdb;
  put_bytes(tdb, k_trace_magic, 4);
  put_u32(tdb, k_version);
  const uint32_t n_traces = static_cast<uint32_t>(image.traces.size());
  put_u32(tdb, n_traces);
  offset = 12 + static_cast<uint64_t>(n_traces) * 36;
  for (const auto& t : image.traces) {
    put_u32(tdb, t.profile_id);
    put_u64(tdb, offset);
    put_u64(tdb, t.events.size());
    put_u64(tdb, t.events.empty() ? 0 : t.events.front().timestamp_ns);
    put_u64(tdb, t.t_end_ns);
    offset += t.events.size() * k_event_size;
  }
  for (const auto& t : image.traces)
    for (const auto& e : t.events) {
      put_u64(tdb, e.timestamp_ns);
      put_u32(tdb, e.ctx_id);
    }
  write_file(dir / "trace.db", tdb);
}

mapped_file::mapped_file(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) raise(errc::io_error, "cannot open " + path.string());
  struct stat st{};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    raise(errc::io_error, "cannot stat " + path.string());
  }
  size_ = static_cast<uint64_t>(st.st_size);
  if (size_ > 0) {
    void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      raise(errc::io_error, "mmap failed: " + path.string());
    }
    data_ = static_cast<const std::byte*>(p);
  }
  ::close(fd);
}

mapped_file::~mapped_file() {
  if (data_ != nullptr) ::munmap(const_cast<std::byte*>(data_), size_);
}

mapped_file::mapped_file(mapped_file&& other) noexcept
    : data_(other.data_), size_(other.size_) {
  other.data_ = nullptr;
  other.size_ = 0;
}

mapped_file& mapped_file::operator=(mapped_file&& other) noexcept {
  if (this != &other) {
    if (data_ != nullptr) ::munmap(const_cast<std::byte*>(data_), size_);
    data_ = other.data_;
    size_ = other.size_;
    other.data_ = nullptr;
    other.size_ = 0;
  }
  return *this;
}

db_handle db_handle::open(const std::filesystem::path& dir) {
  db_handle h;
  h.dir_ = dir;

  // meta.bin is small and read in full.
  std::ifstream metaf(dir / "meta.bin", std::ios::binary);
  if (!metaf) raise(errc::io_error, "cannot open " + (dir / "meta.bin").string());
  std::string meta_bytes((std::istreambuf_iterator<char>(metaf)),
                         std::istreambuf_iterator<char>());
  cursor mc{reinterpret_cast<const std::byte*>(meta_bytes.data()),
            meta_bytes.size(), 0, "meta.bin"};
  mc.magic(k_meta_magic);
  mc.version();
  uint32_t n_metrics = mc.u32();
  h.meta_.metrics.reserve(n_metrics);
  for (uint32_t i = 0; i < n_metrics; ++i) {
    metric_desc m;
    m.id = mc.u32();
    uint8_t scope = mc.u8();
    if (scope > 1) raise(errc::format_error, "meta.bin: bad metric scope");
    m.scope = static_cast<metric_scope>(scope);
    m.name = mc.str();
    m.unit = mc.str();
    h.meta_.metrics.push_back(std::move(m));
  }
  uint32_t n_profiles = mc.u32();
  h.meta_.profiles.reserve(n_profiles);
  for (uint32_t i = 0; i < n_profiles; ++i) {
    profile_desc p;
    p.id = mc.u32();
    p.rank = mc.i32();
    p.thread = mc.i32();
    p.hostname = mc.str();
    p.posix_node_id = mc.u64();
    h.meta_.profiles.push_back(std::move(p));
  }
  uint32_t n_ctx = mc.u32();
  h.meta_.contexts.reserve(n_ctx);
  for (uint32_t i = 0; i < n_ctx; ++i) {
    cct_node n;
    n.id = mc.u32();
    n.parent = mc.u32();
    n.kind = static_cast<ctx_kind>(mc.u8());
    n.name = mc.str();
    h.meta_.contexts.push_back(std::move(n));
  }
  h.counters_->open_bytes += meta_bytes.size();

  h.profile_map_ = mapped_file(dir / "profile.db");
  {
    cursor pc{h.profile_map_.data(), h.profile_map_.size(), 0, "profile.db"};
    pc.magic(k_profile_magic);
    pc.version();
    uint32_t count = pc.u32();
    h.profile_index_.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      profile_index_entry e;
      e.profile_id = pc.u32();
      e.offset = pc.u64();
      e.record_count = pc.u64();
      if (e.offset + e.record_count * k_record_size > h.profile_map_.size())
        raise(errc::format_error, "profile.db: body out of bounds for profile " +
                                      std::to_string(e.profile_id));
      if (i > 0 && e.profile_id <= h.profile_index_[i - 1].profile_id)
        raise(errc::format_error, "profile.db: index not sorted by profile id");
      h.profile_index_.push_back(e);
    }
    h.counters_->open_bytes += pc.pos;
  }

  h.trace_map_ = mapped_file(dir / "trace.db");
  {
    cursor tc{h.trace_map_.data(), h.trace_map_.size(), 0, "trace.db"};
    tc.magic(k_trace_magic);
    tc.version();
    uint32_t count = tc.u32();
    h.trace_index_.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      trace_index_entry e;
      e.profile_id = tc.u32();
      e.offset = tc.u64();
      e.event_count = tc.u64();
      e.t_begin_ns = tc.u64();
      e.t_end_ns = tc.u64();
      if (e.offset + e.event_count * k_event_size > h.trace_map_.size())
        raise(errc::format_error, "trace.db: body out of bounds for trace " +
                                      std::to_string(e.profile_id));
      if (e.t_begin_ns > e.t_end_ns)
        raise(errc::format_error, "trace.db: t_begin after t_end for trace " +
                                      std::to_string(e.profile_id));
      if (i > 0 && e.profile_id <= h.trace_index_[i - 1].profile_id)
        raise(errc::format_error, "trace.db: index not sorted by profile id");
      h.trace_index_.push_back(e);
    }
    h.counters_->open_bytes += tc.pos;
  }

  return h;
}

const profile_index_entry* db_handle::find_profile_entry(
    uint32_t profile_id) const {
  auto it = std::lower_bound(
      profile_index_.begin(), profile_index_.end(), profile_id,
      [](const profile_index_entry& e, uint32_t id) { return e.profile_id < id; });
  if (it == profile_index_.end() || it->profile_id != profile_id) return nullptr;
  return &*it;
}

const trace_index_entry* db_handle::find_trace_entry(uint32_t profile_id) const {
  auto it = std::lower_bound(
      trace_index_.begin(), trace_index_.end(), profile_id,
      [](const trace_index_entry& e, uint32_t id) { return e.profile_id < id; });
  if (it == trace_index_.end() || it->profile_id != profile_id) return nullptr;
  return &*it;
}

uint64_t db_handle::record_file_offset(const profile_index_entry& e,
                                       uint64_t i) const {
  return e.offset + i * k_record_size;
}

uint64_t db_handle::event_file_offset(const trace_index_entry& e,
                                      uint64_t i) const {
  return e.offset + i * k_event_size;
}

profile_record db_handle::decode_record(const profile_index_entry& e,
                                        uint64_t i) const {
  const std::byte* p = profile_map_.data() + record_file_offset(e, i);
  profile_record r;
  r.ctx_id = load_u32(p);
  r.metric_id = load_u16(p + 4);
  r.value = load_f64(p + 6);
  return r;
}

trace_event db_handle::decode_event(const trace_index_entry& e,
                                    uint64_t i) const {
  const std::byte* p = trace_map_.data() + event_file_offset(e, i);
  trace_event ev;
  ev.timestamp_ns = load_u64(p);
  ev.ctx_id = load_u32(p + 8);
  return ev;
}

std::vector<profile_record> db_handle::read_profile_records(
    uint32_t profile_id, const id_filter& ctxs,
    const metric_filter& metrics) const {
  const profile_index_entry* e = find_profile_entry(profile_id);
  if (e == nullptr)
    raise(errc::not_found, "profile " + std::to_string(profile_id) +
                               " not in database");

  std::vector<profile_record> out;
  uint64_t probes = 0;
  const uint64_t n = e->record_count;

  if (ctxs.all) {
    out.reserve(metrics.all ? n : n / 2);
    for (uint64_t i = 0; i < n; ++i) {
      profile_record r = decode_record(*e, i);
      ++probes;
      if (metrics.contains(r.metric_id)) out.push_back(r);
    }
  } else {
    uint64_t lo = 0;
    for (uint32_t ctx : ctxs.ids) {
      // Binary search for the first record of this ctx, then scan its run.
      uint64_t l = lo, r = n;
      while (l < r) {
        uint64_t mid = l + (r - l) / 2;
        uint32_t mid_ctx =
            load_u32(profile_map_.data() + record_file_offset(*e, mid));
        ++probes;
        if (mid_ctx < ctx)
          l = mid + 1;
        else
          r = mid;
      }
      uint64_t i = l;
      while (i < n) {
        profile_record rec = decode_record(*e, i);
        ++probes;
        if (rec.ctx_id != ctx) break;
        if (metrics.contains(rec.metric_id)) out.push_back(rec);
        ++i;
      }
      lo = i;
    }
  }

  counters_->record_probes.fetch_add(probes, std::memory_order_relaxed);
  counters_->records_returned.fetch_add(out.size(), std::memory_order_relaxed);
  return out;
}

db_handle::trace_window db_handle::read_trace_window(uint32_t profile_id,
                                                     uint64_t t0_ns,
                                                     uint64_t t1_ns) const {
  if (t0_ns > t1_ns)
    raise(errc::invalid_argument, "trace window start after end");
  const trace_index_entry* e = find_trace_entry(profile_id);
  if (e == nullptr)
    raise(errc::not_found,
          "trace " + std::to_string(profile_id) + " not in database");

  uint64_t probes = 0;
  auto lower_bound_ts = [&](uint64_t t) {
    uint64_t l = 0, r = e->event_count;
    while (l < r) {
      uint64_t mid = l + (r - l) / 2;
      uint64_t ts = load_u64(trace_map_.data() + event_file_offset(*e, mid));
      ++probes;
      if (ts < t)
        l = mid + 1;
      else
        r = mid;
    }
    return l;
  };

  uint64_t i0 = lower_bound_ts(t0_ns);
  uint64_t i1 = lower_bound_ts(t1_ns);

  trace_window w;
  w.events.reserve(i1 - i0);
  for (uint64_t i = i0; i < i1; ++i) {
    w.events.push_back(decode_event(*e, i));
    ++probes;
  }
  if (i0 > 0) {
    w.carry_in = decode_event(*e, i0 - 1);
    ++probes;
  }

  counters_->event_probes.fetch_add(probes, std::memory_order_relaxed);
  counters_->events_returned.fetch_add(w.events.size(),
                                       std::memory_order_relaxed);
  return w;
}

std::pair<std::vector<trace_event>, uint64_t> db_handle::read_trace_full(
    uint32_t profile_id) const {
  const trace_index_entry* e = find_trace_entry(profile_id);
  if (e == nullptr)
    raise(errc::not_found,
          "trace " + std::to_string(profile_id) + " not in database");
  std::vector<trace_event> events;
  events.reserve(e->event_count);
  for (uint64_t i = 0; i < e->event_count; ++i)
    events.push_back(decode_event(*e, i));
  counters_->event_probes.fetch_add(e->event_count, std::memory_order_relaxed);
  counters_->events_returned.fetch_add(e->event_count,
                                       std::memory_order_relaxed);
  return {std::move(events), e->t_end_ns};
}

read_counters db_handle::counters() const {
  read_counters c;
  c.open_bytes = counters_->open_bytes.load(std::memory_order_relaxed);
  c.record_probes = counters_->record_probes.load(std::memory_order_relaxed);
  c.records_returned =
      counters_->records_returned.load(std::memory_order_relaxed);
  c.event_probes = counters_->event_probes.load(std::memory_order_relaxed);
  c.events_returned =
      counters_->events_returned.load(std::memory_order_relaxed);
  return c;
}

void db_handle::reset_counters() const {
  counters_->record_probes.store(0, std::memory_order_relaxed);
  counters_->records_returned.store(0, std::memory_order_relaxed);
  counters_->event_probes.store(0, std::memory_order_relaxed);
  counters_->events_returned.store(0, std::memory_order_relaxed);
}

validation_report validate_database(const db_handle& h) {
  validation_report report;
  check_meta(h.meta(), report.issues);

  for (const auto& e : h.profile_index()) {
    if (h.meta().find_profile(e.profile_id) == nullptr)
      report.issues.push_back({"profile " + std::to_string(e.profile_id),
                               "profile body without meta descriptor"});
    profile_record prev{};
    for (uint64_t i = 0; i < e.record_count; ++i) {
      profile_record r = h.decode_record(e, i);
      std::string loc = "profile " + std::to_string(e.profile_id) + " record " +
                        std::to_string(i);
      if (i > 0 && std::pair(prev.ctx_id, prev.metric_id) >=
                       std::pair(r.ctx_id, r.metric_id))
        report.issues.push_back(
            {loc, "records not strictly sorted by (ctx_id, metric_id)"});
      if (r.ctx_id >= h.meta().contexts.size())
        report.issues.push_back(
            {loc, "ctx_id " + std::to_string(r.ctx_id) + " not in tree"});
      if (r.metric_id >= h.meta().metrics.size())
        report.issues.push_back(
            {loc, "unknown metric_id " + std::to_string(r.metric_id)});
      if (!std::isfinite(r.value) || r.value < 0.0)
        report.issues.push_back({loc, "value must be finite and non-negative"});
      prev = r;
    }
  }

  for (const auto& e : h.trace_index()) {
    std::string tloc = "trace " + std::to_string(e.profile_id);
    if (h.meta().find_profile(e.profile_id) == nullptr)
      report.issues.push_back({tloc, "trace without meta descriptor"});
    uint64_t prev_ts = 0;
    for (uint64_t i = 0; i < e.event_count; ++i) {
      trace_event ev = h.decode_event(e, i);
      std::string loc = tloc + " event " + std::to_string(i);
      if (i == 0 && ev.timestamp_ns != e.t_begin_ns)
        report.issues.push_back({loc, "first event does not match indexed t_begin"});
      if (i > 0 && ev.timestamp_ns < prev_ts)
        report.issues.push_back({loc, "timestamps must be non-decreasing"});
      if (ev.ctx_id >= h.meta().contexts.size())
        report.issues.push_back(
            {loc, "ctx_id " + std::to_string(ev.ctx_id) + " not in tree"});
      prev_ts = ev.timestamp_ns;
    }
    if (e.event_count > 0 && prev_ts > e.t_end_ns)
      report.issues.push_back({tloc, "t_end precedes the last event"});
  }

  return report;
}

database_image read_image(const db_handle& h) {
  database_image image;
  image.meta = h.meta();
  image.records.resize(image.meta.profiles.size());
  for (size_t i = 0; i < image.meta.profiles.size(); ++i) {
    if (h.find_profile_entry(image.meta.profiles[i].id) != nullptr)
      image.records[i] = h.read_profile_records(
          image.meta.profiles[i].id, id_filter::all_ids(),
          metric_filter::all_ids());
  }
  for (const auto& e : h.trace_index()) {
    trace_data t;
    t.profile_id = e.profile_id;
    auto [events, t_end] = h.read_trace_full(e.profile_id);
    t.events = std::move(events);
    t.t_end_ns = t_end;
    image.traces.push_back(std::move(t));
  }
  return image;
}

}  // namespace perfslice::store
