//
// Physical interconnect coordinates: parsing node names of the form
// x<rack>c<chassis>s<slot>b<blade>n<node> and localizing outlier node sets
// to racks and chassis.
//
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace perfslice::topology {

struct topo_coord {
  uint32_t rack = 0;
  uint32_t chassis = 0;
  uint32_t slot = 0;
  uint32_t blade = 0;
  uint32_t node = 0;

  friend bool operator==(const topo_coord&, const topo_coord&) = default;
};

// Strict decimal parse; mismatches raise parse_error with the byte offset.
topo_coord parse_node_name(std::string_view name);
std::string render_node_name(const topo_coord& c);

struct rack_entry {
  uint32_t rack = 0;
  uint32_t affected_nodes = 0;
  std::vector<uint32_t> affected_chassis;        // ascending
  std::vector<uint32_t> fully_affected_chassis;  // every node is an outlier

  friend bool operator==(const rack_entry&, const rack_entry&) = default;
};

struct congestion_report {
  uint64_t outlier_count = 0;
  std::vector<rack_entry> racks;  // ascending by rack id

  std::size_t distinct_racks() const { return racks.size(); }
  friend bool operator==(const congestion_report&,
                         const congestion_report&) = default;
};

// Groups outliers by rack and chassis. A chassis is fully affected iff every
// one of its nodes in `universe` is an outlier. Unparseable names propagate
// parse_error naming the offender.
congestion_report localize_outliers(const std::vector<std::string>& outliers,
                                    const std::vector<std::string>& universe);

enum class report_format { json, text };
std::string render_report(const congestion_report& r, report_format f);
congestion_report report_from_json(const std::string& text);

}  // namespace perfslice::topology
