#include "topology.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace perfslice::topology {

namespace {

uint32_t parse_field(std::string_view name, std::size_t& pos, char tag) {
  if (pos >= name.size() || name[pos] != tag)
    raise(errc::parse_error,
          "node name parse error at byte " + std::to_string(pos) +
              ": expected '" + std::string(1, tag) + "' in \"" +
              std::string(name) + "\"");
  ++pos;
  uint32_t v = 0;
  auto [p, ec] = std::from_chars(name.data() + pos, name.data() + name.size(), v);
  if (ec != std::errc() || p == name.data() + pos)
    raise(errc::parse_error,
          "node name parse error at byte " + std::to_string(pos) +
              ": expected decimal integer in \"" + std::string(name) + "\"");
  pos = static_cast<std::size_t>(p - name.data());
  return v;
}

}  // namespace

topo_coord parse_node_name(std::string_view name) {
  std::size_t pos = 0;
  topo_coord c;
  c.rack = parse_field(name, pos, 'x');
  c.chassis = parse_field(name, pos, 'c');
  c.slot = parse_field(name, pos, 's');
  c.blade = parse_field(name, pos, 'b');
  c.node = parse_field(name, pos, 'n');
  if (pos != name.size())
    raise(errc::parse_error,
          "node name parse error at byte " + std::to_string(pos) +
              ": trailing characters in \"" + std::string(name) + "\"");
  return c;
}

std::string render_node_name(const topo_coord& c) {
  return "x" + std::to_string(c.rack) + "c" + std::to_string(c.chassis) + "s" +
         std::to_string(c.slot) + "b" + std::to_string(c.blade) + "n" +
         std::to_string(c.node);
}

congestion_report localize_outliers(const std::vector<std::string>& outliers,
                                    const std::vector<std::string>& universe) {
  // Distinct node coordinates; duplicate hostnames collapse.
  std::set<std::string> outlier_set(outliers.begin(), outliers.end());

  std::map<std::pair<uint32_t, uint32_t>, uint64_t> universe_chassis;
  for (const auto& name : universe) {
    topo_coord c = parse_node_name(name);
    ++universe_chassis[{c.rack, c.chassis}];
  }

  struct rack_acc {
    uint32_t nodes = 0;
    std::map<uint32_t, uint64_t> chassis_outliers;
  };
  std::map<uint32_t, rack_acc> racks;
  for (const auto& name : outlier_set) {
    topo_coord c = parse_node_name(name);
    auto& acc = racks[c.rack];
    ++acc.nodes;
    ++acc.chassis_outliers[c.chassis];
  }

  congestion_report report;
  report.outlier_count = outlier_set.size();
  for (const auto& [rack, acc] : racks) {
    rack_entry entry;
    entry.rack = rack;
    entry.affected_nodes = acc.nodes;
    for (const auto& [chassis, count] : acc.chassis_outliers) {
      entry.affected_chassis.push_back(chassis);
      auto uni = universe_chassis.find({rack, chassis});
      if (uni != universe_chassis.end() && uni->second == count)
        entry.fully_affected_chassis.push_back(chassis);
    }
    report.racks.push_back(std::move(entry));
  }
  return report;
}

std::string render_report(const congestion_report& r, report_format f) {
  if (f == report_format::json) {
    nlohmann::json j;
    j["outliers"] = r.outlier_count;
    j["racks"] = nlohmann::json::array();
    for (const auto& e : r.racks) {
      nlohmann::json je;
      je["rack"] = e.rack;
      je["nodes"] = e.affected_nodes;
      je["chassis"] = e.affected_chassis;
      je["full_chassis"] = e.fully_affected_chassis;
      j["racks"].push_back(std::move(je));
    }
    return j.dump(2);
  }

  std::string out = std::to_string(r.outlier_count) + " outlier nodes across " +
                    std::to_string(r.racks.size()) + " racks\n";
  for (const auto& e : r.racks) {
    out += "rack " + std::to_string(e.rack) + ": " +
           std::to_string(e.affected_nodes) + " nodes, chassis [";
    for (std::size_t i = 0; i < e.affected_chassis.size(); ++i) {
      if (i) out += " ";
      out += std::to_string(e.affected_chassis[i]);
    }
    out += "], full [";
    for (std::size_t i = 0; i < e.fully_affected_chassis.size(); ++i) {
      if (i) out += " ";
      out += std::to_string(e.fully_affected_chassis[i]);
    }
    out += "]\n";
  }
  return out;
}

congestion_report report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(errc::parse_error, std::string("report json: ") + e.what());
  }
  congestion_report r;
  r.outlier_count = j.at("outliers").get<uint64_t>();
  for (const auto& je : j.at("racks")) {
    rack_entry e;
    e.rack = je.at("rack").get<uint32_t>();
    e.affected_nodes = je.at("nodes").get<uint32_t>();
    e.affected_chassis = je.at("chassis").get<std::vector<uint32_t>>();
    e.fully_affected_chassis =
        je.at("full_chassis").get<std::vector<uint32_t>>();
    r.racks.push_back(std::move(e));
  }
  return r;
}

}  // namespace perfslice::topology
