#pragma once

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "quadwit/quadtree.hpp"
#include "quadwit/uncertainty.hpp"
#include "quadwit/witness.hpp"

namespace quadwit {

using ordered_json = nlohmann::ordered_json;

/// Shortest exact decimal for a double; CSV round trips are bit-exact.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string now_iso8601() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline constexpr const char* kLeafCsvHeader =
    "tree_id,path,row,col,span,pooled_C,pooled_A,efficiency,total_time";

inline void write_leaf_csv(const std::string& path, const std::string& tree_id,
                           const EstimatedDistribution& est) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kLeafCsvHeader << "\n";
  for (const LeafEstimate& leaf : est.leaves) {
    out << tree_id << ',' << (leaf.path.empty() ? "-" : leaf.path) << ',' << leaf.rect.row << ','
        << leaf.rect.col << ',' << leaf.rect.rows << ',' << format_double(leaf.pooled_c) << ','
        << format_double(leaf.pooled_a) << ',' << format_double(leaf.efficiency) << ','
        << format_double(leaf.total_time) << "\n";
  }
}

/// Reads one leaf CSV back; rates are left at zero and recomputed by the
/// caller for the requested subtraction mode.
inline std::vector<LeafEstimate> read_leaf_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != kLeafCsvHeader)
    throw std::runtime_error(path + ": unexpected leaf CSV header");
  std::vector<LeafEstimate> leaves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) throw std::runtime_error(path + ": malformed leaf CSV row");
    LeafEstimate leaf;
    leaf.path = fields[1] == "-" ? "" : fields[1];
    leaf.rect = Rect::square(std::stoi(fields[2]), std::stoi(fields[3]), std::stoi(fields[4]));
    leaf.pooled_c = std::stod(fields[5]);
    leaf.pooled_a = std::stod(fields[6]);
    leaf.efficiency = std::stod(fields[7]);
    leaf.total_time = std::stod(fields[8]);
    leaves.push_back(std::move(leaf));
  }
  return leaves;
}

/// Partition overlay for external plotting: one row per leaf rectangle.
inline void write_partition_csv(const std::string& path,
                                const std::vector<EstimatedDistribution>& ests) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "tree_id,row,col,span\n";
  for (std::size_t t = 0; t < ests.size(); ++t)
    for (const LeafEstimate& leaf : ests[t].leaves)
      out << tree_name(t) << ',' << leaf.rect.row << ',' << leaf.rect.col << ','
          << leaf.rect.rows << "\n";
}

inline ordered_json witness_to_json(const WitnessResult& w) {
  ordered_json j;
  j["method"] = to_string(w.method);
  j["ef_bound_ebits"] = w.ef_bound;
  j["sigma_ebits"] = w.sigma;
  j["uncertainty_method"] = to_string(w.uncertainty_method);
  j["dimensionality_ceil"] = dimensionality_bound(w.ef_bound);
  j["dimensionality_floor"] = dimensionality_bound_floor(w.ef_bound);
  ordered_json comps = ordered_json::array();
  for (const ComponentTerms& t : w.components) {
    ordered_json c;
    c["component"] = to_string(t.component);
    c["h_position_bits"] = t.h_position;
    c["h_momentum_bits"] = t.h_momentum;
    c["delta_x"] = t.delta_x;
    c["delta_k"] = t.delta_k;
    c["log_term_bits"] = t.log_term;
    comps.push_back(c);
  }
  j["components"] = comps;
  return j;
}

inline WitnessResult witness_from_json(const ordered_json& j) {
  WitnessResult w;
  w.method = j.at("method").get<std::string>() == "raw" ? WitnessMethod::Raw
                                                        : WitnessMethod::AccidentalSubtracted;
  w.ef_bound = j.at("ef_bound_ebits").get<double>();
  w.sigma = j.at("sigma_ebits").get<double>();
  w.uncertainty_method = j.at("uncertainty_method").get<std::string>() == "propagation"
                             ? UncertaintyMethod::Propagation
                             : UncertaintyMethod::MonteCarlo;
  for (const auto& c : j.at("components")) {
    ComponentTerms t;
    t.component = c.at("component").get<std::string>() == "x" ? Component::X : Component::Y;
    t.h_position = c.at("h_position_bits").get<double>();
    t.h_momentum = c.at("h_momentum_bits").get<double>();
    t.delta_x = c.at("delta_x").get<double>();
    t.delta_k = c.at("delta_k").get<double>();
    t.log_term = c.at("log_term_bits").get<double>();
    w.components.push_back(t);
  }
  return w;
}

inline ordered_json uncertainty_to_json(const UncertaintyReport& r) {
  ordered_json j;
  j["method"] = to_string(r.method);
  j["ef_mean_ebits"] = r.ef_mean;
  j["ef_sigma_ebits"] = r.ef_sigma;
  if (r.method == UncertaintyMethod::MonteCarlo) j["trials"] = r.trials;
  return j;
}

}  // namespace quadwit
