#pragma once
//
// JSON / CSV persistence for trees, models, slices and run summaries.
//

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hypergreen/error.hpp"
#include "hypergreen/green_model.hpp"
#include "hypergreen/grid.hpp"
#include "hypergreen/partition.hpp"

namespace hypergreen {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

inline json box_to_json(const SubdomainBox& b) {
  return {{"level", b.level}, {"index", {b.index[0], b.index[1], b.index[2], b.index[3]}}};
}

inline SubdomainBox box_from_json(const json& j) {
  SubdomainBox b;
  b.level = j.at("level").get<int>();
  const auto& idx = j.at("index");
  require(idx.is_array() && idx.size() == 4, ErrorKind::Config, "box index must have four entries");
  for (std::size_t d = 0; d < 4; ++d) b.index[d] = idx[d].get<std::int64_t>();
  return b;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Column-major list of columns.
inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Index j = 0; j < m.cols(); ++j) a.push_back(vector_to_json(m.col(j)));
  return a;
}

inline Eigen::MatrixXd matrix_from_json(const json& a, Index rows) {
  Eigen::MatrixXd m(rows, static_cast<Index>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) {
    require(a[j].size() == static_cast<std::size_t>(rows), ErrorKind::Config, "factor column has the wrong length");
    for (Index i = 0; i < rows; ++i) m(i, static_cast<Index>(j)) = a[j][static_cast<std::size_t>(i)].get<double>();
  }
  return m;
}

inline json tree_to_json(const PartitionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    json j = box_to_json(n.box);
    j["color"] = to_string(n.color);
    j["leaf"] = n.is_leaf();
    j["k"] = n.decision.k;
    j["q"] = n.decision.q;
    j["queries"] = n.decision.queries;
    j["sigma"] = vector_to_json(n.decision.sigma);
    j["zero_block"] = n.decision.zero_block;
    j["rank_deficient"] = n.decision.rank_deficient;
    nodes.push_back(std::move(j));
  }
  return {{"final_level", t.final_level},
          {"depth_cap", t.depth_cap},
          {"red_volume_by_level", t.red_volume_by_level},
          {"detection_queries", t.detection_queries},
          {"budget_exceeded", t.budget_exceeded},
          {"nodes", std::move(nodes)}};
}

inline json model_to_json(const GreenModel& m, const PartitionTree* tree = nullptr) {
  const auto& g = *m.grid();
  json blocks = json::array();
  for (const auto& b : m.blocks()) {
    json j = box_to_json(b.box);
    j["q"] = matrix_to_json(b.q.columns);
    j["ccols"] = matrix_to_json(b.ccols.columns);
    blocks.push_back(std::move(j));
  }
  json red = json::array();
  for (const auto& b : m.red_leaves()) red.push_back(box_to_json(b));
  const auto& info = m.info();
  json out = {{"schema_version", kSchemaVersion},
              {"grid", {{"panels", g.panels()}, {"nodes_per_panel", g.nodes_per_panel()}}},
              {"eps", info.eps},
              {"kc", info.kc},
              {"k", info.k},
              {"q", info.q},
              {"seed", info.seed},
              {"final_level", info.final_level},
              {"partial", info.partial},
              {"green_blocks", std::move(blocks)},
              {"red_leaves", std::move(red)}};
  if (tree) out["tree"] = tree_to_json(*tree);
  return out;
}

inline GreenModel model_from_json(const json& j) {
  require(j.at("schema_version").get<int>() == kSchemaVersion, ErrorKind::Config, "unsupported model schema version");
  const GridPtr grid =
      build_grid(j.at("grid").at("panels").get<int>(), j.at("grid").at("nodes_per_panel").get<int>());
  std::vector<LowRankBlock> blocks;
  for (const auto& b : j.at("green_blocks")) {
    const SubdomainBox box = box_from_json(b);
    const Patch x = Patch::from_intervals(grid, box.interval(0), box.interval(1));
    const Patch y = Patch::from_intervals(grid, box.interval(2), box.interval(3));
    blocks.push_back({box, {x, matrix_from_json(b.at("q"), x.size())}, {y, matrix_from_json(b.at("ccols"), y.size())}});
  }
  std::vector<SubdomainBox> red;
  for (const auto& b : j.at("red_leaves")) red.push_back(box_from_json(b));
  ModelInfo info;
  info.eps = j.at("eps").get<double>();
  info.kc = j.at("kc").get<double>();
  info.k = j.at("k").get<int>();
  info.q = j.at("q").get<int>();
  info.seed = j.at("seed").get<std::uint64_t>();
  info.final_level = j.at("final_level").get<int>();
  info.partial = j.at("partial").get<bool>();
  return GreenModel(grid, std::move(blocks), std::move(red), info);
}

inline json slice_blocks_to_json(const Slice& s) {
  json rects = json::array();
  for (const auto& r : s.blocks)
    rects.push_back({{"x0", r.x0}, {"x1", r.x1}, {"t0", r.t0}, {"t1", r.t1}, {"color", r.green ? "green" : "red"}});
  return {{"schema_version", kSchemaVersion}, {"y", s.y}, {"s", s.s}, {"blocks", std::move(rects)}};
}

/// Shortest round-trip decimal form, '.' separator regardless of locale.
inline std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    require(out_.good(), ErrorKind::Config, "cannot open '" + path + "' for writing");
  }

  void header(const std::vector<std::string>& cols) { row_strings(cols); }

  void row(const std::vector<double>& vals) {
    std::vector<std::string> s;
    s.reserve(vals.size());
    for (double v : vals) s.push_back(format_number(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out_ << ',';
      out_ << cols[i];
    }
    out_ << "\r\n";
  }

 private:
  std::ofstream out_;
};

inline void write_slice_csv(const Slice& s, const std::string& path) {
  CsvWriter w(path);
  w.header({"x", "t", "approx", "exact", "abs_error"});
  for (int i = 0; i < s.resolution; ++i)
    for (int j = 0; j < s.resolution; ++j) {
      const double a = s.approx(i, j);
      std::vector<std::string> row{format_number(s.x[static_cast<std::size_t>(i)]),
                                   format_number(s.t[static_cast<std::size_t>(j)]), format_number(a)};
      if (s.exact) {
        const double e = (*s.exact)(i, j);
        row.push_back(format_number(e));
        row.push_back(format_number(std::abs(a - e)));
      } else {
        row.push_back("");
        row.push_back("");
      }
      w.row_strings(row);
    }
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Config, "cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
}

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Config, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace hypergreen
