#include "specfil/bundle.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "specfil/error.hpp"
#include "specfil/rng.hpp"

namespace specfil {

namespace fs = std::filesystem;
using nlohmann::json;

void GraphBundle::validate() const {
  adjacency.validate();
  const Index n = adjacency.n_rows;
  if (adjacency.n_cols != n) throw Error("bundle: adjacency not square");
  if (features.rows() != n) throw Error("bundle: feature row count != node count");
  if (static_cast<Index>(labels.size()) != n) throw Error("bundle: label count != node count");
  if (num_classes < 2) throw Error("bundle: num_classes must be >= 2");
  for (Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= num_classes)
      throw Error("bundle: label out of range at node " + std::to_string(i));
  }
  if (!features.allFinite()) throw Error("bundle: non-finite feature value");
  for (Index i = 0; i < n; ++i) {
    for (Index k = adjacency.row_ptr[static_cast<std::size_t>(i)]; k < adjacency.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      if (adjacency.col_idx[static_cast<std::size_t>(k)] == i)
        throw Error("bundle: self-loop at node " + std::to_string(i));
      if (adjacency.values[static_cast<std::size_t>(k)] != 1.0)
        throw Error("bundle: adjacency entry not 1 at row " + std::to_string(i));
    }
  }
  if (!adjacency.is_symmetric()) throw Error("bundle: adjacency not symmetric");

  for (std::size_t s = 0; s < splits.size(); ++s) {
    const auto& sp = splits[s];
    std::set<Index> seen;
    auto check_set = [&](const std::vector<Index>& ids, const char* which) {
      for (Index v : ids) {
        if (v < 0 || v >= n)
          throw Error("bundle: split " + std::to_string(s) + " " + which + " index " + std::to_string(v) + " out of range");
        if (!seen.insert(v).second)
          throw Error("bundle: split " + std::to_string(s) + " has overlapping index " + std::to_string(v));
      }
    };
    check_set(sp.train, "train");
    check_set(sp.val, "val");
    check_set(sp.test, "test");
    std::vector<bool> in_train(static_cast<std::size_t>(num_classes), false);
    for (Index v : sp.train) in_train[static_cast<std::size_t>(labels[static_cast<std::size_t>(v)])] = true;
    for (int c = 0; c < num_classes; ++c) {
      if (!in_train[static_cast<std::size_t>(c)])
        throw Error("bundle: class " + std::to_string(c) + " absent from training set of split " + std::to_string(s));
    }
  }
}

namespace {

std::string loc(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

std::ifstream open_or_throw(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("bundle: missing file " + file.string());
  return in;
}

json parse_json_file(const fs::path& file) {
  auto in = open_or_throw(file);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("bundle: malformed JSON in " + file.string() + ": " + e.what());
  }
  return j;
}

double parse_real(std::string_view tok, const fs::path& file, std::size_t line) {
  double v = 0.0;
  const auto* last = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw Error("bundle: malformed real '" + std::string(tok) + "' at " + loc(file, line));
  return v;
}

Index parse_index(std::string_view tok, const fs::path& file, std::size_t line) {
  Index v = 0;
  const auto* last = tok.data() + tok.size();
  const auto res = std::from_chars(tok.data(), last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw Error("bundle: malformed integer '" + std::string(tok) + "' at " + loc(file, line));
  return v;
}

std::vector<Index> index_array(const json& j, const std::string& what, const fs::path& file) {
  if (!j.is_array()) throw Error("bundle: '" + what + "' is not an array in " + file.string());
  std::vector<Index> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw Error("bundle: non-integer entry in '" + what + "' of " + file.string());
    out.push_back(v.get<Index>());
  }
  return out;
}

}  // namespace

GraphBundle load_bundle(const fs::path& dir, std::vector<std::string>* warnings) {
  if (!fs::is_directory(dir)) throw Error("bundle: not a directory: " + dir.string());

  const json header = parse_json_file(dir / "graph.json");
  for (const char* key : {"name", "n", "d", "num_classes"}) {
    if (!header.contains(key)) throw Error("bundle: graph.json missing key '" + std::string(key) + "'");
  }
  GraphBundle b;
  b.name = header.at("name").get<std::string>();
  const Index n = header.at("n").get<Index>();
  const Index d = header.at("d").get<Index>();
  b.num_classes = header.at("num_classes").get<int>();
  if (n <= 0 || d <= 0) throw Error("bundle: graph.json has non-positive n or d");

  // edges.tsv
  {
    const fs::path file = dir / "edges.tsv";
    auto in = open_or_throw(file);
    std::set<std::pair<Index, Index>> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw Error("bundle: missing tab at " + loc(file, lineno));
      Index u = parse_index(std::string_view(line).substr(0, tab), file, lineno);
      Index v = parse_index(std::string_view(line).substr(tab + 1), file, lineno);
      if (u == v) throw Error("bundle: self-loop edge at " + loc(file, lineno));
      if (u < 0 || u >= n || v < 0 || v >= n)
        throw Error("bundle: edge index out of range [0, " + std::to_string(n) + ") at " + loc(file, lineno));
      if (u > v) {
        if (warnings)
          warnings->push_back("bundle: directed edge at " + loc(file, lineno) + " symmetrized (u > v)");
        std::swap(u, v);
      }
      if (!edges.insert({u, v}).second && warnings) {
        warnings->push_back("bundle: duplicate edge at " + loc(file, lineno) + " ignored");
      }
    }
    std::vector<std::tuple<Index, Index, double>> triplets;
    triplets.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
      triplets.emplace_back(u, v, 1.0);
      triplets.emplace_back(v, u, 1.0);
    }
    b.adjacency = SparseMatrix::from_triplets(n, n, std::move(triplets));
  }

  // features.tsv
  {
    const fs::path file = dir / "features.tsv";
    auto in = open_or_throw(file);
    b.features = Matrix::Zero(n, d);
    std::string line;
    for (Index i = 0; i < n; ++i) {
      if (!std::getline(in, line))
        throw Error("bundle: expected " + std::to_string(n) + " feature rows, got " + std::to_string(i) +
                    " in " + file.string());
      std::string_view rest(line);
      for (Index j = 0; j < d; ++j) {
        const auto tab = rest.find('\t');
        const auto tok = (tab == std::string_view::npos) ? rest : rest.substr(0, tab);
        if (tok.empty())
          throw Error("bundle: row has fewer than " + std::to_string(d) + " columns at " +
                      loc(file, static_cast<std::size_t>(i) + 1));
        b.features(i, j) = parse_real(tok, file, static_cast<std::size_t>(i) + 1);
        rest = (tab == std::string_view::npos) ? std::string_view{} : rest.substr(tab + 1);
      }
      if (!rest.empty())
        throw Error("bundle: row has more than " + std::to_string(d) + " columns at " +
                    loc(file, static_cast<std::size_t>(i) + 1));
    }
  }

  // labels.tsv
  {
    const fs::path file = dir / "labels.tsv";
    auto in = open_or_throw(file);
    b.labels.resize(static_cast<std::size_t>(n));
    std::string line;
    for (Index i = 0; i < n; ++i) {
      if (!std::getline(in, line))
        throw Error("bundle: expected " + std::to_string(n) + " labels in " + file.string());
      b.labels[static_cast<std::size_t>(i)] =
          static_cast<int>(parse_index(line, file, static_cast<std::size_t>(i) + 1));
    }
  }

  // splits/split_<k>.json, consecutive from k = 0
  {
    const fs::path sdir = dir / "splits";
    if (!fs::is_directory(sdir)) throw Error("bundle: missing splits directory " + sdir.string());
    for (int k = 0;; ++k) {
      const fs::path file = sdir / ("split_" + std::to_string(k) + ".json");
      if (!fs::exists(file)) break;
      const json j = parse_json_file(file);
      SplitSpec sp;
      sp.train = index_array(j.at("train"), "train", file);
      sp.val = index_array(j.at("val"), "val", file);
      sp.test = index_array(j.at("test"), "test", file);
      b.splits.push_back(std::move(sp));
    }
    if (b.splits.empty()) throw Error("bundle: no split files under " + sdir.string());
  }

  b.validate();
  return b;
}

void save_bundle(const GraphBundle& bundle, const fs::path& dir) {
  bundle.validate();
  fs::create_directories(dir / "splits");

  {
    json header = {{"name", bundle.name},
                   {"n", bundle.num_nodes()},
                   {"d", bundle.feature_dim()},
                   {"num_classes", bundle.num_classes}};
    std::ofstream out(dir / "graph.json");
    out << header.dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "edges.tsv");
    const auto& a = bundle.adjacency;
    for (Index i = 0; i < a.n_rows; ++i) {
      for (Index k = a.row_ptr[static_cast<std::size_t>(i)]; k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        const Index j = a.col_idx[static_cast<std::size_t>(k)];
        if (i < j) out << i << '\t' << j << '\n';
      }
    }
  }
  {
    std::FILE* f = std::fopen((dir / "features.tsv").string().c_str(), "w");
    if (!f) throw Error("bundle: cannot write features.tsv under " + dir.string());
    for (Index i = 0; i < bundle.features.rows(); ++i) {
      for (Index j = 0; j < bundle.features.cols(); ++j) {
        // %.17g round-trips doubles exactly through the text format.
        std::fprintf(f, "%s%.17g", j == 0 ? "" : "\t", bundle.features(i, j));
      }
      std::fputc('\n', f);
    }
    std::fclose(f);
  }
  {
    std::ofstream out(dir / "labels.tsv");
    for (int l : bundle.labels) out << l << '\n';
  }
  for (std::size_t k = 0; k < bundle.splits.size(); ++k) {
    json j = {{"train", bundle.splits[k].train}, {"val", bundle.splits[k].val}, {"test", bundle.splits[k].test}};
    std::ofstream out(dir / "splits" / ("split_" + std::to_string(k) + ".json"));
    out << j.dump() << "\n";
  }
}

void row_normalize_features(GraphBundle& bundle) {
  for (Index i = 0; i < bundle.features.rows(); ++i) {
    const double norm = bundle.features.row(i).lpNorm<1>();
    if (norm > 0.0) bundle.features.row(i) /= norm;
  }
}

SplitSpec stratified_split(const std::vector<int>& labels, int num_classes, double train_frac,
                           double val_frac, Pcg64& rng) {
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  SplitSpec sp;
  for (auto& ids : by_class) {
    rng.shuffle(ids);
    const auto n = static_cast<Index>(ids.size());
    // At least one training node per class; remaining fractions round down.
    Index n_train = std::max<Index>(1, static_cast<Index>(static_cast<double>(n) * train_frac));
    Index n_val = static_cast<Index>(static_cast<double>(n) * val_frac);
    if (n_train + n_val > n) n_val = n - n_train;
    for (Index i = 0; i < n; ++i) {
      if (i < n_train) sp.train.push_back(ids[static_cast<std::size_t>(i)]);
      else if (i < n_train + n_val) sp.val.push_back(ids[static_cast<std::size_t>(i)]);
      else sp.test.push_back(ids[static_cast<std::size_t>(i)]);
    }
  }
  std::sort(sp.train.begin(), sp.train.end());
  std::sort(sp.val.begin(), sp.val.end());
  std::sort(sp.test.begin(), sp.test.end());
  return sp;
}

}  // namespace specfil
