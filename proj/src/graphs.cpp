#include "pgp/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pgp/error.hpp"

namespace pgp::graphs {

using nlohmann::json;
using num::Matrix;

double impact_factor(const PrescriptionCorpus& corpus, std::size_t pill, const std::string& diagnosis) {
  std::size_t with_d = 0, with_p = 0, with_both = 0;
  for (const auto& rx : corpus.records) {
    const bool has_d = std::binary_search(rx.diagnoses.begin(), rx.diagnoses.end(), diagnosis);
    const bool has_p = std::binary_search(rx.pills.begin(), rx.pills.end(), pill);
    with_d += has_d;
    with_p += has_p;
    with_both += has_d && has_p;
  }
  if (with_d == 0) throw UndefinedStatisticError("diagnosis " + diagnosis + " never occurs in the corpus");
  if (with_p == 0) throw UndefinedStatisticError("pill " + std::to_string(pill) + " is never prescribed");
  const double tf = static_cast<double>(with_both) / static_cast<double>(with_d);
  const double idf = std::log(static_cast<double>(corpus.size()) / static_cast<double>(with_p));
  return tf * idf;
}

PillDiagnosisAffinity pill_diagnosis_affinity(const PrescriptionCorpus& corpus, const PillCatalog& catalog,
                                              GraphWarnings* warnings) {
  if (corpus.empty()) throw ValidationError("cannot build a co-occurrence graph from an empty corpus");
  const std::size_t n = catalog.size();

  std::map<std::string, std::size_t> diag_index;
  for (const auto& rx : corpus.records)
    for (const auto& d : rx.diagnoses) diag_index.emplace(d, 0);
  PillDiagnosisAffinity out;
  for (auto& [code, idx] : diag_index) {
    idx = out.diagnoses.size();
    out.diagnoses.push_back(code);
  }
  const std::size_t nd = out.diagnoses.size();

  // Counts in one pass; integer counts make the result independent of record order.
  std::vector<std::size_t> with_d(nd, 0), with_p(n, 0);
  std::vector<std::size_t> both(n * nd, 0);
  for (const auto& rx : corpus.records) {
    for (const auto& d : rx.diagnoses) ++with_d[diag_index.at(d)];
    for (std::size_t p : rx.pills) {
      if (p >= n) throw ValidationError("pill id " + std::to_string(p) + " outside catalog");
      ++with_p[p];
      for (const auto& d : rx.diagnoses) ++both[p * nd + diag_index.at(d)];
    }
  }

  const double total = static_cast<double>(corpus.size());
  out.p = Matrix(n, nd);
  for (std::size_t p = 0; p < n; ++p) {
    if (with_p[p] == 0) {
      if (warnings) warnings->messages.push_back("pill " + std::to_string(p) + " absent from corpus; zero row");
      continue;
    }
    const double idf = std::log(total / static_cast<double>(with_p[p]));
    double norm = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      const double tf = static_cast<double>(both[p * nd + d]) / static_cast<double>(with_d[d]);
      out.p(p, d) = tf * idf;
      norm += out.p(p, d);
    }
    if (norm <= 0.0) {
      if (warnings) {
        warnings->messages.push_back("pill " + std::to_string(p) + " has zero impact on every diagnosis; zero row");
      }
      for (std::size_t d = 0; d < nd; ++d) out.p(p, d) = 0.0;
      continue;
    }
    for (std::size_t d = 0; d < nd; ++d) out.p(p, d) /= norm;
  }
  return out;
}

CoGraph build_co_graph(const PrescriptionCorpus& corpus, const PillCatalog& catalog, GraphWarnings* warnings) {
  const auto aff = pill_diagnosis_affinity(corpus, catalog, warnings);
  const std::size_t n = catalog.size();
  CoGraph g{Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < aff.diagnoses.size(); ++d) s += aff.p(i, d) * aff.p(j, d);
      g.weights(i, j) = s;
      g.weights(j, i) = s;
    }
  }
  return g;
}

namespace {

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    const double d = a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / d;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
    x[r] = s / a[r * n + r];
  }
  return x;
}

}  // namespace

SizeGraph build_size_graph(const AnnotationSet& annotations, const PillCatalog& catalog,
                           std::span<const std::size_t> seeds) {
  if (annotations.empty()) throw ValidationError("cannot build a size graph from empty annotations");
  const std::size_t n = catalog.size();

  // Sum and count of observed log(area_j / area_i) per ordered pair (i < j).
  std::vector<double> log_sum(n * n, 0.0);
  std::vector<std::size_t> obs(n * n, 0);
  for (const auto& img : annotations.images) {
    std::map<std::size_t, std::pair<double, std::size_t>> per_class;
    for (const auto& lb : img.boxes) {
      if (lb.label >= n) throw ValidationError("label outside catalog in image " + img.image);
      auto& [area_sum, count] = per_class[lb.label];
      area_sum += lb.box.area();
      ++count;
    }
    std::vector<std::pair<std::size_t, double>> mean_area;
    for (const auto& [cls, acc] : per_class) mean_area.emplace_back(cls, acc.first / static_cast<double>(acc.second));
    for (std::size_t a = 0; a < mean_area.size(); ++a) {
      for (std::size_t b = a + 1; b < mean_area.size(); ++b) {
        const auto [i, ai] = mean_area[a];
        const auto [j, aj] = mean_area[b];
        log_sum[i * n + j] += std::log(aj / ai);
        ++obs[i * n + j];
      }
    }
  }

  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (obs[i * n + j] > 0) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  auto mean_log_ratio = [&](std::size_t i, std::size_t j) {
    // log(s_j / s_i)
    if (i < j) return log_sum[i * n + j] / static_cast<double>(obs[i * n + j]);
    return -log_sum[j * n + i] / static_cast<double>(obs[j * n + i]);
  };

  SizeGraph g;
  g.weights = Matrix(n, n, 1.0);
  g.known.assign(n, std::vector<bool>(n, false));
  g.indicators.assign(n, 0.0);
  g.component.assign(n, n);
  std::vector<double> log_size(n, 0.0);

  std::size_t next_component = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (g.component[root] != n) continue;
    // Breadth-first discovery of the component.
    std::vector<std::size_t> members;
    std::queue<std::size_t> frontier;
    frontier.push(root);
    g.component[root] = next_component;
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      members.push_back(u);
      for (std::size_t v : adj[u]) {
        if (g.component[v] == n) {
          g.component[v] = next_component;
          frontier.push(v);
        }
      }
    }
    std::sort(members.begin(), members.end());
    ++next_component;

    // Graph-Laplacian normal equations, gauge fixed at the lowest member (log size 0).
    const std::size_t m = members.size();
    if (m > 1) {
      std::map<std::size_t, std::size_t> local;
      for (std::size_t k = 0; k < m; ++k) local[members[k]] = k;
      const std::size_t r = m - 1;
      std::vector<double> a(r * r, 0.0), b(r, 0.0);
      for (std::size_t k = 1; k < m; ++k) {
        const std::size_t i = members[k];
        for (std::size_t j : adj[i]) {
          const std::size_t lj = local.at(j);
          a[(k - 1) * r + (k - 1)] += 1.0;
          if (lj > 0) a[(k - 1) * r + (lj - 1)] -= 1.0;
          b[k - 1] -= mean_log_ratio(i, j);
        }
      }
      const auto x = solve_dense(std::move(a), std::move(b), r);
      for (std::size_t k = 1; k < m; ++k) log_size[members[k]] = x[k - 1];
    }

    std::size_t seed = members.front();
    for (std::size_t s : seeds) {
      if (s < n && std::binary_search(members.begin(), members.end(), s)) {
        seed = s;
        break;
      }
    }
    for (std::size_t i : members) {
      g.indicators[i] = std::exp(log_size[i] - log_size[seed]);
      for (std::size_t j : members) {
        g.known[i][j] = true;
        g.weights(i, j) = i == j ? 1.0 : std::exp(log_size[i] - log_size[j]);
      }
    }
  }
  return g;
}

Matrix size_weights_for_pipeline(const SizeGraph& g) {
  Matrix w = g.weights;
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = 0; j < g.n(); ++j)
      if (!g.known[i][j]) w(i, j) = 1.0;
  return w;
}

namespace {

std::string edges_json(const Matrix& w, const std::function<bool(std::size_t, std::size_t)>& include) {
  std::string out = "[";
  bool first = true;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      if (!include(i, j)) continue;
      if (!first) out += ',';
      first = false;
      out += "[" + std::to_string(i) + "," + std::to_string(j) + "," + format_double(w(i, j)) + "]";
    }
  return out + "]";
}

json parse_graph(const std::string& text, const char* kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("graph JSON: ") + e.what());
  }
  if (doc.at("kind").get<std::string>() != kind) {
    throw ValidationError(std::string("expected graph kind '") + kind + "', got '" +
                          doc.at("kind").get<std::string>() + "'");
  }
  return doc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string export_co_graph(const CoGraph& g) {
  return "{\"n\":" + std::to_string(g.n()) + ",\"kind\":\"co\",\"edges\":" +
         edges_json(g.weights, [&](std::size_t i, std::size_t j) { return g.weights(i, j) != 0.0; }) + "}\n";
}

std::string export_size_graph(const SizeGraph& g) {
  std::string known = "[";
  for (std::size_t i = 0; i < g.n(); ++i) {
    if (i) known += ',';
    known += '[';
    for (std::size_t j = 0; j < g.n(); ++j) {
      if (j) known += ',';
      known += g.known[i][j] ? "true" : "false";
    }
    known += ']';
  }
  known += ']';
  return "{\"n\":" + std::to_string(g.n()) + ",\"kind\":\"size\",\"edges\":" +
         edges_json(g.weights, [&](std::size_t i, std::size_t j) { return static_cast<bool>(g.known[i][j]); }) +
         ",\"known\":" + known + "}\n";
}

CoGraph import_co_graph(const std::string& text) {
  const json doc = parse_graph(text, "co");
  const std::size_t n = doc.at("n").get<std::size_t>();
  CoGraph g{Matrix(n, n)};
  for (const auto& e : doc.at("edges")) {
    const auto i = e.at(0).get<std::size_t>(), j = e.at(1).get<std::size_t>();
    if (i >= n || j >= n) throw ValidationError("co-graph edge index out of range");
    g.weights(i, j) = e.at(2).get<double>();
  }
  return g;
}

SizeGraph import_size_graph(const std::string& text) {
  const json doc = parse_graph(text, "size");
  const std::size_t n = doc.at("n").get<std::size_t>();
  SizeGraph g;
  g.weights = Matrix(n, n, 1.0);
  g.known.assign(n, std::vector<bool>(n, false));
  if (doc.contains("known")) {
    const auto& k = doc.at("known");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g.known[i][j] = k.at(i).at(j).get<bool>();
  }
  for (const auto& e : doc.at("edges")) {
    const auto i = e.at(0).get<std::size_t>(), j = e.at(1).get<std::size_t>();
    if (i >= n || j >= n) throw ValidationError("size-graph edge index out of range");
    g.weights(i, j) = e.at(2).get<double>();
    g.known[i][j] = true;
  }
  // Components and indicators are recoverable from the known mask and weights.
  g.component.assign(n, n);
  g.indicators.assign(n, 0.0);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (g.component[i] != n) continue;
    for (std::size_t j = i; j < n; ++j) {
      if (g.known[i][j]) {
        g.component[j] = next;
        g.indicators[j] = g.weights(j, i);
      }
    }
    ++next;
  }
  return g;
}

CoGraph load_co_graph(const std::filesystem::path& path) { return import_co_graph(read_file(path)); }
SizeGraph load_size_graph(const std::filesystem::path& path) { return import_size_graph(read_file(path)); }

GraphStats co_graph_stats(const CoGraph& g) {
  GraphStats s;
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = 0; j < g.n(); ++j) s.edges += (i != j && g.weights(i, j) != 0.0);
  const double denom = static_cast<double>(g.n()) * static_cast<double>(g.n() > 0 ? g.n() - 1 : 0);
  s.density = denom > 0 ? static_cast<double>(s.edges) / denom : 0.0;
  return s;
}

GraphStats size_graph_stats(const SizeGraph& g) {
  GraphStats s;
  for (std::size_t i = 0; i < g.n(); ++i)
    for (std::size_t j = 0; j < g.n(); ++j) s.edges += (i != j && g.known[i][j]);
  const double denom = static_cast<double>(g.n()) * static_cast<double>(g.n() > 0 ? g.n() - 1 : 0);
  s.density = denom > 0 ? static_cast<double>(s.edges) / denom : 0.0;
  return s;
}

}  // namespace pgp::graphs
