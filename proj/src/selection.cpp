#include "laid/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "laid/error.hpp"

namespace laid {

void CandidateModel::validate() const {
  if (!(top1_acc > 0.0 && top1_acc <= 100.0)) {
    throw Error(ErrorKind::Parameter, name + ": top-1 accuracy must be in (0, 100]");
  }
  if (!(params > 0.0)) throw Error(ErrorKind::Parameter, name + ": params must be > 0");
  if (!(flops > 0.0)) throw Error(ErrorKind::Parameter, name + ": flops must be > 0");
}

void EfficiencyWeights::validate() const {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) {
    throw Error(ErrorKind::Parameter, "efficiency weights must be non-negative");
  }
  if (lambda1 + lambda2 + lambda3 <= 0) {
    throw Error(ErrorKind::Parameter, "at least one efficiency weight must be positive");
  }
}

std::vector<CandidateModel> constraint_filter(const std::vector<CandidateModel>& pool) {
  std::vector<CandidateModel> kept;
  for (const auto& m : pool) {
    if (m.params < kMaxParams || m.flops < kMaxFlops) kept.push_back(m);
  }
  return kept;
}

namespace {

struct PoolStats {
  double max_acc, min_flops, min_params;
};

PoolStats pool_stats(const std::vector<CandidateModel>& pool) {
  if (pool.empty()) throw Error(ErrorKind::Parameter, "efficiency score over an empty pool");
  PoolStats s{0.0, pool[0].flops, pool[0].params};
  for (const auto& m : pool) {
    m.validate();
    s.max_acc = std::max(s.max_acc, m.top1_acc);
    s.min_flops = std::min(s.min_flops, m.flops);
    s.min_params = std::min(s.min_params, m.params);
  }
  return s;
}

double score_with(const CandidateModel& m, const PoolStats& s, const EfficiencyWeights& w) {
  return w.lambda1 * (m.top1_acc / s.max_acc) + w.lambda2 * (s.min_flops / m.flops) +
         w.lambda3 * (s.min_params / m.params);
}

}  // namespace

double efficiency_score(const CandidateModel& m, const std::vector<CandidateModel>& pool,
                        const EfficiencyWeights& w) {
  w.validate();
  m.validate();
  return score_with(m, pool_stats(pool), w);
}

std::vector<RankedModel> rank_and_dedupe(const std::vector<CandidateModel>& pool,
                                         const EfficiencyWeights& w, std::size_t top_k) {
  if (top_k < 1) throw Error(ErrorKind::Parameter, "top_k must be >= 1");
  w.validate();
  if (pool.empty()) return {};
  const PoolStats stats = pool_stats(pool);
  std::vector<RankedModel> all;
  for (const auto& m : pool) all.push_back({m, score_with(m, stats, w), 0, 0});
  std::sort(all.begin(), all.end(), [](const RankedModel& a, const RankedModel& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.model.flops != b.model.flops) return a.model.flops < b.model.flops;
    if (a.model.params != b.model.params) return a.model.params < b.model.params;
    return a.model.name < b.model.name;
  });
  std::vector<RankedModel> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < all.size() && out.size() < top_k; ++i) {
    if (!seen.insert(all[i].model.family).second) continue;
    all[i].original_rank = i + 1;
    all[i].rank = out.size() + 1;
    out.push_back(all[i]);
  }
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, delim)) {
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

std::vector<CandidateModel> parse_candidate_pool(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  char delim = ',';
  std::map<std::string, std::size_t> col;
  std::vector<CandidateModel> pool;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    if (header.empty()) {
      delim = line.find('\t') != std::string::npos ? '\t' : ',';
      header = split_fields(line, delim);
      for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
      for (const char* need : {"name", "family", "top1_acc", "params", "flops"}) {
        if (!col.count(need)) {
          throw Error(ErrorKind::Data, std::string("candidate pool header lacks '") + need + "'");
        }
      }
      continue;
    }
    const auto f = split_fields(line, delim);
    if (f.size() < header.size()) {
      throw Error(ErrorKind::Data, "candidate pool line " + std::to_string(line_no) +
                                       " has too few fields");
    }
    CandidateModel m;
    try {
      m.name = f[col["name"]];
      m.family = f[col["family"]];
      m.top1_acc = std::stod(f[col["top1_acc"]]);
      m.params = std::stod(f[col["params"]]);
      m.flops = std::stod(f[col["flops"]]);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Data, "candidate pool line " + std::to_string(line_no) +
                                       " has a non-numeric field");
    }
    m.validate();
    pool.push_back(m);
  }
  if (header.empty()) throw Error(ErrorKind::Data, "candidate pool has no header");
  return pool;
}

std::string format_ranking(const std::vector<RankedModel>& ranked) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-24s %-16s %9s %12s %14s %8s\n", "rank", "name",
                "family", "top1_acc", "params", "flops", "score");
  out += line;
  for (const auto& r : ranked) {
    char rank[32];
    std::snprintf(rank, sizeof rank, "%zu (%zu)", r.rank, r.original_rank);
    std::snprintf(line, sizeof line, "%-8s %-24s %-16s %9.2f %12.0f %14.0f %8.4f\n", rank,
                  r.model.name.c_str(), r.model.family.c_str(), r.model.top1_acc, r.model.params,
                  r.model.flops, r.score);
    out += line;
  }
  return out;
}

}  // namespace laid
