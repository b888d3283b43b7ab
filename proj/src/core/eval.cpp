#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "core/error.hpp"
#include "core/loss.hpp"

using nlohmann::json;

namespace agman {

namespace {

std::vector<double> l2_normalize(std::vector<double> v) {
  double ss = 0;
  for (double x : v) ss += x * x;
  if (ss == 0.0) throw DegenerateInputError("embedding has zero norm");
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double average_precision(const std::vector<int>& relevance) {
  if (relevance.empty()) throw ArgumentError("average_precision: empty relevance list");
  double sum = 0;
  long relevant_seen = 0;
  for (size_t k = 0; k < relevance.size(); ++k) {
    if (relevance[k]) {
      ++relevant_seen;
      sum += static_cast<double>(relevant_seen) / static_cast<double>(k + 1);
    }
  }
  if (relevant_seen == 0) throw ArgumentError("average_precision: no relevant entry; caller must exclude the query");
  return sum / static_cast<double>(relevant_seen);
}

EvalReport evaluate_map(const Embedder& embed, const DatasetSplit& split, const AttributeSpace& space,
                        const std::map<int, EvalPartition>& pools) {
  EvalReport report;
  std::vector<double> all_aps;
  std::vector<double> attr_maps;

  for (int a = 0; a < space.n(); ++a) {
    auto pit = pools.find(a);
    const std::string& attr_name = space.names[static_cast<size_t>(a)];
    if (pit == pools.end() || pit->second.query_ids.empty() || pit->second.candidate_ids.empty()) {
      report.skipped_attributes.push_back(attr_name);
      continue;
    }
    const EvalPartition& pool = pit->second;
    report.counts.queries += static_cast<long>(pool.query_ids.size());
    report.counts.candidates += static_cast<long>(pool.candidate_ids.size());

    struct Cand {
      const ImageRecord* rec;
      std::vector<double> emb;
    };
    std::vector<Cand> cands;
    cands.reserve(pool.candidate_ids.size());
    for (const auto& id : pool.candidate_ids) {
      cands.push_back({&split.require(id), l2_normalize(embed(id, a))});
    }

    std::vector<double> aps;
    for (const auto& qid : pool.query_ids) {
      const ImageRecord& qrec = split.require(qid);
      const int q_sub = qrec.labels.at(a);
      const std::vector<double> qe = l2_normalize(embed(qid, a));

      std::vector<std::pair<double, const Cand*>> scored;
      scored.reserve(cands.size());
      bool any_relevant = false;
      for (const auto& c : cands) {
        scored.emplace_back(dot(qe, c.emb), &c);
        if (c.rec->labels.at(a) == q_sub) any_relevant = true;
      }
      if (!any_relevant) {
        ++report.counts.skipped_queries;
        continue;
      }
      std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second->rec->id < y.second->rec->id;
      });
      std::vector<int> relevance;
      relevance.reserve(scored.size());
      for (const auto& [score, c] : scored) relevance.push_back(c->rec->labels.at(a) == q_sub ? 1 : 0);
      aps.push_back(average_precision(relevance));
    }
    if (aps.empty()) {
      report.skipped_attributes.push_back(attr_name);
      continue;
    }
    double m = 0;
    for (double v : aps) m += v;
    m /= static_cast<double>(aps.size());
    report.per_attribute[attr_name] = m;
    attr_maps.push_back(m);
    all_aps.insert(all_aps.end(), aps.begin(), aps.end());
  }

  if (!all_aps.empty()) {
    double s = 0;
    for (double v : all_aps) s += v;
    report.overall_map = s / static_cast<double>(all_aps.size());
    double am = 0;
    for (double v : attr_maps) am += v;
    report.attribute_mean_map = am / static_cast<double>(attr_maps.size());
  }
  return report;
}

std::pair<bool, double> predict_triplet(const Embedder& embed, const Triplet& t) {
  const std::vector<double> a = embed(t.anchor, t.attribute);
  const std::vector<double> p = embed(t.positive, t.attribute);
  const std::vector<double> n = embed(t.negative, t.attribute);
  const double sp = cosine_similarity(a, p);
  const double sn = cosine_similarity(a, n);
  return {sp > sn, sp - sn};
}

std::pair<double, double> evaluate_triplets(const Embedder& embed, const std::vector<Triplet>& triplets, double margin,
                                            TripletMode mode) {
  if (triplets.empty()) throw ArgumentError("evaluate_triplets: empty triplet list");
  long correct = 0;
  double loss_sum = 0;
  for (const Triplet& t : triplets) {
    const std::vector<double> a = embed(t.anchor, t.attribute);
    const std::vector<double> p = embed(t.positive, t.attribute);
    const std::vector<double> n = embed(t.negative, t.attribute);
    const double sp = cosine_similarity(a, p);
    const double sn = cosine_similarity(a, n);
    if (sp > sn) ++correct;
    loss_sum += triplet_loss(a, p, n, margin, mode);
  }
  return {static_cast<double>(correct) / static_cast<double>(triplets.size()),
          loss_sum / static_cast<double>(triplets.size())};
}

RankingResult retrieve(const Embedder& embed, const DatasetSplit& split, const AttributeSpace& space,
                       const std::string& query_id, int attribute, long k, const std::map<int, EvalPartition>& pools) {
  if (attribute < 0 || attribute >= space.n()) throw ArgumentError("attribute index out of range");
  if (k < 1) throw ArgumentError("k must be positive");
  const ImageRecord& qrec = split.require(query_id);
  if (!qrec.labeled_for(attribute)) {
    throw ArgumentError("query '" + query_id + "' is not labeled for attribute '" +
                        space.names[static_cast<size_t>(attribute)] + "'");
  }
  auto pit = pools.find(attribute);
  if (pit == pools.end() || pit->second.candidate_ids.empty()) {
    throw ArgumentError("no candidate pool for attribute '" + space.names[static_cast<size_t>(attribute)] + "'");
  }

  const int q_sub = qrec.labels.at(attribute);
  const std::vector<double> qe = l2_normalize(embed(query_id, attribute));
  RankingResult result;
  result.query_id = query_id;
  result.attribute = attribute;
  for (const auto& cid : pit->second.candidate_ids) {
    if (cid == query_id) continue;
    const ImageRecord& rec = split.require(cid);
    RankedCandidate rc;
    rc.id = cid;
    rc.score = dot(qe, l2_normalize(embed(cid, attribute)));
    rc.relevant = rec.labels.at(attribute) == q_sub;
    result.ranked.push_back(std::move(rc));
  }
  std::sort(result.ranked.begin(), result.ranked.end(), [](const RankedCandidate& x, const RankedCandidate& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.id < y.id;
  });
  if (k < static_cast<long>(result.ranked.size())) {
    result.ranked.resize(static_cast<size_t>(k));
  } else if (k > static_cast<long>(result.ranked.size())) {
    result.truncated_request = true;
  }
  return result;
}

std::string ranking_to_csv(const RankingResult& r) {
  std::string out = "query_id,rank,candidate_id,score,relevant\n";
  char buf[512];
  for (size_t i = 0; i < r.ranked.size(); ++i) {
    const auto& c = r.ranked[i];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%s,%.17g,%d\n", r.query_id.c_str(), i + 1, c.id.c_str(), c.score,
                  c.relevant ? 1 : 0);
    out += buf;
  }
  return out;
}

json EvalReport::to_json() const {
  json per = json::object();
  for (const auto& [name, v] : per_attribute) per[name] = v;
  json j;
  j["per_attribute"] = per;
  j["overall_map"] = overall_map ? json(*overall_map) : json(nullptr);
  j["attribute_mean_map"] = attribute_mean_map ? json(*attribute_mean_map) : json(nullptr);
  j["triplet_accuracy"] = triplet_accuracy ? json(*triplet_accuracy) : json(nullptr);
  j["triplet_avg_loss"] = triplet_avg_loss ? json(*triplet_avg_loss) : json(nullptr);
  j["counts"] = {{"queries", counts.queries},
                 {"candidates", counts.candidates},
                 {"triplets", counts.triplets},
                 {"skipped_queries", counts.skipped_queries}};
  j["skipped_attributes"] = skipped_attributes;
  return j;
}

CachingEmbedder::CachingEmbedder(const Model& model, const DatasetSplit& split) : model_(model), split_(split) {}

std::vector<double> CachingEmbedder::operator()(const std::string& id, int attribute) {
  const auto key = std::make_pair(id, attribute);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const Tensor e = model_.embed(load_pixels(split_.require(id), model_.config().space, 0), attribute);
  auto [ins, _] = cache_.emplace(key, e.to_vector());
  return ins->second;
}

void CachingEmbedder::precompute(const std::vector<std::pair<std::string, int>>& pairs, int workers) {
  std::vector<std::pair<std::string, int>> todo;
  for (const auto& p : pairs) {
    if (!cache_.count(p)) todo.push_back(p);
  }
  if (todo.empty()) return;
  if (workers <= 1) {
    for (const auto& [id, a] : todo) (*this)(id, a);
    return;
  }
  std::vector<std::vector<double>> results(todo.size());
  std::vector<std::thread> threads;
  const size_t chunk = (todo.size() + static_cast<size_t>(workers) - 1) / static_cast<size_t>(workers);
  for (int w = 0; w < workers; ++w) {
    const size_t lo = static_cast<size_t>(w) * chunk;
    const size_t hi = std::min(todo.size(), lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([this, &todo, &results, lo, hi] {
      for (size_t i = lo; i < hi; ++i) {
        const Tensor e =
            model_.embed(load_pixels(split_.require(todo[i].first), model_.config().space, 0), todo[i].second);
        results[i] = e.to_vector();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (size_t i = 0; i < todo.size(); ++i) cache_.emplace(todo[i], std::move(results[i]));
}

Embedder CachingEmbedder::as_embedder() {
  return [this](const std::string& id, int attribute) { return (*this)(id, attribute); };
}

}  // namespace agman
