#pragma once

#include <functional>
#include <optional>

#include "core/data.hpp"
#include "core/model.hpp"
#include "json.hpp"

namespace agman {

// Supplies the embedding of a record under an attribute. Tests inject
// hand-built vectors; production wraps Model::embed.
using Embedder = std::function<std::vector<double>(const std::string& id, int attribute)>;

// Mean over relevant ranks k of (relevant in top-k)/k. relevance entries are
// 0/1 in ranked order; at least one entry must be relevant.
double average_precision(const std::vector<int>& relevance);

struct RankedCandidate {
  std::string id;
  double score = 0;
  bool relevant = false;
};

struct RankingResult {
  std::string query_id;
  int attribute = 0;
  std::vector<RankedCandidate> ranked;
  bool truncated_request = false;  // k exceeded the candidate count
};

struct EvalCounts {
  long queries = 0;
  long candidates = 0;
  long triplets = 0;
  long skipped_queries = 0;  // queries with no relevant candidate
};

struct EvalReport {
  std::map<std::string, double> per_attribute;  // attribute name -> MAP
  std::optional<double> overall_map;            // query-weighted mean AP
  std::optional<double> attribute_mean_map;     // unweighted mean of per-attribute MAPs
  std::optional<double> triplet_accuracy;
  std::optional<double> triplet_avg_loss;
  EvalCounts counts;
  std::vector<std::string> skipped_attributes;  // empty candidate or query pool

  nlohmann::json to_json() const;
};

// Attribute-specific retrieval MAP over the given query/candidate pools.
// Embeddings are L2-normalized before scoring; ties break by ascending id.
EvalReport evaluate_map(const Embedder& embed, const DatasetSplit& split, const AttributeSpace& space,
                        const std::map<int, EvalPartition>& pools);

// correct <=> cos(anchor,pos) > cos(anchor,neg); exact ties count as incorrect.
std::pair<bool, double> predict_triplet(const Embedder& embed, const Triplet& t);

// (accuracy, mean triplet loss) over a non-empty list.
std::pair<double, double> evaluate_triplets(const Embedder& embed, const std::vector<Triplet>& triplets, double margin,
                                            TripletMode mode);

RankingResult retrieve(const Embedder& embed, const DatasetSplit& split, const AttributeSpace& space,
                       const std::string& query_id, int attribute, long k, const std::map<int, EvalPartition>& pools);

std::string ranking_to_csv(const RankingResult& r);

// Embedder over a model with per-(id, attribute) caching; workers > 1
// precomputes the listed pairs in parallel (deterministic result).
class CachingEmbedder {
 public:
  CachingEmbedder(const Model& model, const DatasetSplit& split);

  std::vector<double> operator()(const std::string& id, int attribute);
  void precompute(const std::vector<std::pair<std::string, int>>& pairs, int workers);
  Embedder as_embedder();

 private:
  const Model& model_;
  const DatasetSplit& split_;
  std::map<std::pair<std::string, int>, std::vector<double>> cache_;
};

}  // namespace agman
