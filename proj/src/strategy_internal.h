#pragma once

#include <memory>

#include "fanns/serialize.h"
#include "fanns/strategies.h"

namespace fanns::detail {

using Loader = std::unique_ptr<StrategyIndex> (*)(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);

std::unique_ptr<StrategyIndex> load_postfilter_hnsw(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_postfilter_ivfpq(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_acorn_gamma(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_acorn_one(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_ung(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_filtered_vamana(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_stitched_vamana(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_nhq(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);
std::unique_ptr<StrategyIndex> load_caps(BinaryReader&, std::shared_ptr<const Dataset>, Metric, const ParamMap&);

void save_adjacency(BinaryWriter& out, const Adjacency& adjacency);
Adjacency load_adjacency(BinaryReader& in, std::size_t n);

/// Top-k of `candidates` by (distance, id), deduplicated by id.
std::vector<Neighbor> top_k(std::vector<Neighbor> candidates, std::size_t k);

int param_int(const ParamMap& params, const std::string& key);

}  // namespace fanns::detail
