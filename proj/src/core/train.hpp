#pragma once

#include <vector>

#include "core/data.hpp"
#include "core/model.hpp"

namespace agman {

struct EpochStats {
  long epoch = 0;       // 0-based
  double loss_class = 0;
  double loss_triplet = 0;
  double loss_total = 0;
  double w0 = 0;
  double w1 = 0;
  double lr = 0;
};

// Dual-loss training loop: per epoch, triplets are resampled (seeded by
// epoch); batches cycle round-robin over attributes; each batch averages the
// cosine triplet loss over its triplets and the classification loss over the
// anchors, combines them with the learned w0/w1 weighting, and takes one
// optimizer step on the step-decayed learning rate. w0/w1 are clamped after
// every step.
std::vector<EpochStats> train_model(Model& model, const DatasetSplit& split);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace agman
