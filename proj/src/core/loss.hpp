#pragma once

#include <span>

#include "core/autograd.hpp"
#include "core/config.hpp"

namespace agman {

// Scalar reference implementations of the loss surface. The *_graph variants
// build the same math on a tape for training.

// Mean over entries of -w[y*log(sigmoid(x)) + (1-y)*log(1-sigmoid(x))].
double classification_loss(std::span<const double> logits, std::span<const double> targets,
                           std::span<const double> weights);

// u.v / (|u||v|); throws DegenerateInputError on a zero-norm input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// similarity_corrected: max{0, m - s_p + s_n}; as_written: max{0, m + s_p - s_n}.
double triplet_loss(std::span<const double> anchor, std::span<const double> positive, std::span<const double> negative,
                    double margin, TripletMode mode);

// 0.5*e^{w0}*L_c + w0 + 0.5*e^{w1}*L_t + w1, with w0/w1 clamped to [-10,10]
// before use.
double combined_loss(double loss_class, double loss_triplet, double w0, double w1);

inline constexpr double kLossWeightClamp = 10.0;

Var classification_loss_graph(Tape& t, const Var& logits, const Tensor& targets, const Tensor& weights);
Var cosine_similarity_graph(Tape& t, const Var& u, const Var& v);
Var triplet_loss_graph(Tape& t, const Var& anchor, const Var& positive, const Var& negative, double margin,
                       TripletMode mode);
// include_classification=false drops the w0/L_c terms entirely (w0 frozen).
Var combined_loss_graph(Tape& t, const Var& loss_class, const Var& loss_triplet, const Var& w0, const Var& w1,
                        bool include_classification = true);

}  // namespace agman
