#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lhts/ar_model.hpp"
#include "lhts/oracle.hpp"

namespace lhts::scenarios {

/// Shared-prefix scenario over V = 4, L = 2. Three full answers have joint
/// probability 0.3 each; two of them start with the same token. The
/// remaining 0.1 is spread evenly over the other 13 sequences.
namespace shared_prefix {
inline constexpr ar::Token kTap = 0;
inline constexpr ar::Token kClose = 1;
inline constexpr ar::Token kCabinet = 2;
inline constexpr ar::Token kDoor = 3;
inline constexpr std::array<std::string_view, 4> kWords{"tap", "close", "cabinet", "door"};

/// The three answers in the order (tap cabinet, tap door, close door).
std::array<ar::Sequence, 3> answers();

/// `relabel[k]` is the token used for word k; the identity by default.
oracle::CategoricalTable table(std::span<const ar::Token> relabel = {});
ar::Model model(std::span<const ar::Token> relabel = {});
}  // namespace shared_prefix

/// Two-token model where myopic sharpening and joint sharpening disagree:
/// p(x1) = [0.6, 0.4], p(x2 | a) = [0.55, 0.45], p(x2 | b) = [0.9, 0.1].
ar::Model myopic_counterexample();

/// Positions independent with per-position marginals given per position.
ar::Model independent_positions(const std::vector<std::vector<double>>& marginals);

/// i.i.d. positions with one shared marginal (LINEAR model without context).
ar::Model iid_model(std::span<const double> marginal, int length);

/// TABULAR model with N(0, skew^2) logits in every row.
ar::Model random_tabular(int vocab_size, int length, double skew, std::uint64_t seed);

/// Dataset of n full-length sequences drawn from `model` at temperature 1.
std::vector<ar::Sequence> sample_dataset(const ar::Model& model, std::size_t n, std::uint64_t seed);

}  // namespace lhts::scenarios
