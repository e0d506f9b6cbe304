#include "lhts/scenarios.hpp"

#include <cmath>
#include <stdexcept>

namespace lhts::scenarios {

namespace shared_prefix {

std::array<ar::Sequence, 3> answers() {
  return {ar::Sequence{kTap, kCabinet}, ar::Sequence{kTap, kDoor}, ar::Sequence{kClose, kDoor}};
}

oracle::CategoricalTable table(std::span<const ar::Token> relabel) {
  if (!relabel.empty() && relabel.size() != kWords.size()) throw std::invalid_argument("relabel needs one token per word");
  auto map = [&](ar::Token t) { return relabel.empty() ? t : relabel[static_cast<std::size_t>(t)]; };
  const oracle::SequenceSpace space(4, 2);
  std::vector<double> probs(space.size(), 0.1 / 13.0);
  for (const auto& a : answers()) probs[space.index(ar::Sequence{map(a[0]), map(a[1])})] = 0.3;
  std::vector<double> log_probs(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) log_probs[i] = std::log(probs[i]);
  return oracle::CategoricalTable::from_log_weights(4, 2, std::move(log_probs));
}

ar::Model model(std::span<const ar::Token> relabel) { return oracle::tabular_model_from_table(table(relabel)); }

}  // namespace shared_prefix

ar::Model myopic_counterexample() {
  ar::Model m = ar::Model::tabular(2, 2);
  m.set_conditional_logits(ar::Sequence{}, std::vector{std::log(0.6), std::log(0.4)});
  m.set_conditional_logits(ar::Sequence{0}, std::vector{std::log(0.55), std::log(0.45)});
  m.set_conditional_logits(ar::Sequence{1}, std::vector{std::log(0.9), std::log(0.1)});
  return m;
}

ar::Model independent_positions(const std::vector<std::vector<double>>& marginals) {
  if (marginals.empty()) throw std::invalid_argument("independent_positions: no positions");
  const int V = static_cast<int>(marginals.front().size());
  const int L = static_cast<int>(marginals.size());
  ar::Model m = ar::Model::tabular(V, L);
  for (int i = 0; i < L; ++i) {
    std::vector<double> logits(static_cast<std::size_t>(V));
    for (int k = 0; k < V; ++k) logits[static_cast<std::size_t>(k)] = std::log(marginals[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
    const oracle::SequenceSpace prefixes(V, i);
    for (std::size_t j = 0; j < prefixes.size(); ++j) m.set_conditional_logits(prefixes.sequence(j), logits);
  }
  return m;
}

ar::Model iid_model(std::span<const double> marginal, int length) {
  const int V = static_cast<int>(marginal.size());
  ar::Model m = ar::Model::linear(V, length, 0);
  // With no context window the features are the position one-hot alone; the
  // bias carries the marginal.
  auto& p = m.parameters();
  const std::size_t bias = p.size() - marginal.size();
  for (std::size_t k = 0; k < marginal.size(); ++k) p[bias + k] = std::log(marginal[k]);
  return m;
}

ar::Model random_tabular(int vocab_size, int length, double skew, std::uint64_t seed) {
  ar::Model m = ar::Model::tabular(vocab_size, length);
  numerics::Rng rng = numerics::Rng::derive(seed, "random-tabular");
  for (double& v : m.parameters()) v = skew * rng.normal();
  return m;
}

std::vector<ar::Sequence> sample_dataset(const ar::Model& model, std::size_t n, std::uint64_t seed) {
  numerics::Rng rng = numerics::Rng::derive(seed, "dataset");
  return ar::sample(model, n, 1.0, std::nullopt, rng).sequences;
}

}  // namespace lhts::scenarios
