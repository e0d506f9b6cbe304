#include "lhts/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lhts/numerics/log_space.hpp"

namespace lhts::oracle {

using numerics::kNegInf;

SequenceSpace::SequenceSpace(int vocab_size, int length, std::size_t cap)
    : vocab_size_(vocab_size), length_(length), size_(1) {
  if (vocab_size < 1 || length < 0) throw std::invalid_argument("SequenceSpace: invalid shape");
  for (int i = 0; i < length; ++i) {
    if (size_ > cap / static_cast<std::size_t>(vocab_size)) {
      throw std::length_error("sequence space " + std::to_string(vocab_size) + "^" +
                              std::to_string(length) + " exceeds the enumeration cap of " +
                              std::to_string(cap) + " entries");
    }
    size_ *= static_cast<std::size_t>(vocab_size);
  }
}

Sequence SequenceSpace::sequence(std::size_t index) const {
  Sequence x(static_cast<std::size_t>(length_));
  for (std::size_t i = x.size(); i-- > 0;) {
    x[i] = static_cast<Token>(index % static_cast<std::size_t>(vocab_size_));
    index /= static_cast<std::size_t>(vocab_size_);
  }
  return x;
}

std::size_t SequenceSpace::index(std::span<const Token> x) const {
  if (x.size() != static_cast<std::size_t>(length_)) throw std::invalid_argument("sequence length mismatch");
  std::size_t idx = 0;
  for (Token t : x) {
    if (t < 0 || t >= vocab_size_) throw std::out_of_range("token out of vocab");
    idx = idx * static_cast<std::size_t>(vocab_size_) + static_cast<std::size_t>(t);
  }
  return idx;
}

double CategoricalTable::prob(std::size_t index) const { return std::exp(log_probs.at(index)); }

double CategoricalTable::log_prob(std::span<const Token> x) const {
  return log_probs[space().index(x)];
}

double CategoricalTable::log_total() const { return numerics::log_sum_exp(log_probs); }

CategoricalTable CategoricalTable::from_log_weights(int vocab_size, int length,
                                                    std::vector<double> log_weights) {
  CategoricalTable t{vocab_size, length, std::move(log_weights), 0.0};
  if (t.log_probs.size() != t.space().size()) throw std::invalid_argument("table size mismatch");
  const double lse = numerics::log_sum_exp(t.log_probs);
  for (double& v : t.log_probs) v -= lse;
  return t;
}

namespace {

// Depth-first walk over prefixes; `visit_conditional` returns the per-position
// log conditional for a prefix. Leaves are reached in lexicographic order.
CategoricalTable chain_rule_table(
    int vocab_size, int length, std::size_t cap,
    const std::function<std::vector<double>(std::span<const Token>)>& conditional) {
  SequenceSpace space(vocab_size, length, cap);
  CategoricalTable table{vocab_size, length, std::vector<double>(space.size(), 0.0), 0.0};
  Sequence prefix;
  prefix.reserve(static_cast<std::size_t>(length));
  std::size_t next = 0;
  std::function<void(double)> walk = [&](double acc) {
    if (prefix.size() == static_cast<std::size_t>(length)) {
      table.log_probs[next++] = acc;
      return;
    }
    const auto cond = conditional(prefix);
    for (int k = 0; k < vocab_size; ++k) {
      prefix.push_back(k);
      walk(acc + cond[static_cast<std::size_t>(k)]);
      prefix.pop_back();
    }
  };
  walk(0.0);
  return table;
}

}  // namespace

CategoricalTable enumerate_joint(const ar::Model& model, int length, std::optional<double> t_cond,
                                 std::size_t cap) {
  if (length > model.max_length()) throw std::invalid_argument("length exceeds model max_length");
  return chain_rule_table(model.vocab_size(), length, cap, [&](std::span<const Token> prefix) {
    return model.conditional_log_probs(prefix, t_cond);
  });
}

CategoricalTable temperature_scale_exact(const CategoricalTable& table, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be > 0 (use argmax_joint for the T -> 0 limit)");
  }
  if (temperature == 1.0) {
    CategoricalTable same = table;
    same.log_partition = 0.0;
    return same;
  }
  CategoricalTable out = table;
  for (double& v : out.log_probs) v /= temperature;
  out.log_partition = numerics::log_sum_exp(out.log_probs);
  for (double& v : out.log_probs) v -= out.log_partition;
  return out;
}

CategoricalTable myopic_scale_joint(const ar::Model& model, double temperature,
                                    std::optional<double> t_cond, std::size_t cap) {
  if (temperature < 0.0) throw std::invalid_argument("myopic temperature must be >= 0");
  return chain_rule_table(model.vocab_size(), model.max_length(), cap, [&](std::span<const Token> prefix) {
    const auto lp = model.conditional_log_probs(prefix, t_cond);
    if (temperature == 1.0) return lp;
    return ar::myopic_conditional(lp, temperature);
  });
}

std::string KlResult::diagnostic() const {
  if (!support_violation) return {};
  std::ostringstream os;
  os << "q has no mass on sequence [";
  for (std::size_t i = 0; i < support_violation->size(); ++i) {
    os << (i ? " " : "") << (*support_violation)[i];
  }
  os << "] where p > 0";
  return os.str();
}

namespace {

void check_same_space(const CategoricalTable& p, const CategoricalTable& q) {
  if (p.vocab_size != q.vocab_size || p.length != q.length || p.size() != q.size()) {
    throw std::invalid_argument("tables are over different sequence spaces");
  }
}

}  // namespace

KlResult kl_divergence(const CategoricalTable& p, const CategoricalTable& q) {
  check_same_space(p, q);
  KlResult result;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lp = p.log_probs[i];
    if (lp == kNegInf) continue;
    const double lq = q.log_probs[i];
    if (lq == kNegInf) {
      result.value = std::numeric_limits<double>::infinity();
      result.support_violation = p.space().sequence(i);
      return result;
    }
    total += std::exp(lp) * (lp - lq);
  }
  result.value = std::max(total, 0.0);
  return result;
}

double entropy(const CategoricalTable& table) {
  double h = 0.0;
  for (double lp : table.log_probs) {
    if (lp == kNegInf) continue;
    h -= std::exp(lp) * lp;
  }
  return std::max(h, 0.0);
}

Sequence argmax_joint(const CategoricalTable& table) {
  if (table.log_probs.empty()) throw std::invalid_argument("argmax_joint: empty table");
  // max_element returns the first maximizer, i.e. the lexicographically smallest.
  const auto best = std::max_element(table.log_probs.begin(), table.log_probs.end());
  return table.space().sequence(static_cast<std::size_t>(best - table.log_probs.begin()));
}

double total_variation(const CategoricalTable& p, const CategoricalTable& q) {
  check_same_space(p, q);
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(std::exp(p.log_probs[i]) - std::exp(q.log_probs[i]));
  return 0.5 * tv;
}

CategoricalTable empirical_table(int vocab_size, int length, std::span<const Sequence> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_table: no samples");
  SequenceSpace space(vocab_size, length);
  std::vector<double> counts(space.size(), 0.0);
  for (const auto& x : samples) counts[space.index(x)] += 1.0;
  const double n = static_cast<double>(samples.size());
  CategoricalTable t{vocab_size, length, std::vector<double>(space.size()), 0.0};
  for (std::size_t i = 0; i < counts.size(); ++i) t.log_probs[i] = counts[i] > 0 ? std::log(counts[i] / n) : kNegInf;
  return t;
}

std::vector<Sequence> sample_table(const CategoricalTable& table, std::size_t n, numerics::Rng& rng) {
  std::vector<double> cdf(table.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    acc += table.prob(i);
    cdf[i] = acc;
  }
  const auto space = table.space();
  std::vector<Sequence> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    out.push_back(space.sequence(static_cast<std::size_t>(it - cdf.begin())));
  }
  return out;
}

ar::Model tabular_model_from_table(const CategoricalTable& table) {
  const int V = table.vocab_size;
  const int L = table.length;
  ar::Model model = ar::Model::tabular(V, L);
  // Log mass of every prefix, level by level from the full sequences upward.
  // level[i] holds V^i entries in lexicographic order.
  std::vector<std::vector<double>> level(static_cast<std::size_t>(L) + 1);
  level[static_cast<std::size_t>(L)] = table.log_probs;
  for (int i = L; i-- > 0;) {
    const auto& child = level[static_cast<std::size_t>(i) + 1];
    auto& parent = level[static_cast<std::size_t>(i)];
    parent.resize(child.size() / static_cast<std::size_t>(V));
    for (std::size_t j = 0; j < parent.size(); ++j) {
      const std::span<const double> kids(child.data() + j * static_cast<std::size_t>(V), static_cast<std::size_t>(V));
      const bool empty = std::all_of(kids.begin(), kids.end(), [](double v) { return v == kNegInf; });
      parent[j] = empty ? kNegInf : numerics::log_sum_exp(kids);
    }
  }
  for (int i = 0; i < L; ++i) {
    SequenceSpace prefixes(V, i);
    const auto& mass = level[static_cast<std::size_t>(i)];
    const auto& child = level[static_cast<std::size_t>(i) + 1];
    for (std::size_t j = 0; j < prefixes.size(); ++j) {
      std::vector<double> logits(static_cast<std::size_t>(V), 0.0);
      if (mass[j] != kNegInf) {
        for (std::size_t k = 0; k < logits.size(); ++k) logits[k] = child[j * logits.size() + k] - mass[j];
      }
      model.set_conditional_logits(prefixes.sequence(j), logits);
    }
  }
  return model;
}

std::string to_json(const CategoricalTable& table) {
  nlohmann::json j;
  j["vocab_size"] = table.vocab_size;
  j["length"] = table.length;
  auto arr = nlohmann::json::array();
  for (double v : table.log_probs) arr.push_back(v == kNegInf ? nlohmann::json(nullptr) : nlohmann::json(v));
  j["log_probs"] = arr;
  return j.dump();
}

CategoricalTable table_from_json(std::string_view json) {
  const auto j = nlohmann::json::parse(json);
  CategoricalTable t;
  t.vocab_size = j.at("vocab_size").get<int>();
  t.length = j.at("length").get<int>();
  for (const auto& v : j.at("log_probs")) t.log_probs.push_back(v.is_null() ? kNegInf : v.get<double>());
  if (t.log_probs.size() != t.space().size()) throw std::invalid_argument("table JSON has the wrong number of entries");
  return t;
}

}  // namespace lhts::oracle
