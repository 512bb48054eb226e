#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "crules/error.hpp"
#include "crules/schema.hpp"

namespace crules {

struct Literal {
  int concept_index = 0;
  bool positive = true;
  friend bool operator==(const Literal&, const Literal&) = default;
  friend auto operator<=>(const Literal&, const Literal&) = default;
};

// Conjunction of literals, sorted by concept index, one literal per concept.
// The empty term is TRUE.
struct Term {
  std::vector<Literal> literals;
  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;
};

// Returns nothing when the literal list is contradictory (a concept required
// both positive and negative), which denotes an unsatisfiable term.
inline std::optional<Term> try_make_term(std::vector<Literal> literals) {
  std::sort(literals.begin(), literals.end());
  literals.erase(std::unique(literals.begin(), literals.end()), literals.end());
  for (std::size_t i = 1; i < literals.size(); ++i)
    if (literals[i].concept_index == literals[i - 1].concept_index) return std::nullopt;
  return Term{std::move(literals)};
}

inline Term make_term(std::vector<Literal> literals) {
  auto t = try_make_term(std::move(literals));
  if (!t) throw invalid_argument_error("contradictory term");
  return *t;
}

// Disjunction of terms. No terms means FALSE; a term with no literals means
// TRUE. `width` is the number of concepts rows are expected to carry.
struct DnfFormula {
  int width = 0;
  std::vector<Term> terms;
  friend bool operator==(const DnfFormula&, const DnfFormula&) = default;
};

inline DnfFormula make_formula(int width, std::vector<Term> terms) {
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return DnfFormula{width, std::move(terms)};
}

struct LogicConfig {
  double threshold = 0.5;  // binarisation cut for soft concept activations
};

// Full-width conjunction describing one sample; literal j is positive iff the
// activation clears the threshold (inclusive).
inline Term term_from_sample(const std::vector<double>& concepts, const LogicConfig& cfg = {}) {
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0))
    throw invalid_argument_error("threshold must lie strictly between 0 and 1");
  std::vector<Literal> lits;
  lits.reserve(concepts.size());
  for (std::size_t j = 0; j < concepts.size(); ++j)
    lits.push_back({static_cast<int>(j), concepts[j] >= cfg.threshold});
  return Term{std::move(lits)};
}

// Keeps only the literals whose concept is in `relevant` (sorted).
inline Term project_term(const Term& term, const std::vector<int>& relevant) {
  std::vector<Literal> lits;
  for (const Literal& l : term.literals)
    if (std::binary_search(relevant.begin(), relevant.end(), l.concept_index)) lits.push_back(l);
  return Term{std::move(lits)};
}

inline bool eval_term(const Term& term, const std::vector<char>& row) {
  for (const Literal& l : term.literals) {
    if (l.concept_index < 0 || l.concept_index >= static_cast<int>(row.size()))
      throw invalid_argument_error("literal outside the concept row",
                                   {{"concept", l.concept_index}, {"row_width", row.size()}});
    if ((row[static_cast<std::size_t>(l.concept_index)] != 0) != l.positive) return false;
  }
  return true;
}

inline bool eval_dnf(const DnfFormula& f, const std::vector<char>& row) {
  if (static_cast<int>(row.size()) != f.width)
    throw invalid_argument_error("concept row width does not match the formula",
                                 {{"formula_width", f.width}, {"row_width", row.size()}});
  return std::any_of(f.terms.begin(), f.terms.end(),
                     [&](const Term& t) { return eval_term(t, row); });
}

inline std::vector<int> mentioned_concepts(const DnfFormula& f) {
  std::set<int> seen;
  for (const Term& t : f.terms)
    for (const Literal& l : t.literals) seen.insert(l.concept_index);
  return {seen.begin(), seen.end()};
}

// ---------------------------------------------------------------------------
// Quine-McCluskey minimisation.
//
// Cubes are (bits, mask) pairs over the mentioned-variable positions: a set
// mask bit constrains that variable to the corresponding bits value; clear
// mask bits are dashes. Prime implicants are grown over ON ∪ DC; the cover is
// selected over ON only, preferring fewer terms, then fewer literals, then
// the lexicographically smallest term list.
// ---------------------------------------------------------------------------

namespace qm {

struct Cube {
  std::uint32_t bits = 0;
  std::uint32_t mask = 0;
  friend bool operator==(const Cube&, const Cube&) = default;
  friend auto operator<=>(const Cube&, const Cube&) = default;
};

inline std::vector<Cube> prime_implicants(const std::set<std::uint32_t>& care_minterms, int m) {
  std::set<Cube> current;
  const std::uint32_t full = m == 32 ? ~0u : ((1u << m) - 1u);
  for (std::uint32_t v : care_minterms) current.insert({v, full});
  std::vector<Cube> primes;
  while (!current.empty()) {
    std::set<Cube> next;
    std::map<Cube, bool> combined;
    for (const Cube& c : current) combined[c] = false;
    // Group by (mask, popcount) so only one-bit-apart same-mask cubes meet.
    std::map<std::pair<std::uint32_t, int>, std::vector<Cube>> groups;
    for (const Cube& c : current)
      groups[{c.mask, std::popcount(c.bits)}].push_back(c);
    for (const auto& [key, cubes] : groups) {
      const auto up = groups.find({key.first, key.second + 1});
      if (up == groups.end()) continue;
      for (const Cube& a : cubes)
        for (const Cube& b : up->second) {
          const std::uint32_t diff = a.bits ^ b.bits;
          if (std::popcount(diff) == 1 && (diff & a.mask)) {
            next.insert({a.bits & ~diff, a.mask & ~diff});
            combined[a] = true;
            combined[b] = true;
          }
        }
    }
    for (const auto& [cube, was_combined] : combined)
      if (!was_combined) primes.push_back(cube);
    current = std::move(next);
  }
  std::sort(primes.begin(), primes.end());
  return primes;
}

struct Candidate {
  std::size_t term_count = 0;
  int literal_count = 0;
  std::vector<Cube> cubes;  // sorted
  bool better_than(const Candidate& other) const {
    if (term_count != other.term_count) return term_count < other.term_count;
    if (literal_count != other.literal_count) return literal_count < other.literal_count;
    return cubes < other.cubes;
  }
};

// Exhaustive branch-and-bound minimum cover (with most-constrained-minterm
// branching); only used for small variable counts.
struct ExactCover {
  const std::vector<Cube>& primes;
  const std::vector<std::vector<int>>& prime_covers;   // prime -> ON indices
  const std::vector<std::vector<int>>& minterm_covers; // ON index -> primes
  std::size_t on_count;
  Candidate best;
  bool have_best = false;

  void run() {
    std::vector<char> covered(on_count, 0);
    std::vector<int> chosen;
    recurse(covered, 0, chosen, 0);
  }

  void recurse(std::vector<char>& covered, std::size_t covered_count, std::vector<int>& chosen,
               int literal_count) {
    if (have_best) {
      if (chosen.size() > best.term_count) return;
      if (chosen.size() == best.term_count && covered_count < on_count) return;
    }
    if (covered_count == on_count) {
      Candidate cand;
      cand.term_count = chosen.size();
      cand.literal_count = literal_count;
      for (int p : chosen) cand.cubes.push_back(primes[static_cast<std::size_t>(p)]);
      std::sort(cand.cubes.begin(), cand.cubes.end());
      if (!have_best || cand.better_than(best)) {
        best = std::move(cand);
        have_best = true;
      }
      return;
    }
    // Branch on the uncovered minterm with the fewest covering primes.
    int pick = -1;
    std::size_t pick_options = ~std::size_t{0};
    for (std::size_t i = 0; i < on_count; ++i) {
      if (covered[i]) continue;
      const auto options = minterm_covers[i].size();
      if (options < pick_options) {
        pick_options = options;
        pick = static_cast<int>(i);
      }
    }
    if (pick < 0) return;  // unreachable: covered_count < on_count implies an uncovered minterm
    for (int p : minterm_covers[static_cast<std::size_t>(pick)]) {
      std::vector<int> newly;
      for (int mt : prime_covers[static_cast<std::size_t>(p)]) {
        if (!covered[static_cast<std::size_t>(mt)]) {
          covered[static_cast<std::size_t>(mt)] = 1;
          newly.push_back(mt);
        }
      }
      chosen.push_back(p);
      recurse(covered, covered_count + newly.size(), chosen,
              literal_count + std::popcount(primes[static_cast<std::size_t>(p)].mask));
      chosen.pop_back();
      for (int mt : newly) covered[static_cast<std::size_t>(mt)] = 0;
    }
  }
};

// Greedy fallback for wide formulas: repeatedly take the prime covering the
// most uncovered minterms (ties: fewer literals, then cube order).
inline std::vector<Cube> greedy_cover(const std::vector<Cube>& primes,
                                      const std::vector<std::vector<int>>& prime_covers,
                                      std::size_t on_count) {
  std::vector<char> covered(on_count, 0);
  std::size_t covered_count = 0;
  std::vector<Cube> chosen;
  while (covered_count < on_count) {
    int best_p = -1;
    std::size_t best_gain = 0;
    for (std::size_t p = 0; p < primes.size(); ++p) {
      std::size_t gain = 0;
      for (int mt : prime_covers[p])
        if (!covered[static_cast<std::size_t>(mt)]) ++gain;
      if (gain == 0) continue;
      if (best_p < 0 || gain > best_gain ||
          (gain == best_gain &&
           std::popcount(primes[p].mask) < std::popcount(primes[static_cast<std::size_t>(best_p)].mask))) {
        best_p = static_cast<int>(p);
        best_gain = gain;
      }
    }
    if (best_p < 0) throw Error("cover-failed", "prime implicants do not cover the on-set");
    chosen.push_back(primes[static_cast<std::size_t>(best_p)]);
    for (int mt : prime_covers[static_cast<std::size_t>(best_p)]) {
      if (!covered[static_cast<std::size_t>(mt)]) {
        covered[static_cast<std::size_t>(mt)] = 1;
        ++covered_count;
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// ON/DC minterm minimisation over m variables; returns the chosen cubes.
inline std::vector<Cube> minimize(const std::set<std::uint32_t>& on,
                                  const std::set<std::uint32_t>& dc, int m) {
  if (on.empty()) return {};
  std::set<std::uint32_t> care = on;
  care.insert(dc.begin(), dc.end());
  const auto primes = prime_implicants(care, m);
  std::vector<std::uint32_t> on_list(on.begin(), on.end());
  std::vector<std::vector<int>> prime_covers(primes.size());
  std::vector<std::vector<int>> minterm_covers(on_list.size());
  for (std::size_t p = 0; p < primes.size(); ++p)
    for (std::size_t i = 0; i < on_list.size(); ++i)
      if ((on_list[i] & primes[p].mask) == primes[p].bits) {
        prime_covers[p].push_back(static_cast<int>(i));
        minterm_covers[i].push_back(static_cast<int>(p));
      }
  if (m <= 16) {
    ExactCover solver{primes, prime_covers, minterm_covers, on_list.size(), {}, false};
    solver.run();
    if (!solver.have_best) throw Error("cover-failed", "prime implicants do not cover the on-set");
    return solver.best.cubes;
  }
  return greedy_cover(primes, prime_covers, on_list.size());
}

}  // namespace qm

namespace detail {

// Expands a formula's terms into minterms over the positions of `vars`
// (sorted concept indices). Every term must only mention vars.
inline std::set<std::uint32_t> expand_minterms(const DnfFormula& f, const std::vector<int>& vars) {
  const int m = static_cast<int>(vars.size());
  std::set<std::uint32_t> out;
  for (const Term& t : f.terms) {
    std::uint32_t bits = 0, mask = 0;
    for (const Literal& l : t.literals) {
      const auto it = std::lower_bound(vars.begin(), vars.end(), l.concept_index);
      const auto pos = static_cast<std::uint32_t>(it - vars.begin());
      mask |= (1u << pos);
      if (l.positive) bits |= (1u << pos);
    }
    const std::uint32_t full = m == 32 ? ~0u : ((1u << m) - 1u);
    const std::uint32_t free = full & ~mask;
    // enumerate all subsets of the free positions
    std::uint32_t sub = 0;
    while (true) {
      out.insert(bits | sub);
      if (sub == free) break;
      sub = (sub - free) & free;
    }
  }
  return out;
}

inline Term cube_to_term(const qm::Cube& cube, const std::vector<int>& vars) {
  std::vector<Literal> lits;
  for (std::size_t pos = 0; pos < vars.size(); ++pos)
    if (cube.mask & (1u << pos)) lits.push_back({vars[pos], (cube.bits >> pos & 1u) != 0});
  return Term{std::move(lits)};
}

inline void check_width_guard(std::size_t mentioned) {
  if (mentioned > 24)
    throw Error("width-guard",
                "minimisation over more than 24 mentioned concepts; project onto the relevant "
                "subset first",
                {{"mentioned", mentioned}});
}

}  // namespace detail

// Exact minimisation (for <= 16 mentioned concepts; greedy beyond) treating
// every concept combination outside the formula as false.
inline DnfFormula simplify(const DnfFormula& f) {
  if (f.terms.empty()) return make_formula(f.width, {});
  for (const Term& t : f.terms)
    if (t.literals.empty()) return make_formula(f.width, {Term{}});
  const auto vars = mentioned_concepts(f);
  detail::check_width_guard(vars.size());
  const auto on = detail::expand_minterms(f, vars);
  const auto cubes = qm::minimize(on, {}, static_cast<int>(vars.size()));
  std::vector<Term> terms;
  terms.reserve(cubes.size());
  for (const auto& c : cubes) terms.push_back(detail::cube_to_term(c, vars));
  return make_formula(f.width, std::move(terms));
}

// Minimisation where combinations outside both `on` and `off` are free to go
// either way. The result covers `on`, avoids `off`, and is otherwise as short
// as the don't-cares allow.
inline DnfFormula minimize_with_dontcares(const DnfFormula& on, const DnfFormula& off) {
  if (on.width != off.width)
    throw invalid_argument_error("on/off formulas must share a width");
  if (on.terms.empty()) return make_formula(on.width, {});
  std::set<int> var_set;
  for (int v : mentioned_concepts(on)) var_set.insert(v);
  for (int v : mentioned_concepts(off)) var_set.insert(v);
  const std::vector<int> vars(var_set.begin(), var_set.end());
  detail::check_width_guard(vars.size());
  const auto on_minterms = detail::expand_minterms(on, vars);
  const auto off_minterms = detail::expand_minterms(off, vars);
  for (std::uint32_t v : on_minterms)
    if (off_minterms.count(v))
      throw Error("on-off-overlap", "a concept combination is claimed by both polarities");
  std::set<std::uint32_t> dc;
  const std::uint32_t total = 1u << vars.size();
  for (std::uint32_t v = 0; v < total; ++v)
    if (!on_minterms.count(v) && !off_minterms.count(v)) dc.insert(v);
  const auto cubes = qm::minimize(on_minterms, dc, static_cast<int>(vars.size()));
  std::vector<Term> terms;
  terms.reserve(cubes.size());
  for (const auto& c : cubes) terms.push_back(detail::cube_to_term(c, vars));
  return make_formula(on.width, std::move(terms));
}

// Result of aggregating one label's samples: the distinct realised terms plus
// a conflict report for rows the other labels also realise.
struct ClassFormulaResult {
  DnfFormula formula;
  int positive_rows = 0;
  int contradictory_rows = 0;
  std::vector<Term> contradictory_terms;
};

// Distinct projected sample terms of the target label, minus any term also
// realised under a different label. Aborts when contradictions exceed 10% of
// the target rows (only possible with noisy concepts).
inline ClassFormulaResult class_formula_detailed(const std::vector<std::vector<double>>& samples,
                                                 const std::vector<int>& labels, int target_label,
                                                 const std::vector<int>& relevant,
                                                 const LogicConfig& cfg = {}) {
  if (samples.empty()) throw invalid_argument_error("class_formula needs at least one sample");
  if (samples.size() != labels.size())
    throw invalid_argument_error("samples/labels size mismatch");
  std::vector<int> rel = relevant;
  std::sort(rel.begin(), rel.end());
  std::set<Term> positive, negative;
  int positive_rows = 0;
  std::map<Term, int> positive_row_counts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Term t = project_term(term_from_sample(samples[i], cfg), rel);
    if (labels[i] == target_label) {
      ++positive_rows;
      positive.insert(t);
      ++positive_row_counts[t];
    } else {
      negative.insert(t);
    }
  }
  ClassFormulaResult out;
  out.positive_rows = positive_rows;
  std::vector<Term> kept;
  for (const Term& t : positive) {
    if (negative.count(t)) {
      out.contradictory_terms.push_back(t);
      out.contradictory_rows += positive_row_counts[t];
    } else {
      kept.push_back(t);
    }
  }
  const int width = static_cast<int>(samples.front().size());
  if (positive_rows > 0 && kept.empty()) {
    throw Error("empty-formula", "every row of the target label is contradicted by another label",
                {{"target_label", target_label},
                 {"contradictory_rows", out.contradictory_rows},
                 {"positive_rows", positive_rows}});
  }
  if (out.contradictory_rows * 10 > positive_rows) {
    throw Error("contradictory-data", "more than 10% of the target label's rows are contradicted",
                {{"target_label", target_label},
                 {"contradictory_rows", out.contradictory_rows},
                 {"positive_rows", positive_rows}});
  }
  out.formula = make_formula(width, std::move(kept));
  return out;
}

inline DnfFormula class_formula(const std::vector<std::vector<double>>& samples,
                                const std::vector<int>& labels, int target_label,
                                const std::vector<int>& relevant, const LogicConfig& cfg = {}) {
  return class_formula_detailed(samples, labels, target_label, relevant, cfg).formula;
}

// Exhaustive semantic comparison over all assignments of k concepts.
inline bool equivalent(const DnfFormula& f, const DnfFormula& g, int k) {
  if (k < 0 || k > 20)
    throw invalid_argument_error("exhaustive equivalence is limited to 20 concepts", {{"k", k}});
  for (const auto* h : {&f, &g})
    for (int v : mentioned_concepts(*h))
      if (v >= k) throw invalid_argument_error("formula mentions a concept beyond k", {{"concept", v}});
  std::vector<char> row(static_cast<std::size_t>(k), 0);
  const std::uint32_t total = 1u << k;
  for (std::uint32_t assignment = 0; assignment < total; ++assignment) {
    for (int j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = (assignment >> j) & 1u;
    bool fv = false, gv = false;
    for (const Term& t : f.terms)
      if (eval_term(t, row)) { fv = true; break; }
    for (const Term& t : g.terms)
      if (eval_term(t, row)) { gv = true; break; }
    if (fv != gv) return false;
  }
  return true;
}

// "hasVisitedNeighbours(n)" style rendering; multi-literal terms are
// parenthesised, terms joined with the disjunction sign.
inline std::string format_formula(const DnfFormula& f, const ConceptSchema& schema) {
  if (f.width != schema.width())
    throw invalid_argument_error("formula width does not match the schema");
  if (f.terms.empty()) return "false";
  std::vector<std::string> rendered;
  for (const Term& t : f.terms) {
    if (t.literals.empty()) return "true";
    std::string s;
    for (std::size_t i = 0; i < t.literals.size(); ++i) {
      if (i) s += " ∧ ";
      const Literal& l = t.literals[i];
      if (!l.positive) s += "¬";
      s += schema.concept_names[static_cast<std::size_t>(l.concept_index)] + "(" + schema.unit_symbol + ")";
    }
    if (t.literals.size() > 1 && f.terms.size() > 1) s = "(" + s + ")";
    rendered.push_back(std::move(s));
  }
  std::string out;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    if (i) out += " ∨ ";
    out += rendered[i];
  }
  return out;
}

inline nlohmann::json to_json(const DnfFormula& f) {
  nlohmann::json terms = nlohmann::json::array();
  for (const Term& t : f.terms) {
    nlohmann::json lits = nlohmann::json::array();
    for (const Literal& l : t.literals)
      lits.push_back(nlohmann::json{{"c", l.concept_index}, {"pos", l.positive}});
    terms.push_back(std::move(lits));
  }
  return nlohmann::json{{"width", f.width}, {"terms", std::move(terms)}};
}

inline DnfFormula formula_from_json(const nlohmann::json& j) {
  try {
    std::vector<Term> terms;
    for (const auto& t : j.at("terms")) {
      std::vector<Literal> lits;
      for (const auto& l : t)
        lits.push_back({l.at("c").get<int>(), l.at("pos").get<bool>()});
      terms.push_back(make_term(std::move(lits)));
    }
    return make_formula(j.at("width").get<int>(), std::move(terms));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-formula-json", e.what());
  }
}

}  // namespace crules
