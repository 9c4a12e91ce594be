#include "tkgqa/subgraph_retrieval.h"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include "tkgqa/error.h"
#include "tkgqa/parallel.h"
#include "tkgqa/prompt_builder.h"

namespace tkgqa {

std::string_view to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::kNone:
      return "none";
    case ConstraintKind::kAt:
      return "at";
    case ConstraintKind::kBefore:
      return "before";
    case ConstraintKind::kAfter:
      return "after";
    case ConstraintKind::kBetween:
      return "between";
  }
  return "none";
}

ConstraintKind constraint_kind_from_string(std::string_view name) {
  for (auto k : {ConstraintKind::kNone, ConstraintKind::kAt, ConstraintKind::kBefore,
                 ConstraintKind::kAfter, ConstraintKind::kBetween}) {
    if (to_string(k) == name) return k;
  }
  throw ParseError("unknown temporal constraint kind: " + std::string(name));
}

void TemporalConstraint::validate() const {
  switch (kind) {
    case ConstraintKind::kNone:
      if (t1 || t2) throw ValidationError("constraint 'none' carries no times");
      return;
    case ConstraintKind::kAt:
    case ConstraintKind::kBefore:
    case ConstraintKind::kAfter:
      if (!t1 || t2) {
        throw ValidationError("constraint '" + std::string(to_string(kind)) +
                              "' needs exactly one time");
      }
      return;
    case ConstraintKind::kBetween:
      if (!t1 || !t2) throw ValidationError("constraint 'between' needs two times");
      if (*t2 < *t1) throw ValidationError("constraint 'between' has t1 > t2");
      return;
  }
}

bool constraint_satisfied(const Quadruple& f, const TemporalConstraint& c) {
  switch (c.kind) {
    case ConstraintKind::kNone:
      return true;
    case ConstraintKind::kAt:
      return f.t_start <= *c.t1 && *c.t1 <= f.t_end;
    case ConstraintKind::kBefore:
      return f.t_start < *c.t1;
    case ConstraintKind::kAfter:
      return f.t_end > *c.t1;
    case ConstraintKind::kBetween:
      return f.t_start <= *c.t2 && *c.t1 <= f.t_end;
  }
  return false;
}

std::vector<RelationId> candidate_relations(const TkgStore& store, const Question& q) {
  if (q.annotated_entities.empty()) {
    throw ValidationError("question " + q.uid + " has no annotated entities");
  }
  std::vector<RelationId> out;
  std::vector<bool> seen(store.num_relations(), false);
  for (EntityId e : q.annotated_entities) {
    for (FactIndex i : store.facts_by_entity(e)) {
      const RelationId r = store.fact(i).relation;
      if (!seen[idx(r)]) {
        seen[idx(r)] = true;
        out.push_back(r);
      }
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double lexical_relation_score(std::string_view relation_label, std::string_view question_text) {
  const auto rel_tokens = tokenize(relation_label);
  const auto q_tokens = tokenize(question_text);
  const std::set<std::string> rel(rel_tokens.begin(), rel_tokens.end());
  const std::set<std::string> q(q_tokens.begin(), q_tokens.end());
  if (rel.empty() || q.empty()) return 0.0;
  std::size_t overlap = 0;
  for (const auto& t : rel) overlap += q.count(t);
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(rel.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(q.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<RelationId> lexical_rank(const TkgStore& store, const Question& question,
                                     std::span<const RelationId> candidates) {
  std::vector<std::pair<double, RelationId>> scored;
  for (RelationId r : candidates) {
    scored.emplace_back(lexical_relation_score(store.relation_label(r), question.text), r);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<RelationId> out;
  for (const auto& [s, r] : scored) out.push_back(r);
  return out;
}

std::optional<std::vector<std::string>> parse_bracket_list(std::string_view reply) {
  const auto open = reply.find('[');
  if (open == std::string_view::npos) return std::nullopt;
  const auto close = reply.find(']', open);
  if (close == std::string_view::npos) return std::nullopt;
  const std::string_view body = reply.substr(open + 1, close - open - 1);

  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::vector<std::string> items;
  const bool quoted = body.find_first_of("'\"`") != std::string_view::npos;
  if (quoted) {
    std::size_t pos = 0;
    while (true) {
      const auto q = body.find_first_of("'\"`", pos);
      if (q == std::string_view::npos) break;
      const char quote = body[q];
      const auto end = body.find(quote == '`' ? '\'' : quote, q + 1);
      if (end == std::string_view::npos) return std::nullopt;
      items.emplace_back(trim(body.substr(q + 1, end - q - 1)));
      pos = end + 1;
    }
  } else {
    std::size_t pos = 0;
    while (pos <= body.size()) {
      const auto comma = body.find(',', pos);
      const auto item = trim(body.substr(pos, comma - pos));
      if (!item.empty()) items.emplace_back(item);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  return items;
}

RankResult rank_relations(LlmClient& client, const Question& question,
                          std::span<const RelationId> candidates, std::size_t k,
                          const TkgStore& store, const GenerationParams& params) {
  if (candidates.empty()) throw ValidationError("rank_relations needs candidates");
  if (k == 0) throw ValidationError("rank_relations needs k >= 1");
  const std::size_t want = std::min(k, candidates.size());
  const PromptBundle prompt = render_relation_ranking(question, candidates, k, store);

  std::string reply;
  try {
    reply = client.send(prompt.messages, params);
  } catch (const TransportError& e) {
    throw TransportError("relation ranking for question " + question.uid + ": " + e.what(),
                         e.status());
  }

  const auto lexical = lexical_rank(store, question, candidates);
  RankResult result;
  const auto parsed = parse_bracket_list(reply);
  bool ok = parsed.has_value() && !parsed->empty();
  if (ok) {
    for (const auto& label : *parsed) {
      const auto r = store.find_relation(label);
      if (!r || std::find(candidates.begin(), candidates.end(), *r) == candidates.end()) {
        ok = false;
        break;
      }
      if (std::find(result.relations.begin(), result.relations.end(), *r) ==
          result.relations.end()) {
        result.relations.push_back(*r);
      }
    }
  }
  if (!ok) {
    result.relations.assign(lexical.begin(), lexical.begin() + static_cast<std::ptrdiff_t>(want));
    result.fallback = true;
    return result;
  }
  if (result.relations.size() > want) result.relations.resize(want);
  for (RelationId r : lexical) {
    if (result.relations.size() >= want) break;
    if (std::find(result.relations.begin(), result.relations.end(), r) == result.relations.end()) {
      result.relations.push_back(r);
    }
  }
  return result;
}

std::vector<Quadruple> anchor_facts(const TkgStore& store, const Question& q,
                                    std::span<const RelationId> relations) {
  std::unordered_set<std::int32_t> annotated;
  for (EntityId e : q.annotated_entities) annotated.insert(static_cast<std::int32_t>(idx(e)));
  const bool need_both = annotated.size() >= 2;
  std::vector<FactIndex> hits;
  for (EntityId e : q.annotated_entities) {
    for (FactIndex i : store.facts_by_entity(e)) {
      const Quadruple& f = store.fact(i);
      if (std::find(relations.begin(), relations.end(), f.relation) == relations.end()) continue;
      if (need_both && !(annotated.contains(static_cast<std::int32_t>(idx(f.subject))) &&
                         annotated.contains(static_cast<std::int32_t>(idx(f.object))))) {
        continue;
      }
      hits.push_back(i);
    }
  }
  std::sort(hits.begin(), hits.end(),
            [&](FactIndex a, FactIndex b) { return store.start_rank(a) < store.start_rank(b); });
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  std::vector<Quadruple> out;
  for (FactIndex i : hits) out.push_back(store.fact(i));
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool has_word(const std::vector<std::string>& tokens, std::string_view w) {
  return std::find(tokens.begin(), tokens.end(), w) != tokens.end();
}

// Explicit year: the first annotated time, else the first token that is a
// year in the store.
std::optional<std::pair<TimeId, std::size_t>> explicit_year(
    const Question& q, const std::vector<std::string>& tokens, const TkgStore& store) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].size() != 4) continue;
    if (auto t = store.find_time(tokens[i])) {
      if (q.annotated_times.empty() ||
          std::find(q.annotated_times.begin(), q.annotated_times.end(), *t) !=
              q.annotated_times.end()) {
        return std::make_pair(*t, i);
      }
    }
  }
  if (!q.annotated_times.empty()) return std::make_pair(q.annotated_times.front(), tokens.size());
  return std::nullopt;
}

}  // namespace

TemporalConstraint rule_time(const Question& q, std::span<const Quadruple> anchors,
                             const TkgStore& store) {
  const auto tokens = tokenize(q.text);
  if (auto year = explicit_year(q, tokens, store)) {
    const auto [t, pos] = *year;
    const std::string_view prev = pos > 0 && pos <= tokens.size() ? tokens[pos - 1] : "";
    if (prev == "before") return TemporalConstraint::before(t);
    if (prev == "after") return TemporalConstraint::after(t);
    if (prev == "between" && pos + 2 < tokens.size() && tokens[pos + 1] == "and") {
      if (auto t2 = store.find_time(tokens[pos + 2]); t2 && t <= *t2) {
        return TemporalConstraint::between(t, *t2);
      }
    }
    return TemporalConstraint::at(t);
  }
  if (anchors.empty()) return TemporalConstraint::none();
  const Quadruple& anchor = anchors.front();
  switch (q.question_type) {
    case QuestionType::kBeforeAfter:
    case QuestionType::kImplicit:
    case QuestionType::kTemporal: {
      const std::string type = time_mining_type(q);
      const bool before =
          type == "before" || (type != "after" && has_word(tokens, "before"));
      const bool after = type == "after" || (!before && has_word(tokens, "after"));
      if (before) return TemporalConstraint::before(anchor.t_start);
      if (after) return TemporalConstraint::after(anchor.t_end);
      if (has_word(tokens, "during") || has_word(tokens, "while")) {
        return TemporalConstraint::between(anchor.t_start, anchor.t_end);
      }
      return TemporalConstraint::none();
    }
    case QuestionType::kTimeJoin:
      return TemporalConstraint::between(anchor.t_start, anchor.t_end);
    default:
      return TemporalConstraint::none();
  }
}

std::optional<TemporalConstraint> parse_time_reply(std::string_view reply, const TkgStore& store) {
  const auto tokens = tokenize(lower(reply));
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const auto& w = tokens[i];
    if (w != "before" && w != "after" && w != "between" && w != "in" && w != "at") continue;
    const auto t1 = store.find_time(tokens[i + 1]);
    if (!t1) continue;
    if (w == "before") return TemporalConstraint::before(*t1);
    if (w == "after") return TemporalConstraint::after(*t1);
    if (w == "in" || w == "at") return TemporalConstraint::at(*t1);
    if (i + 3 < tokens.size() && tokens[i + 2] == "and") {
      const auto t2 = store.find_time(tokens[i + 3]);
      if (t2 && *t1 <= *t2) return TemporalConstraint::between(*t1, *t2);
    }
    return std::nullopt;
  }
  return std::nullopt;
}

TimeResult mine_time(LlmClient& client, const Question& q, std::span<const Quadruple> anchors,
                     const TkgStore& store, const GenerationParams& params) {
  if (anchors.empty()) return {rule_time(q, anchors, store), false};
  const PromptBundle prompt = render_time_mining(q, anchors.front(), time_mining_type(q), store);
  std::string reply;
  try {
    reply = client.send(prompt.messages, params);
  } catch (const TransportError& e) {
    throw TransportError("time mining for question " + q.uid + ": " + e.what(), e.status());
  }
  if (auto c = parse_time_reply(reply, store)) return {*c, false};
  return {rule_time(q, anchors, store), true};
}

RetrievedSubgraph retrieve_subgraph(const TkgStore& store, const Question& q,
                                    std::span<const RelationId> relations,
                                    const TemporalConstraint& constraint, std::size_t n) {
  if (relations.empty()) throw ValidationError("retrieve_subgraph needs relations");
  RetrievedSubgraph sub;
  sub.question_uid = q.uid;
  sub.relations.assign(relations.begin(), relations.end());
  sub.constraint = constraint;
  sub.facts = facts_filtered(store, q.annotated_entities, relations, constraint);
  if (sub.facts.size() > n) sub.facts.resize(n);
  sub.empty = sub.facts.empty();
  return sub;
}

RetrievedSubgraph retrieve_for_question(const TkgStore& store, const Question& q,
                                        LlmClient* client, const RetrievalConfig& config) {
  RetrievedSubgraph empty;
  empty.question_uid = q.uid;
  empty.empty = true;
  if (q.annotated_entities.empty()) return empty;
  const auto candidates = candidate_relations(store, q);
  if (candidates.empty()) return empty;

  if (!config.oracle && client == nullptr) {
    throw ValidationError("retrieval needs an LLM client unless oracle mode is on");
  }
  std::vector<RelationId> relations;
  bool relation_fallback = false;
  if (config.oracle) {
    relations = lexical_rank(store, q, candidates);
    relations.resize(std::min(config.top_k, relations.size()));
  } else {
    auto ranked = rank_relations(*client, q, candidates, config.top_k, store, config.generation);
    relations = std::move(ranked.relations);
    relation_fallback = ranked.fallback;
  }

  const auto anchors = anchor_facts(store, q, relations);
  TimeResult time;
  if (config.oracle) {
    time.constraint = rule_time(q, anchors, store);
  } else {
    time = mine_time(*client, q, anchors, store, config.generation);
  }
  RetrievedSubgraph sub = retrieve_subgraph(store, q, relations, time.constraint, config.max_facts);
  sub.relation_fallback = relation_fallback;
  sub.time_fallback = time.fallback;
  return sub;
}

std::vector<RetrievedSubgraph> retrieve_all(const TkgStore& store,
                                            std::span<const Question> questions,
                                            LlmClient* client, const RetrievalConfig& config) {
  std::vector<RetrievedSubgraph> out(questions.size());
  parallel_for(questions.size(), config.jobs, [&](std::size_t i) {
    out[i] = retrieve_for_question(store, questions[i], client, config);
  });
  return out;
}

}  // namespace tkgqa
