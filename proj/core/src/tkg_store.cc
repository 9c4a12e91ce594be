#include "tkgqa/tkg_store.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tkgqa/error.h"
#include "tkgqa/io.h"

namespace tkgqa {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line_no, line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

}  // namespace

std::size_t Vocabulary::intern(std::string_view label) {
  if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
  return add_unique(label);
}

std::size_t Vocabulary::add_unique(std::string_view label) {
  std::string key(label);
  if (index_.contains(key)) throw ValidationError("duplicate vocabulary label: " + key);
  const std::size_t id = labels_.size();
  index_.emplace(key, id);
  labels_.push_back(std::move(key));
  return id;
}

std::optional<std::size_t> Vocabulary::find(std::string_view label) const {
  if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
  return std::nullopt;
}

TimeVocabulary::TimeVocabulary(std::vector<int> years) : years_(std::move(years)) {
  std::sort(years_.begin(), years_.end());
  years_.erase(std::unique(years_.begin(), years_.end()), years_.end());
}

std::optional<TimeId> TimeVocabulary::find(int year) const {
  auto it = std::lower_bound(years_.begin(), years_.end(), year);
  if (it == years_.end() || *it != year) return std::nullopt;
  return make_id<TimeId>(static_cast<std::size_t>(it - years_.begin()));
}

std::optional<TimeId> TimeVocabulary::find(std::string_view label) const {
  const auto year = parse_year(label);
  if (!year) return std::nullopt;
  return find(*year);
}

std::optional<int> parse_year(std::string_view text) {
  if (text.empty() || text.size() > 6) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  // Only the canonical spelling is a label; "01991" or "+1991" would alias 1991.
  if (std::to_string(value) != text) return std::nullopt;
  return value;
}

void TkgStoreBuilder::add_fact(std::string_view subject, std::string_view relation,
                               std::string_view object, int start_year, int end_year) {
  if (start_year > end_year) {
    throw ValidationError("fact interval is reversed: " + std::to_string(start_year) + " > " +
                          std::to_string(end_year));
  }
  RawFact f{};
  f.subject = entities_.intern(subject);
  f.relation = relations_.intern(relation);
  f.object = entities_.intern(object);
  f.start = start_year;
  f.end = end_year;
  years_.push_back(start_year);
  years_.push_back(end_year);
  facts_.push_back(f);
}

EntityId TkgStoreBuilder::add_entity(std::string_view label) {
  return make_id<EntityId>(entities_.intern(label));
}

RelationId TkgStoreBuilder::add_relation(std::string_view label) {
  return make_id<RelationId>(relations_.intern(label));
}

void TkgStoreBuilder::add_year(int year) { years_.push_back(year); }

TkgStore TkgStoreBuilder::build() && {
  TkgStore store;
  store.entities_ = std::move(entities_);
  store.relations_ = std::move(relations_);
  store.times_ = TimeVocabulary(std::move(years_));
  store.facts_.reserve(facts_.size());
  for (const RawFact& f : facts_) {
    store.facts_.push_back(Quadruple{
        make_id<EntityId>(f.subject), make_id<RelationId>(f.relation),
        make_id<EntityId>(f.object), *store.times_.find(f.start), *store.times_.find(f.end)});
  }

  store.by_entity_.assign(store.entities_.size(), {});
  store.by_relation_.assign(store.relations_.size(), {});
  for (FactIndex i = 0; i < store.facts_.size(); ++i) {
    const Quadruple& q = store.facts_[i];
    store.by_entity_[idx(q.subject)].push_back(i);
    if (q.object != q.subject) store.by_entity_[idx(q.object)].push_back(i);
    store.by_relation_[idx(q.relation)].push_back(i);
  }

  store.by_start_.resize(store.facts_.size());
  for (FactIndex i = 0; i < store.by_start_.size(); ++i) store.by_start_[i] = i;
  std::stable_sort(store.by_start_.begin(), store.by_start_.end(), [&](FactIndex a, FactIndex b) {
    const Quadruple& x = store.facts_[a];
    const Quadruple& y = store.facts_[b];
    if (x.t_start != y.t_start) return x.t_start < y.t_start;
    return x.t_end < y.t_end;
  });
  store.start_rank_.resize(store.facts_.size());
  for (std::size_t r = 0; r < store.by_start_.size(); ++r) store.start_rank_[store.by_start_[r]] = r;
  return store;
}

std::span<const FactIndex> TkgStore::facts_by_entity(EntityId e) const {
  return by_entity_.at(idx(e));
}

std::span<const FactIndex> TkgStore::facts_by_relation(RelationId r) const {
  return by_relation_.at(idx(r));
}

std::optional<EntityId> TkgStore::find_entity(std::string_view label) const {
  if (auto id = entities_.find(label)) return make_id<EntityId>(*id);
  return std::nullopt;
}

std::optional<RelationId> TkgStore::find_relation(std::string_view label) const {
  if (auto id = relations_.find(label)) return make_id<RelationId>(*id);
  return std::nullopt;
}

TkgStore parse_tkg(std::string_view text, std::string_view source_name) {
  TkgStoreBuilder builder;
  // Distinct raw spellings of the same year would silently merge.
  std::unordered_map<int, std::string> year_spelling;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    const auto where = std::string(source_name) + ":" + std::to_string(line_no);
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const auto bar = line.find('|', pos);
      fields.push_back(trim(line.substr(pos, bar - pos)));
      if (bar == std::string_view::npos) break;
      pos = bar + 1;
    }
    if (fields.size() != 5) {
      throw ParseError(where + ": expected 5 '|'-separated fields, got " +
                       std::to_string(fields.size()));
    }
    for (int i = 0; i < 3; ++i) {
      if (fields[i].empty()) throw ParseError(where + ": empty label in field " + std::to_string(i + 1));
    }
    int years[2];
    for (int i = 0; i < 2; ++i) {
      const std::string_view raw = fields[3 + i];
      int value = 0;
      auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
      if (raw.empty() || ec != std::errc{} || ptr != raw.data() + raw.size()) {
        throw ParseError(where + ": malformed year '" + std::string(raw) + "'");
      }
      auto [it, inserted] = year_spelling.emplace(value, std::string(raw));
      if (!inserted && it->second != raw) {
        throw ValidationError(where + ": duplicate vocabulary label for year " +
                              std::to_string(value) + " ('" + it->second + "' vs '" +
                              std::string(raw) + "')");
      }
      years[i] = value;
    }
    if (years[0] > years[1]) {
      throw ParseError(where + ": start year " + std::to_string(years[0]) + " after end year " +
                       std::to_string(years[1]));
    }
    builder.add_fact(fields[0], fields[1], fields[2], years[0], years[1]);
  });
  return std::move(builder).build();
}

TkgStore load_tkg(const std::filesystem::path& path) {
  return parse_tkg(read_file(path), path.string());
}

void save_tkg(const TkgStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  for (const Quadruple& q : store.facts()) {
    out << store.entity_label(q.subject) << '|' << store.relation_label(q.relation) << '|'
        << store.entity_label(q.object) << '|' << store.time_label(q.t_start) << '|'
        << store.time_label(q.t_end) << '\n';
  }
}

namespace {

constexpr std::pair<QuestionType, std::string_view> kQuestionTypeNames[] = {
    {QuestionType::kSimpleEntity, "simple_entity"}, {QuestionType::kSimpleTime, "simple_time"},
    {QuestionType::kBeforeAfter, "before_after"},   {QuestionType::kFirstLast, "first_last"},
    {QuestionType::kTimeJoin, "time_join"},         {QuestionType::kExplicit, "explicit"},
    {QuestionType::kImplicit, "implicit"},          {QuestionType::kTemporal, "temporal"},
    {QuestionType::kOrdinal, "ordinal"},
};

}  // namespace

std::string_view to_string(QuestionType t) {
  for (const auto& [type, name] : kQuestionTypeNames) {
    if (type == t) return name;
  }
  return "unknown";
}

std::string_view to_string(AnswerType t) { return t == AnswerType::kEntity ? "entity" : "time"; }

QuestionType question_type_from_string(std::string_view name) {
  for (const auto& [type, n] : kQuestionTypeNames) {
    if (n == name) return type;
  }
  throw ParseError("unknown question type: " + std::string(name));
}

AnswerType answer_type_from_string(std::string_view name) {
  if (name == "entity") return AnswerType::kEntity;
  if (name == "time") return AnswerType::kTime;
  throw ParseError("unknown answer type: " + std::string(name));
}

bool is_simple(QuestionType t) {
  return t == QuestionType::kSimpleEntity || t == QuestionType::kSimpleTime;
}

namespace {

std::string json_label(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError("expected a string or integer label, got " + v.dump());
}

std::vector<std::string> json_labels(const nlohmann::json& record, const char* key) {
  if (!record.contains(key)) return {};
  const auto& arr = record.at(key);
  if (!arr.is_array()) throw ParseError(std::string("field '") + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& v : arr) out.push_back(json_label(v));
  return out;
}

Question parse_question(const nlohmann::json& record, const TkgStore& store) {
  Question q;
  q.uid = json_label(record.at("uid"));
  q.text = record.at("text").get<std::string>();
  q.question_type = question_type_from_string(record.at("qtype").get<std::string>());
  q.answer_type = answer_type_from_string(record.at("atype").get<std::string>());

  std::vector<std::string> unresolved;
  for (const auto& label : json_labels(record, "entities")) {
    if (auto e = store.find_entity(label)) {
      q.annotated_entities.push_back(*e);
    } else {
      unresolved.push_back(label);
    }
  }
  for (const auto& label : json_labels(record, "times")) {
    if (auto t = store.find_time(label)) {
      q.annotated_times.push_back(*t);
    } else {
      unresolved.push_back(label);
    }
  }
  for (const auto& label : json_labels(record, "answers")) {
    if (q.answer_type == AnswerType::kEntity) {
      if (auto e = store.find_entity(label)) {
        q.gold_answers.push_back(static_cast<std::int32_t>(idx(*e)));
        continue;
      }
    } else if (auto t = store.find_time(label)) {
      q.gold_answers.push_back(static_cast<std::int32_t>(idx(*t)));
      continue;
    }
    unresolved.push_back(label);
  }
  if (!unresolved.empty()) {
    std::string msg = "question " + q.uid + ": unresolved labels:";
    for (const auto& l : unresolved) msg += " '" + l + "'";
    throw ValidationError(msg);
  }
  std::sort(q.gold_answers.begin(), q.gold_answers.end());
  q.gold_answers.erase(std::unique(q.gold_answers.begin(), q.gold_answers.end()),
                       q.gold_answers.end());
  if (q.gold_answers.empty()) {
    throw ValidationError("question " + q.uid + ": empty gold answer set");
  }
  return q;
}

}  // namespace

std::vector<Question> parse_questions(std::string_view text, const TkgStore& store,
                                      std::string_view source_name) {
  std::vector<Question> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    const auto where = std::string(source_name) + ":" + std::to_string(line_no) + ": ";
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
    try {
      out.push_back(parse_question(record, store));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
  });
  return out;
}

std::vector<Question> load_questions(const std::filesystem::path& path, const TkgStore& store) {
  return parse_questions(read_file(path), store, path.string());
}

std::string question_to_json_line(const Question& q, const TkgStore& store) {
  nlohmann::ordered_json j;
  j["uid"] = q.uid;
  j["text"] = q.text;
  auto& ents = j["entities"] = nlohmann::ordered_json::array();
  for (EntityId e : q.annotated_entities) ents.push_back(store.entity_label(e));
  auto& times = j["times"] = nlohmann::ordered_json::array();
  for (TimeId t : q.annotated_times) times.push_back(store.time_label(t));
  j["qtype"] = std::string(to_string(q.question_type));
  j["atype"] = std::string(to_string(q.answer_type));
  auto& answers = j["answers"] = nlohmann::ordered_json::array();
  for (std::int32_t a : q.gold_answers) {
    if (q.answer_type == AnswerType::kEntity) {
      answers.push_back(store.entity_label(make_id<EntityId>(static_cast<std::size_t>(a))));
    } else {
      answers.push_back(store.time_label(make_id<TimeId>(static_cast<std::size_t>(a))));
    }
  }
  return j.dump();
}

void save_questions(const std::vector<Question>& questions, const TkgStore& store,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  for (const Question& q : questions) out << question_to_json_line(q, store) << '\n';
}

std::vector<Quadruple> facts_filtered(const TkgStore& store, std::span<const EntityId> entities,
                                      std::span<const RelationId> relations,
                                      const TemporalConstraint& interval) {
  interval.validate();
  if (relations.empty() || entities.empty()) return {};
  std::vector<bool> relation_wanted(store.num_relations(), false);
  for (RelationId r : relations) relation_wanted.at(idx(r)) = true;

  std::vector<FactIndex> hits;
  for (EntityId e : entities) {
    for (FactIndex i : store.facts_by_entity(e)) {
      const Quadruple& q = store.fact(i);
      if (relation_wanted[idx(q.relation)] && constraint_satisfied(q, interval)) hits.push_back(i);
    }
  }
  std::sort(hits.begin(), hits.end(), [&](FactIndex a, FactIndex b) {
    return store.start_rank(a) < store.start_rank(b);
  });
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());

  std::vector<Quadruple> out;
  out.reserve(hits.size());
  for (FactIndex i : hits) out.push_back(store.fact(i));
  return out;
}

}  // namespace tkgqa
