#include "tkgqa/synthetic.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "tkgqa/error.h"
#include "tkgqa/linalg.h"

namespace tkgqa {
namespace {

constexpr std::array<const char*, kPatternedRelations> kPatternedRelationLabels = {
    "member_of", "employed_by", "plays_for", "studied_at",
    "coach_of",  "advisor_to",  "works_at",  "chair_of"};

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::string person_label(std::size_t p) { return numbered("person_", p, 2); }
std::string org_label(std::size_t o) { return numbered("org_", o, 2); }

std::size_t relation_of(std::size_t p) { return p % kPatternedRelations; }
// Each relation owns five organisations: three active in the early half,
// two in the late half.
std::size_t early_org(std::size_t p) {
  return relation_of(p) * 5 + (p / kPatternedRelations) % 3;
}
std::size_t late_org(std::size_t p) {
  return relation_of(p) * 5 + 3 + (p / kPatternedRelations) % 2;
}

std::string phrase(std::string_view relation_label) {
  std::string out(relation_label);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

// Whether any gold answer of `q` shows up in the retrieved facts.
bool retrievable(const Question& q, const RetrievedSubgraph& sub) {
  for (const Quadruple& f : sub.facts) {
    for (std::int32_t a : q.gold_answers) {
      if (q.answer_type == AnswerType::kEntity) {
        if (static_cast<std::int32_t>(idx(f.subject)) == a ||
            static_cast<std::int32_t>(idx(f.object)) == a) {
          return true;
        }
      } else if (static_cast<std::int32_t>(idx(f.t_start)) == a ||
                 static_cast<std::int32_t>(idx(f.t_end)) == a) {
        return true;
      }
    }
  }
  return false;
}

template <typename Id>
std::int32_t raw(Id id) {
  return static_cast<std::int32_t>(idx(id));
}

}  // namespace

TkgStore patterned_tkg() {
  TkgStoreBuilder b;
  for (std::size_t p = 0; p < kPatternedPeople; ++p) b.add_entity(person_label(p));
  for (std::size_t o = 0; o < kPatternedOrgs; ++o) b.add_entity(org_label(o));
  for (std::size_t y = 0; y < kPatternedYears; ++y) {
    const int year = kPatternedFirstYear + static_cast<int>(y);
    for (std::size_t p = 0; p < kPatternedPeople; ++p) {
      const std::size_t org = y < kPatternedYears / 2 ? early_org(p) : late_org(p);
      b.add_fact(person_label(p), kPatternedRelationLabels[relation_of(p)], org_label(org), year,
                 year);
    }
  }
  return std::move(b).build();
}

std::vector<Question> patterned_questions(const TkgStore& store, const RetrievalConfig& config) {
  auto entity = [&](const std::string& label) {
    auto e = store.find_entity(label);
    if (!e) throw ValidationError("store lacks the patterned entity " + label);
    return *e;
  };
  auto time = [&](int year) {
    auto t = store.find_time(std::to_string(year));
    if (!t) throw ValidationError("store lacks the patterned year " + std::to_string(year));
    return *t;
  };
  const int first = kPatternedFirstYear;
  const int mid = kPatternedFirstYear + static_cast<int>(kPatternedYears / 2);
  const int last = kPatternedFirstYear + static_cast<int>(kPatternedYears) - 1;

  // Members of each organisation, per half.
  std::vector<std::vector<std::size_t>> early_members(kPatternedOrgs), late_members(kPatternedOrgs);
  for (std::size_t p = 0; p < kPatternedPeople; ++p) {
    early_members[early_org(p)].push_back(p);
    late_members[late_org(p)].push_back(p);
  }

  std::vector<Question> draft;
  auto add = [&](std::string text, std::vector<EntityId> ents, std::vector<TimeId> times,
                 QuestionType qt, AnswerType at, std::vector<std::int32_t> gold) {
    std::sort(gold.begin(), gold.end());
    gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
    if (gold.empty()) return;
    Question q;
    q.text = std::move(text);
    q.annotated_entities = std::move(ents);
    q.annotated_times = std::move(times);
    q.question_type = qt;
    q.answer_type = at;
    q.gold_answers = std::move(gold);
    draft.push_back(std::move(q));
  };

  for (std::size_t p = 0; p < kPatternedPeople; ++p) {
    const std::string who = person_label(p);
    const std::string rel = phrase(kPatternedRelationLabels[relation_of(p)]);
    const EntityId pe = entity(who);
    const std::string early = org_label(early_org(p));
    const std::string late = org_label(late_org(p));
    const EntityId ee = entity(early), le = entity(late);

    for (int y = first; y <= last; ++y) {
      add("Which organization was " + who + " " + rel + " in " + std::to_string(y) + "?", {pe},
          {time(y)}, QuestionType::kSimpleEntity, AnswerType::kEntity,
          {raw(y < mid ? ee : le)});
    }
    for (const auto& [org, oe, lo] :
         {std::tuple{early, ee, first}, std::tuple{late, le, mid}}) {
      std::vector<std::int32_t> years;
      for (int y = lo; y < lo + mid - first; ++y) years.push_back(raw(time(y)));
      add("When was " + who + " " + rel + " " + org + "?", {pe, oe}, {},
          QuestionType::kSimpleTime, AnswerType::kTime, years);
    }
    add("Which organization was " + who + " " + rel + " before " + std::to_string(mid) + "?",
        {pe}, {time(mid)}, QuestionType::kBeforeAfter, AnswerType::kEntity, {raw(ee)});
    add("Which organization was " + who + " " + rel + " after " + std::to_string(mid - 1) + "?",
        {pe}, {time(mid - 1)}, QuestionType::kBeforeAfter, AnswerType::kEntity, {raw(le)});
    add("Which organization was " + who + " " + rel + " before " + late + "?", {pe, le}, {},
        QuestionType::kBeforeAfter, AnswerType::kEntity, {raw(ee)});
    add("Which organization was " + who + " " + rel + " after " + early + "?", {pe, ee}, {},
        QuestionType::kBeforeAfter, AnswerType::kEntity, {raw(le)});
    add("Which organization was " + who + " " + rel + " first?", {pe}, {},
        QuestionType::kFirstLast, AnswerType::kEntity, {raw(ee)});
    add("Which organization was " + who + " " + rel + " last?", {pe}, {},
        QuestionType::kFirstLast, AnswerType::kEntity, {raw(le)});
    add("When was " + who + " " + rel + " " + late + " for the first time?", {pe, le}, {},
        QuestionType::kFirstLast, AnswerType::kTime, {raw(time(mid))});

    for (const auto& [org, oe, members] :
         {std::tuple{early, ee, &early_members[early_org(p)]},
          std::tuple{late, le, &late_members[late_org(p)]}}) {
      std::vector<std::int32_t> gold;
      for (std::size_t other : *members) {
        if (other != p) gold.push_back(raw(entity(person_label(other))));
      }
      add("Who was " + rel + " " + org + " at the same time as " + who + "?", {pe, oe}, {},
          QuestionType::kTimeJoin, AnswerType::kEntity, gold);
    }
  }

  for (std::size_t o = 0; o < kPatternedOrgs; ++o) {
    const std::string org = org_label(o);
    const std::string rel = phrase(kPatternedRelationLabels[o / 5]);
    for (int y = first; y <= last; ++y) {
      const auto& members = y < mid ? early_members[o] : late_members[o];
      std::vector<std::int32_t> gold;
      for (std::size_t p : members) gold.push_back(raw(entity(person_label(p))));
      add("Who was " + rel + " " + org + " in " + std::to_string(y) + "?", {entity(org)},
          {time(y)}, QuestionType::kSimpleEntity, AnswerType::kEntity, gold);
    }
  }

  std::vector<Question> out;
  for (Question& q : draft) {
    const RetrievedSubgraph sub = retrieve_for_question(store, q, nullptr, config);
    if (!retrievable(q, sub)) continue;
    q.uid = numbered("q", out.size(), 4);
    out.push_back(std::move(q));
  }
  return out;
}

TkgStore random_tkg(std::size_t num_entities, std::size_t num_relations, std::size_t num_years,
                    std::size_t num_facts, std::uint64_t seed) {
  if (num_entities < 2 || num_relations == 0 || num_years == 0) {
    throw ValidationError("random_tkg needs >= 2 entities, >= 1 relation and >= 1 year");
  }
  static constexpr std::array<const char*, 10> kHeads = {
      "member", "position", "award", "spouse", "employer",
      "coach", "owner", "leader", "citizen", "player"};
  static constexpr std::array<const char*, 6> kTails = {"of", "held", "received", "at", "for",
                                                        "with"};
  Rng rng(seed);
  TkgStoreBuilder b;
  for (std::size_t e = 0; e < num_entities; ++e) b.add_entity(numbered("e", e, 4));
  for (std::size_t y = 0; y < num_years; ++y) b.add_year(1900 + static_cast<int>(y));
  std::vector<std::string> relations;
  for (std::size_t r = 0; r < num_relations; ++r) {
    std::string label = std::string(kHeads[r % kHeads.size()]) + "_" +
                        kTails[(r / kHeads.size()) % kTails.size()];
    if (r >= kHeads.size() * kTails.size()) label += "_" + std::to_string(r);
    relations.push_back(std::move(label));
  }
  for (std::size_t i = 0; i < num_facts; ++i) {
    const std::size_t s = rng.index(num_entities);
    std::size_t o = rng.index(num_entities - 1);
    if (o >= s) ++o;
    const std::size_t r = rng.index(num_relations);
    const int start = static_cast<int>(rng.index(num_years));
    const int end =
        std::min(static_cast<int>(num_years) - 1, start + static_cast<int>(rng.index(5)));
    b.add_fact(numbered("e", s, 4), relations[r], numbered("e", o, 4), 1900 + start, 1900 + end);
  }
  return std::move(b).build();
}

std::vector<Question> random_questions(const TkgStore& store, std::size_t count,
                                       std::uint64_t seed) {
  if (store.empty()) throw ValidationError("random_questions needs a non-empty store");
  Rng rng(seed);
  std::vector<Question> out;
  const auto year = [&](TimeId t) { return store.time_label(t); };
  for (std::size_t i = 0; i < count; ++i) {
    const Quadruple& f = store.fact(rng.index(store.size()));
    Question q;
    q.uid = numbered("r", i, 5);
    const std::string rel = phrase(store.relation_label(f.relation));
    const std::string s = store.entity_label(f.subject);
    const std::string o = store.entity_label(f.object);
    const bool two = rng.uniform() < 0.4;
    q.annotated_entities = {f.subject};
    if (two) q.annotated_entities.push_back(f.object);
    const std::string subject_part = two ? s + " and " + o : s;

    // Time wording.
    const TimeId t1 = f.t_start;
    const TimeId t2 = make_id<TimeId>(std::min(store.num_times() - 1, idx(f.t_end) + rng.index(3)));
    std::string when;
    switch (rng.index(8)) {
      case 0:
        when = " in " + year(t1);
        q.annotated_times = {t1};
        q.question_type = QuestionType::kExplicit;
        break;
      case 1:
        when = " before " + year(t2);
        q.annotated_times = {t2};
        q.question_type = QuestionType::kBeforeAfter;
        break;
      case 2:
        when = " after " + year(t1);
        q.annotated_times = {t1};
        q.question_type = QuestionType::kBeforeAfter;
        break;
      case 3:
        when = " between " + year(t1) + " and " + year(t2);
        q.annotated_times = {t1, t2};
        q.question_type = QuestionType::kExplicit;
        break;
      case 4:
        when = rng.uniform() < 0.5 ? " before that" : " after that";
        q.question_type = rng.uniform() < 0.5 ? QuestionType::kBeforeAfter
                                              : QuestionType::kImplicit;
        break;
      case 5:
        when = " during that time";
        q.question_type = QuestionType::kTimeJoin;
        break;
      case 6:
        when = " first";
        q.question_type = QuestionType::kFirstLast;
        break;
      default:
        q.question_type = QuestionType::kSimpleEntity;
        break;
    }
    if (rng.uniform() < 0.3) {
      q.answer_type = AnswerType::kTime;
      q.gold_answers = {raw(f.t_start)};
      if (q.question_type == QuestionType::kSimpleEntity) q.question_type = QuestionType::kSimpleTime;
      q.text = "When was " + subject_part + " " + rel + when + "?";
    } else {
      q.answer_type = AnswerType::kEntity;
      q.gold_answers = {raw(two ? f.subject : f.object)};
      q.text = "Which entity was " + subject_part + " " + rel + when + "?";
    }
    std::sort(q.annotated_times.begin(), q.annotated_times.end());
    q.annotated_times.erase(std::unique(q.annotated_times.begin(), q.annotated_times.end()),
                            q.annotated_times.end());
    out.push_back(std::move(q));
  }
  return out;
}

std::pair<std::vector<Question>, std::vector<Question>> split_questions(
    std::vector<Question> questions, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw ValidationError("test_fraction must lie in [0, 1]");
  }
  std::sort(questions.begin(), questions.end(),
            [](const Question& a, const Question& b) { return a.uid < b.uid; });
  std::vector<std::size_t> order(questions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_test =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(order.size())));
  std::vector<bool> is_test(questions.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  std::pair<std::vector<Question>, std::vector<Question>> out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    (is_test[i] ? out.second : out.first).push_back(std::move(questions[i]));
  }
  return out;
}

FactSplit holdout_facts(const TkgStore& store, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("fraction must lie in [0, 1]");
  std::vector<std::size_t> order(store.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_held =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  std::vector<bool> held(store.size(), false);
  for (std::size_t i = 0; i < n_held; ++i) held[order[i]] = true;

  TkgStoreBuilder builder;
  for (const auto& label : store.entities().labels()) builder.add_entity(label);
  for (const auto& label : store.relations().labels()) builder.add_relation(label);
  for (int year : store.times().years()) builder.add_year(year);
  FactSplit out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Quadruple& f = store.fact(i);
    if (held[i]) {
      out.heldout.push_back(f);
      continue;
    }
    builder.add_fact(store.entity_label(f.subject), store.relation_label(f.relation),
                     store.entity_label(f.object), store.times().year(f.t_start),
                     store.times().year(f.t_end));
  }
  out.train = std::move(builder).build();
  return out;
}

}  // namespace tkgqa
