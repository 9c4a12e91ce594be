#include "tkgqa/prompt_builder.h"

#include <algorithm>
#include <cctype>

#include "tkgqa/error.h"

namespace tkgqa {
namespace {

// Demonstrations A and E of each in-context template are the canonical
// ones; B-D are constructed in the same style.
constexpr std::string_view kRelationRankingTemplate =
    R"(I will give you a list of words.
Find the {k} words from the list that are most semantically related to the given sentence.
If there are no semantically related words, pick out any {k} words.

Examples)

Sentence A: When was the first time Martin Taylor played for The Hatters?
Words List: ['member of sports team', 'position held', 'award received', 'spouse', 'employer']
Top {k} Answers: ['member of sports team']

Sentence B: Who held the position of Prime Minister of Italy after Romano Prodi?
Words List: ['member of sports team', 'position held', 'award received', 'spouse', 'employer']
Top {k} Answers: ['position held']

Sentence C: Who was the husband of Sophia Loren in 1970?
Words List: ['member of sports team', 'position held', 'award received', 'spouse', 'employer']
Top {k} Answers: ['spouse']

Sentence D: Which organization did Tim Berners-Lee work for in 1989?
Words List: ['member of sports team', 'position held', 'award received', 'spouse', 'employer']
Top {k} Answers: ['employer']

Sentence E: Which was awarded to Daniel Walther in 1980?
Words List: ['member of sports team', 'position held', 'award received', 'spouse', 'employer']
Top {k} Answers: ['award received']

Now let's find the top {k} words.
Sentence: {sentence}
Words List: {relation_list}
Top {k} Answer:
)";

constexpr std::string_view kTimeMiningTemplate =
    R"(I will give you a natural language question with a temporal constraint.
Answer the temporal constraint involved in the question based on the knowledge context and the question type.
Answer only in "before", "after", "between and" format.

Examples)

Question A: Who held Governor of Connecticut position after Lowell P. Weicker?
Knowledge Context: ['Lowell P. Weicker', 'position held', 'Governor of Connecticut', '1991', '1995']
Question Type: after
Response: after 1995

Question B: Who was the Prime Minister of the United Kingdom before Tony Blair?
Knowledge Context: ['Tony Blair', 'position held', 'Prime Minister of the United Kingdom', '1997', '2007']
Question Type: before
Response: before 1997

Question C: Who played for FC Barcelona at the same time as Ronaldinho?
Knowledge Context: ['Ronaldinho', 'member of sports team', 'FC Barcelona', '2003', '2008']
Question Type: time_join
Response: between 2003 and 2008

Question D: Who received the FIFA World Player of the Year after Zinedine Zidane?
Knowledge Context: ['Zinedine Zidane', 'award received', 'FIFA World Player of the Year', '2003', '2003']
Question Type: after
Response: after 2003

Question E: Who's the player who played in AC Reggiana with Daniele Magliocchetti?
Knowledge Context: ['Daniele Magliocchetti', 'member of sports team', 'A.C. Reggiana', '2012', '2014']
Question Type: time_join
Response: between 2012 and 2014

Next, let's answer the time constraints involved in the following question.
Question: {question}
Knowledge Context: {context}
Question Type: {type}
Response:
)";

constexpr std::string_view kInstructionTemplate =
    R"(Below is an instruction that describes a task, paired with an input that provides further context.
Write a response that appropriately completes the request.

Instruction:
Answer the questions based on evidence.
Each evidence is in the form of [head, relation, tail, start_time, end_time]
and it means 'head relation is tail between start_time and end_time'.
You must list the 10 most relevant answers.

Input:
Question: {question}
Evidence set: {evidence_set}

Response:{answer})";

constexpr std::string_view kBaselineWithEvidenceTemplate =
    "Answer the questions based on evidence.\n"
    "Each evidence is in the form of [head, relation, tail, start_time, end_time]\n"
    "and it means 'head relation is tail between start_time and end_time'.\n"
    "You must list the 10 most relevant answers separated by '\\t'.\n"
    "\n"
    "Examples)\n"
    "\n"
    "Question A: Who was the Member of the House of Representatives in 1990?\n"
    "Evidence set: [['Simon Crean', 'position held', 'Member of the House of Representatives', "
    "'1990', '2013'], ['John Dawkins', 'position held', 'Member of the House of "
    "Representatives', '1974', '1994']]\n"
    "Answer: Simon Crean\tJohn Dawkins\n"
    "\n"
    "Question B: Which team did Daniele Amerini play for in 2006?\n"
    "Evidence set: [['Daniele Amerini', 'member of sports team', 'Modena F.C.', '2005', "
    "'2006']]\n"
    "Answer: Modena F.C.\n"
    "\n"
    "Question C: When did Xavier Darcos hold the position of dean?\n"
    "Evidence set: [['Xavier Darcos', 'position held', 'dean', '1995', '1998']]\n"
    "Answer: 1995\t1996\t1997\t1998\n"
    "\n"
    "Question D: Who was Governor of Iowa during World War II?\n"
    "Evidence set: [['George A. W.', 'position held', 'Governor of Iowa', '1939', '1943'], "
    "['Bourke B. H.', 'position held', 'Governor of Iowa', '1943', '1945']]\n"
    "Answer: George A. W.\tBourke B. H.\n"
    "\n"
    "Question E: With whom did Steve Haslam play on the Sheffield Wednesday F.C.?\n"
    "Evidence set: [['Ola Tidman', 'member of sports team', 'Sheffield Wednesday F.C.', "
    "'2003', '2005'], ['Chris Marsden', 'member of sports team', 'Sheffield Wednesday F.C.', "
    "'2002', '2004']]\n"
    "Answer: Ola Tidman\tChris Marsden\n"
    "\n"
    "Now let's answer the Question based on the Evidence set.\n"
    "Please do not say there is no evidence, you must list the 10 most relevant answers "
    "separated by '\\t'.\n"
    "Question: {question}\n"
    "Evidence set: {evidence_set}\n"
    "Answer:\n";

constexpr std::string_view kBaselineWithoutEvidenceTemplate =
    "Answer the questions directly.\n"
    "You must answer the 10 most relevant answers separated by '\\t'.\n"
    "\n"
    "Examples)\n"
    "\n"
    "Question A: Who was the Member of the House of Representatives in 1990?\n"
    "Answer: Simon Crean\tJohn Dawkins\n"
    "\n"
    "Question B: Which team did Daniele Amerini play for in 2006?\n"
    "Answer: Modena F.C.\n"
    "\n"
    "Question C: When did Xavier Darcos hold the position of dean?\n"
    "Answer: 1995\t1996\t1997\t1998\n"
    "\n"
    "Question D: Who was Governor of Iowa during World War II?\n"
    "Answer: George A. W.\tBourke B. H.\n"
    "\n"
    "Question E: With whom did Steve Haslam play on the Sheffield Wednesday F.C.?\n"
    "Answer: Ola Tidman\tChris Marsden\n"
    "\n"
    "Now let's answer the Question, you must answer the 10 most relevant answers separated "
    "by '\\t'.\n"
    "Question: {question}\n"
    "Answer:\n";

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

PromptBundle make_bundle(TemplateId id, std::map<std::string, std::string> subs) {
  PromptBundle b;
  b.template_id = id;
  b.messages.push_back({"user", render_template(template_text(id), subs)});
  b.substitutions = std::move(subs);
  return b;
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i != 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> fact_fields(const Quadruple& f, const TkgStore& store) {
  return {store.entity_label(f.subject), store.relation_label(f.relation),
          store.entity_label(f.object), store.time_label(f.t_start), store.time_label(f.t_end)};
}

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::kRelationRanking:
      return "relation_ranking";
    case TemplateId::kTimeMining:
      return "time_mining";
    case TemplateId::kInstruction:
      return "instruction";
    case TemplateId::kBaselineWithEvidence:
      return "baseline_with_evidence";
    case TemplateId::kBaselineWithoutEvidence:
      return "baseline_without_evidence";
  }
  return "unknown";
}

TemplateId template_id_from_string(std::string_view name) {
  for (TemplateId id : {TemplateId::kRelationRanking, TemplateId::kTimeMining,
                        TemplateId::kInstruction, TemplateId::kBaselineWithEvidence,
                        TemplateId::kBaselineWithoutEvidence}) {
    if (to_string(id) == name) return id;
  }
  throw ValidationError("unknown template '" + std::string(name) + "'");
}

std::string_view template_text(TemplateId id) {
  switch (id) {
    case TemplateId::kRelationRanking:
      return kRelationRankingTemplate;
    case TemplateId::kTimeMining:
      return kTimeMiningTemplate;
    case TemplateId::kInstruction:
      return kInstructionTemplate;
    case TemplateId::kBaselineWithEvidence:
      return kBaselineWithEvidenceTemplate;
    case TemplateId::kBaselineWithoutEvidence:
      return kBaselineWithoutEvidenceTemplate;
  }
  return {};
}

std::string PromptBundle::text() const {
  std::string out;
  for (const auto& m : messages) out += m.content;
  return out;
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& substitutions) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    std::string_view name;
    if (close != std::string_view::npos) name = tmpl.substr(open + 1, close - open - 1);
    if (name.empty() || !std::all_of(name.begin(), name.end(), is_name_char)) {
      throw ValidationError("malformed placeholder at offset " + std::to_string(open));
    }
    auto it = substitutions.find(std::string(name));
    if (it == substitutions.end()) {
      throw ValidationError("unresolved placeholder {" + std::string(name) + "}");
    }
    out += it->second;
    pos = close + 1;
  }
  return out;
}

std::string serialize_fact(const Quadruple& f, const TkgStore& store) {
  const auto fields = fact_fields(f, store);
  return "[" + join(fields, ", ") + "]";
}

std::string serialize_fact_quoted(const Quadruple& f, const TkgStore& store) {
  auto fields = fact_fields(f, store);
  for (auto& s : fields) s = "'" + s + "'";
  return "[" + join(fields, ", ") + "]";
}

std::string serialize_label_list(std::span<const std::string> labels) {
  std::vector<std::string> quoted;
  quoted.reserve(labels.size());
  for (const auto& l : labels) quoted.push_back("'" + l + "'");
  return "[" + join(quoted, ", ") + "]";
}

Quadruple parse_fact(std::string_view text, const TkgStore& store) {
  auto fail = [&](const std::string& why) {
    return ParseError("cannot parse fact '" + std::string(text) + "': " + why);
  };
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw fail("expected surrounding brackets");
  }
  std::string_view body = text.substr(1, text.size() - 2);
  std::vector<std::string_view> pieces;
  std::size_t pos = 0;
  while (true) {
    const auto sep = body.find(", ", pos);
    pieces.push_back(body.substr(pos, sep - pos));
    if (sep == std::string_view::npos) break;
    pos = sep + 2;
  }
  if (pieces.size() < 5) throw fail("expected five fields");
  const bool quoted = pieces.front().starts_with('\'');
  auto unquote = [&](std::string_view s) -> std::string {
    if (!quoted) return std::string(s);
    if (s.size() < 2 || s.front() != '\'' || s.back() != '\'') throw fail("inconsistent quoting");
    return std::string(s.substr(1, s.size() - 2));
  };
  const auto t_end = store.find_time(unquote(pieces[pieces.size() - 1]));
  const auto t_start = store.find_time(unquote(pieces[pieces.size() - 2]));
  if (!t_start || !t_end) throw fail("unknown year");

  // Labels may themselves contain ", ": try every split of the middle pieces.
  const std::size_t n = pieces.size() - 2;
  auto joined = [&](std::size_t a, std::size_t b) {
    std::string s(pieces[a].data(), pieces[b - 1].data() + pieces[b - 1].size());
    return unquote(s);
  };
  for (std::size_t i = 1; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto head = store.find_entity(joined(0, i));
      const auto rel = store.find_relation(joined(i, j));
      const auto tail = store.find_entity(joined(j, n));
      if (head && rel && tail) return Quadruple{*head, *rel, *tail, *t_start, *t_end};
    }
  }
  throw fail("labels do not resolve against the store");
}

std::string time_mining_type(const Question& q) {
  if (q.question_type == QuestionType::kBeforeAfter) {
    std::string lower = q.text;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto before = lower.find("before");
    const auto after = lower.find("after");
    if (before != std::string::npos && (after == std::string::npos || before < after)) {
      return "before";
    }
    if (after != std::string::npos) return "after";
  }
  return std::string(to_string(q.question_type));
}

PromptBundle render_relation_ranking(const Question& question,
                                     std::span<const RelationId> candidates, std::size_t k,
                                     const TkgStore& store) {
  if (candidates.empty()) throw ValidationError("relation ranking needs candidates");
  std::vector<std::string> labels;
  for (RelationId r : candidates) labels.push_back(store.relation_label(r));
  return make_bundle(TemplateId::kRelationRanking, {{"k", std::to_string(k)},
                                                    {"sentence", question.text},
                                                    {"relation_list", serialize_label_list(labels)}});
}

PromptBundle render_time_mining(const Question& question, const Quadruple& anchor,
                                std::string_view question_type, const TkgStore& store) {
  return make_bundle(TemplateId::kTimeMining, {{"question", question.text},
                                               {"context", serialize_fact_quoted(anchor, store)},
                                               {"type", std::string(question_type)}});
}

std::vector<std::string> answer_labels(const Question& q, const TkgStore& store) {
  std::vector<std::string> out;
  for (std::int32_t a : q.gold_answers) {
    const auto i = static_cast<std::size_t>(a);
    out.push_back(q.answer_type == AnswerType::kEntity ? store.entity_label(make_id<EntityId>(i))
                                                       : store.time_label(make_id<TimeId>(i)));
  }
  return out;
}

PromptBundle render_instruction(const Question& question, std::span<const Quadruple> evidence,
                                const std::optional<std::vector<std::string>>& answer,
                                const TkgStore& store, std::size_t max_evidence) {
  if (evidence.size() > max_evidence) {
    throw ValidationError("instruction evidence exceeds " + std::to_string(max_evidence) +
                          " facts");
  }
  std::vector<std::string> facts;
  for (const Quadruple& f : evidence) facts.push_back(serialize_fact(f, store));
  return make_bundle(TemplateId::kInstruction,
                     {{"question", question.text},
                      {"evidence_set", "[" + join(facts, ", ") + "]"},
                      {"answer", answer ? join(*answer, "\t") : std::string()}});
}

PromptBundle render_baseline(const Question& question,
                             const std::optional<std::vector<Quadruple>>& evidence,
                             const TkgStore& store) {
  if (!evidence) {
    return make_bundle(TemplateId::kBaselineWithoutEvidence, {{"question", question.text}});
  }
  std::vector<std::string> facts;
  for (const Quadruple& f : *evidence) facts.push_back(serialize_fact_quoted(f, store));
  return make_bundle(TemplateId::kBaselineWithEvidence,
                     {{"question", question.text}, {"evidence_set", "[" + join(facts, ", ") + "]"}});
}

}  // namespace tkgqa
