#include "tkgqa/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tkgqa/error.h"
#include "tkgqa/io.h"
#include "tkgqa/prompt_builder.h"

namespace tkgqa {

std::optional<std::size_t> rank_of(std::span<const std::string> predictions,
                                   std::span<const std::string> gold) {
  std::unordered_set<std::string_view> seen;
  for (const auto& p : predictions) {
    if (!seen.insert(p).second) throw ValidationError("duplicate prediction '" + p + "'");
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (std::find(gold.begin(), gold.end(), predictions[i]) != gold.end()) return i + 1;
  }
  return std::nullopt;
}

double hits_at_k(std::span<const RankRecord> records, std::size_t k) {
  if (records.empty()) throw ValidationError("hits_at_k over an empty record set");
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.rank && *r.rank <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::vector<std::string> parse_generated(std::string_view text) {
  constexpr std::size_t kCap = 10;
  constexpr std::string_view kSpace = " \t\r\n";
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size() && out.size() < kCap) {
    const auto tab = text.find('\t', pos);
    std::string_view item = text.substr(pos, tab == std::string_view::npos ? text.npos : tab - pos);
    const auto b = item.find_first_not_of(kSpace);
    if (b != std::string_view::npos) {
      item = item.substr(b, item.find_last_not_of(kSpace) - b + 1);
      if (std::find(out.begin(), out.end(), item) == out.end()) out.emplace_back(item);
    }
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

std::vector<RankRecord> rank_predictions(std::span<const Question> questions,
                                         std::span<const std::vector<std::string>> predictions,
                                         const TkgStore& store) {
  if (questions.size() != predictions.size()) {
    throw ValidationError("got " + std::to_string(predictions.size()) + " prediction lists for " +
                          std::to_string(questions.size()) + " questions");
  }
  std::vector<RankRecord> out;
  out.reserve(questions.size());
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const Question& q = questions[i];
    const auto gold = answer_labels(q, store);
    out.push_back({q.uid, q.question_type, q.answer_type, rank_of(predictions[i], gold),
                   predictions[i]});
  }
  return out;
}

namespace {

struct Tally {
  std::size_t count = 0, hit1 = 0, hit10 = 0;

  void add(const RankRecord& r) {
    ++count;
    hit1 += r.rank && *r.rank <= 1 ? 1 : 0;
    hit10 += r.rank && *r.rank <= 10 ? 1 : 0;
  }
  MetricCell cell() const {
    if (count == 0) return {};
    const double n = static_cast<double>(count);
    return {count, static_cast<double>(hit1) / n, static_cast<double>(hit10) / n};
  }
};

std::string fmt(const MetricCell& c) {
  if (c.count == 0) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.3f", c.hits1);
  return buf;
}

std::string fmt10(const MetricCell& c) {
  if (c.count == 0) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.3f", c.hits10);
  return buf;
}

std::string row(const std::vector<std::string>& cells, const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out += i == 0 ? "" : " | ";
    out += cells[i];
    if (i + 1 < cells.size()) out.append(widths[i] - std::min(widths[i], cells[i].size()), ' ');
  }
  return out + '\n';
}

std::string table(const std::vector<std::vector<std::string>>& rows, std::size_t header_rows) {
  std::vector<std::size_t> widths(rows.front().size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
  }
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += row(rows[i], widths);
    if (i + 1 == header_rows) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w + 3;
      out += std::string(total - 3, '-') + '\n';
    }
  }
  return out;
}

}  // namespace

EvalReport make_report(std::vector<RankRecord> records) {
  if (records.empty()) throw ValidationError("cannot build a report from zero records");
  Tally overall, simple, complex, entity, time;
  std::map<QuestionType, Tally> by_type;
  for (const auto& r : records) {
    overall.add(r);
    (is_simple(r.question_type) ? simple : complex).add(r);
    (r.answer_type == AnswerType::kEntity ? entity : time).add(r);
    by_type[r.question_type].add(r);
  }
  EvalReport rep;
  rep.overall = overall.cell();
  rep.simple = simple.cell();
  rep.complex = complex.cell();
  rep.entity = entity.cell();
  rep.time = time.cell();
  for (const auto& [type, tally] : by_type) rep.by_type.emplace(type, tally.cell());
  rep.records = std::move(records);
  return rep;
}

std::string format_report(const EvalReport& r, std::string_view model_name) {
  std::string out;
  out += "Hits@1 / Hits@10 on " + std::to_string(r.overall.count) + " questions\n\n";
  out += table({
      {"", "Hits@1", "", "", "", "", "Hits@10", "", "", "", ""},
      {"Model", "Overall", "Complex", "Simple", "Entity", "Time", "Overall", "Complex", "Simple",
       "Entity", "Time"},
      {std::string(model_name), fmt(r.overall), fmt(r.complex), fmt(r.simple), fmt(r.entity),
       fmt(r.time), fmt10(r.overall), fmt10(r.complex), fmt10(r.simple), fmt10(r.entity),
       fmt10(r.time)},
  }, 2);
  out += "\nBy question type\n\n";
  std::vector<std::vector<std::string>> rows = {{"Type", "Count", "Hits@1", "Hits@10"}};
  for (const auto& [type, cell] : r.by_type) {
    rows.push_back({std::string(to_string(type)), std::to_string(cell.count), fmt(cell),
                    fmt10(cell)});
  }
  out += table(rows, 1);
  return out;
}

std::string records_to_jsonl(std::span<const RankRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["uid"] = r.uid;
    j["qtype"] = to_string(r.question_type);
    j["atype"] = to_string(r.answer_type);
    j["rank"] = r.rank ? nlohmann::ordered_json(*r.rank) : nlohmann::ordered_json(nullptr);
    j["predictions"] = r.predictions;
    out += j.dump() + '\n';
  }
  return out;
}

std::vector<RankRecord> records_from_jsonl(std::string_view text, std::string_view source_name) {
  std::vector<RankRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
    pos = nl == text.npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      RankRecord r;
      r.uid = j.at("uid").get<std::string>();
      r.question_type = question_type_from_string(j.at("qtype").get<std::string>());
      r.answer_type = answer_type_from_string(j.at("atype").get<std::string>());
      if (!j.at("rank").is_null()) r.rank = j.at("rank").get<std::size_t>();
      r.predictions = j.at("predictions").get<std::vector<std::string>>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& table_path,
                  const std::filesystem::path& records_path) {
  write_file(table_path, format_report(report));
  write_file(records_path, records_to_jsonl(report.records));
}

}  // namespace tkgqa
