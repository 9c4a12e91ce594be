#include "tkgqa/dumps.h"

#include <nlohmann/json.hpp>

#include "tkgqa/error.h"
#include "tkgqa/io.h"

namespace tkgqa {
namespace {

using Json = nlohmann::ordered_json;

std::string fact_string(const Quadruple& f, const TkgStore& store) {
  return store.entity_label(f.subject) + '|' + store.relation_label(f.relation) + '|' +
         store.entity_label(f.object) + '|' + store.time_label(f.t_start) + '|' +
         store.time_label(f.t_end);
}

TimeId time_of(const std::string& label, const TkgStore& store) {
  auto t = store.find_time(label);
  if (!t) throw ValidationError("unknown time '" + label + "'");
  return *t;
}

Quadruple fact_from_string(const std::string& text, const TkgStore& store) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto bar = text.find('|', pos);
    parts.push_back(text.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos));
    if (bar == std::string::npos) break;
    pos = bar + 1;
  }
  if (parts.size() != 5) throw ParseError("fact '" + text + "' does not have 5 fields");
  auto s = store.find_entity(parts[0]);
  auto r = store.find_relation(parts[1]);
  auto o = store.find_entity(parts[2]);
  if (!s || !r || !o) throw ValidationError("fact '" + text + "' names an unknown label");
  return {*s, *r, *o, time_of(parts[3], store), time_of(parts[4], store)};
}

Json retrieval_json(const RetrievedSubgraph& g, const TkgStore& store) {
  Json j;
  j["uid"] = g.question_uid;
  Json rels = Json::array();
  for (RelationId r : g.relations) rels.push_back(store.relation_label(r));
  j["relations"] = rels;
  Json c;
  c["kind"] = to_string(g.constraint.kind);
  c["t1"] = g.constraint.t1 ? Json(store.time_label(*g.constraint.t1)) : Json(nullptr);
  c["t2"] = g.constraint.t2 ? Json(store.time_label(*g.constraint.t2)) : Json(nullptr);
  j["constraint"] = c;
  Json facts = Json::array();
  for (const Quadruple& f : g.facts) facts.push_back(fact_string(f, store));
  j["facts"] = facts;
  j["relation_fallback"] = g.relation_fallback;
  j["time_fallback"] = g.time_fallback;
  j["empty"] = g.empty;
  return j;
}

RetrievedSubgraph retrieval_from_json(const nlohmann::json& j, const TkgStore& store) {
  RetrievedSubgraph g;
  g.question_uid = j.at("uid").get<std::string>();
  for (const auto& label : j.at("relations")) {
    auto r = store.find_relation(label.get<std::string>());
    if (!r) throw ValidationError("unknown relation '" + label.get<std::string>() + "'");
    g.relations.push_back(*r);
  }
  const auto& c = j.at("constraint");
  g.constraint.kind = constraint_kind_from_string(c.at("kind").get<std::string>());
  if (!c.at("t1").is_null()) g.constraint.t1 = time_of(c.at("t1").get<std::string>(), store);
  if (!c.at("t2").is_null()) g.constraint.t2 = time_of(c.at("t2").get<std::string>(), store);
  g.constraint.validate();
  for (const auto& f : j.at("facts")) g.facts.push_back(fact_from_string(f.get<std::string>(), store));
  g.relation_fallback = j.at("relation_fallback").get<bool>();
  g.time_fallback = j.at("time_fallback").get<bool>();
  g.empty = j.at("empty").get<bool>();
  return g;
}

Json float_array(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(static_cast<float>(v(i)));
  return a;
}

Vector vector_from(const nlohmann::json& a) {
  const auto values = a.get<std::vector<float>>();
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

template <typename Fn>
auto parse_lines(const std::filesystem::path& path, Fn&& fn) {
  const std::string text = read_file(path);
  std::vector<decltype(fn(std::string_view{}))> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line =
        std::string_view(text).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(fn(line));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

template <typename T, typename Fn>
void write_lines(const std::filesystem::path& path, std::span<const T> items, Fn&& fn) {
  std::string out;
  for (const T& item : items) out += fn(item) + '\n';
  write_file(path, out);
}

}  // namespace

std::string retrieval_record(const RetrievedSubgraph& g, const TkgStore& store) {
  return retrieval_json(g, store).dump();
}

RetrievedSubgraph parse_retrieval_record(std::string_view line, const TkgStore& store) {
  try {
    return retrieval_from_json(nlohmann::json::parse(line), store);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("retrieval record: ") + e.what());
  }
}

void write_retrieval_dump(const std::filesystem::path& path,
                          std::span<const RetrievedSubgraph> subgraphs, const TkgStore& store) {
  write_lines(path, subgraphs, [&](const RetrievedSubgraph& g) { return retrieval_record(g, store); });
}

std::vector<RetrievedSubgraph> read_retrieval_dump(const std::filesystem::path& path,
                                                   const TkgStore& store) {
  return parse_lines(path, [&](std::string_view l) { return parse_retrieval_record(l, store); });
}

std::string indicator_record(const IndicatorRecord& r, const TkgStore& store) {
  Json j = retrieval_json(r.subgraph, store);
  const IndicatorSet& s = r.indicators;
  j["t_min"] = store.time_label(s.t_min);
  j["t_max"] = store.time_label(s.t_max);
  j["h_sub"] = float_array(s.h_sub);
  j["h_rel"] = float_array(s.h_rel);
  j["h_obj"] = float_array(s.h_obj);
  j["v_sub"] = float_array(s.v_sub);
  j["v_rel"] = float_array(s.v_rel);
  j["v_obj"] = float_array(s.v_obj);
  return j.dump();
}

IndicatorRecord parse_indicator_record(std::string_view line, const TkgStore& store) {
  try {
    const auto j = nlohmann::json::parse(line);
    IndicatorRecord r;
    r.subgraph = retrieval_from_json(j, store);
    IndicatorSet& s = r.indicators;
    s.t_min = time_of(j.at("t_min").get<std::string>(), store);
    s.t_max = time_of(j.at("t_max").get<std::string>(), store);
    s.h_sub = vector_from(j.at("h_sub"));
    s.h_rel = vector_from(j.at("h_rel"));
    s.h_obj = vector_from(j.at("h_obj"));
    s.v_sub = vector_from(j.at("v_sub"));
    s.v_rel = vector_from(j.at("v_rel"));
    s.v_obj = vector_from(j.at("v_obj"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("indicator record: ") + e.what());
  }
}

void write_indicator_dump(const std::filesystem::path& path,
                          std::span<const IndicatorRecord> records, const TkgStore& store) {
  write_lines(path, records, [&](const IndicatorRecord& r) { return indicator_record(r, store); });
}

std::vector<IndicatorRecord> read_indicator_dump(const std::filesystem::path& path,
                                                 const TkgStore& store) {
  return parse_lines(path, [&](std::string_view l) { return parse_indicator_record(l, store); });
}

std::string prompt_record(const PromptRecord& r) {
  Json j;
  j["uid"] = r.uid;
  j["template"] = to_string(r.bundle.template_id);
  Json msgs = Json::array();
  for (const auto& m : r.bundle.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  j["messages"] = msgs;
  j["substitutions"] = r.bundle.substitutions;
  return j.dump();
}

PromptRecord parse_prompt_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    PromptRecord r;
    r.uid = j.at("uid").get<std::string>();
    r.bundle.template_id = template_id_from_string(j.at("template").get<std::string>());
    for (const auto& m : j.at("messages")) {
      r.bundle.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    r.bundle.substitutions = j.at("substitutions").get<std::map<std::string, std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prompt record: ") + e.what());
  }
}

void write_prompt_dump(const std::filesystem::path& path, std::span<const PromptRecord> records) {
  write_lines(path, records, [](const PromptRecord& r) { return prompt_record(r); });
}

std::vector<PromptRecord> read_prompt_dump(const std::filesystem::path& path) {
  return parse_lines(path, [](std::string_view l) { return parse_prompt_record(l); });
}

void write_prediction_dump(const std::filesystem::path& path,
                           std::span<const PredictionRecord> records) {
  write_lines(path, records, [](const PredictionRecord& r) {
    Json j;
    j["uid"] = r.uid;
    j["predictions"] = r.predictions;
    return j.dump();
  });
}

std::vector<PredictionRecord> read_prediction_dump(const std::filesystem::path& path) {
  return parse_lines(path, [](std::string_view l) {
    const auto j = nlohmann::json::parse(l);
    return PredictionRecord{j.at("uid").get<std::string>(),
                            j.at("predictions").get<std::vector<std::string>>()};
  });
}

}  // namespace tkgqa
