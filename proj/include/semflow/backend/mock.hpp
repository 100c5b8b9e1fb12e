#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/backend.hpp"
#include "semflow/backend/prompt.hpp"
#include "semflow/common/text.hpp"

namespace semflow {

inline constexpr std::size_t kMockDimension = 64;

/// Hashed bag-of-words: each lower-cased word adds 1 to bucket
/// fnv1a(word) % dim, then the vector is L2-normalized.
inline Vector hash_embed(std::string_view s, std::size_t dim = kMockDimension) {
  Vector v(dim, 0.0);
  for (const auto& w : text::words(s)) v[text::fnv1a(w) % dim] += 1.0;
  const double n = norm(v);
  if (n > 0)
    for (auto& x : v) x /= n;
  return v;
}

struct MockRule {
  std::string contains;  // case-insensitive substring of the payload
  std::string reply;
  std::string task;      // empty: any task
};

struct MockConfig {
  enum class Mode { Task, Echo, Rules };
  Mode mode = Mode::Task;
  std::vector<MockRule> rules;
  std::string default_reply = "NO";
  /// Replies returned in order before anything else; once exhausted the
  /// normal dispatch resumes.
  std::vector<std::string> script;
  std::size_t dimension = kMockDimension;
  /// Fail every n-th completion with BackendError (0 disables).
  std::size_t fail_every = 0;
};

namespace mock_detail {

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> s{
      "a",    "an",   "and",  "are",  "as",   "at",    "be",   "by",   "for",  "from", "has",
      "have", "in",   "is",   "it",   "its",  "of",    "on",   "or",   "that", "the",  "this",
      "to",   "was",  "were", "with", "will", "patient", "noted", "today", "after", "about",
      "into", "over", "their", "there", "these", "they", "some", "more", "than", "very"};
  return s;
}

inline std::vector<std::string> significant_words(std::string_view s) {
  std::vector<std::string> out;
  for (auto& w : text::words(s))
    if (w.size() >= 4 && !stopwords().count(w)) out.push_back(std::move(w));
  return out;
}

inline double jaccard(std::string_view a, std::string_view b) {
  const auto wa = text::words(a), wb = text::words(b);
  std::set<std::string> sa(wa.begin(), wa.end()), sb(wb.begin(), wb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.count(w);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& part : text::split(s, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

struct EventLine {
  std::string type;
  std::vector<std::string> attrs;
  std::vector<std::string> cues;
};

/// "EVENT <type>: <prompt> | attrs: a, b | cues: x, y"
inline std::vector<EventLine> event_lines(std::string_view header) {
  std::vector<EventLine> out;
  for (const auto& line : text::split(header, '\n')) {
    if (line.rfind("EVENT ", 0) != 0) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    EventLine ev;
    ev.type = std::string(text::trim(std::string_view(line).substr(6, colon - 6)));
    for (const auto& field : text::split(std::string_view(line).substr(colon + 1), '|')) {
      auto f = text::trim(field);
      if (f.rfind("attrs:", 0) == 0) ev.attrs = split_list(f.substr(6));
      if (f.rfind("cues:", 0) == 0) ev.cues = split_list(f.substr(5));
    }
    out.push_back(std::move(ev));
  }
  return out;
}

/// Earliest case-insensitive occurrence of any cue; returns (pos, len).
inline std::optional<std::pair<std::size_t, std::size_t>> first_cue(std::string_view body,
                                                                    const std::vector<std::string>& cues,
                                                                    std::size_t from = 0) {
  std::optional<std::pair<std::size_t, std::size_t>> best;
  const auto lower = text::to_lower(body);
  for (const auto& c : cues) {
    const auto pos = lower.find(text::to_lower(c), from);
    if (pos != std::string::npos && (!best || pos < best->first)) best = {{pos, c.size()}};
  }
  return best;
}

/// Value following "<key>:" or "<key>=" in the text, up to the next
/// whitespace or punctuation.
inline std::optional<std::string> attr_value(std::string_view body, const std::string& key) {
  const auto lower = text::to_lower(body);
  const auto k = text::to_lower(key);
  for (std::size_t pos = lower.find(k); pos != std::string::npos; pos = lower.find(k, pos + 1)) {
    std::size_t i = pos + k.size();
    if (pos > 0 && std::isalnum(static_cast<unsigned char>(lower[pos - 1]))) continue;
    if (i >= body.size() || (body[i] != ':' && body[i] != '=')) continue;
    ++i;
    while (i < body.size() && body[i] == ' ') ++i;
    std::size_t j = i;
    while (j < body.size() && (std::isalnum(static_cast<unsigned char>(body[j])) || body[j] == '-' || body[j] == '_'))
      ++j;
    if (j > i) return std::string(body.substr(i, j - i));
  }
  return std::nullopt;
}

inline std::string extract(const prompt::Parsed& p) {
  struct Hit {
    std::size_t pos;
    nlohmann::json ev;
  };
  std::vector<Hit> hits;
  for (const auto& line : event_lines(p.header)) {
    const auto cue = first_cue(p.payload, line.cues);
    if (!cue) continue;
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& a : line.attrs)
      if (auto v = attr_value(p.payload, a)) attrs[a] = *v;
    hits.push_back({cue->first, {{"event_type", line.type},
                                 {"attrs", attrs},
                                 {"evidence_quote", p.payload.substr(cue->first, cue->second)}}});
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
  nlohmann::json arr = nlohmann::json::array();
  for (auto& h : hits) arr.push_back(std::move(h.ev));
  return arr.dump();
}

inline std::string filter(const prompt::Parsed& p) {
  const auto criterion = prompt::header_value(p.header, "criterion");
  std::vector<std::string> quoted;
  for (std::size_t i = criterion.find('"'); i != std::string::npos;) {
    const auto j = criterion.find('"', i + 1);
    if (j == std::string::npos) break;
    quoted.push_back(criterion.substr(i + 1, j - i - 1));
    i = criterion.find('"', j + 1);
  }
  if (text::trim(p.payload).empty()) return "NO";
  if (quoted.empty()) return "YES";
  for (const auto& q : quoted)
    if (text::ifind(p.payload, q) != std::string::npos) return "YES";
  return "NO";
}

struct Group {
  std::string id;
  std::string label;
};

/// "GROUP <id>: <label> | exemplars"
inline std::vector<Group> groups(std::string_view header) {
  std::vector<Group> out;
  for (const auto& line : text::split(header, '\n')) {
    if (line.rfind("GROUP ", 0) != 0) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const auto bar = line.find('|', colon);
    out.push_back({std::string(text::trim(std::string_view(line).substr(6, colon - 6))),
                   std::string(text::trim(std::string_view(line).substr(
                       colon + 1, bar == std::string::npos ? std::string::npos : bar - colon - 1)))});
  }
  return out;
}

inline std::string group_assign(const prompt::Parsed& p) {
  const auto sig = significant_words(p.payload);
  const std::string label = sig.empty() ? "misc" : sig.front();
  for (const auto& g : groups(p.header))
    if (text::to_lower(g.label) == label) return g.id;
  return "NEW: " + label;
}

/// Merges groups that carry the same label into the first of them.
inline std::string group_refine(const prompt::Parsed& p) {
  std::map<std::string, std::vector<std::string>> by_label;
  std::vector<std::string> order;
  for (const auto& g : groups(p.header)) {
    const auto l = text::to_lower(g.label);
    if (!by_label.count(l)) order.push_back(l);
    by_label[l].push_back(g.id);
  }
  std::string plan;
  for (const auto& l : order) {
    const auto& ids = by_label[l];
    if (ids.size() < 2) continue;
    plan += "merge ";
    for (std::size_t i = 0; i < ids.size(); ++i) plan += (i ? "," : "") + ids[i];
    plan += '\n';
  }
  return plan;
}

inline std::string window_continue(const prompt::Parsed& p) {
  const auto summary = prompt::header_value(p.header, "summary");
  const auto a = significant_words(summary);
  const std::set<std::string> sa(a.begin(), a.end());
  for (const auto& w : significant_words(p.payload))
    if (sa.count(w)) return "YES";
  return "NO";
}

inline std::string rag_answer(const prompt::Parsed& p) {
  for (const auto& line : text::split(p.payload, '\n')) {
    std::string_view l = text::trim(line);
    if (l.empty()) continue;
    if (l.front() == '[') {
      const auto close = l.find(']');
      if (close != std::string_view::npos) l = text::trim(l.substr(close + 1));
    }
    if (!l.empty()) return text::first_sentence(l);
  }
  return "NO CONTEXT";
}

/// Baseline judge: finds the positive event types of the pattern in order
/// among the "[ts=N] text" payload lines. It does not understand negation.
inline std::string pattern_judge(const prompt::Parsed& p) {
  const auto lines = event_lines(p.header);
  const auto positives = split_list(prompt::header_value(p.header, "positive"));
  std::map<std::string, std::vector<std::string>> cues;
  for (const auto& l : lines) cues[l.type] = l.cues;
  std::vector<std::int64_t> ts;
  std::size_t next = 0;
  for (const auto& raw : text::split(p.payload, '\n')) {
    if (next >= positives.size()) break;
    std::string_view l = raw;
    if (l.rfind("[ts=", 0) != 0) continue;
    const auto close = l.find(']');
    if (close == std::string_view::npos) continue;
    const auto t = std::stoll(std::string(l.substr(4, close - 4)));
    const auto body = l.substr(close + 1);
    while (next < positives.size() && first_cue(body, cues[positives[next]])) {
      ts.push_back(t);
      ++next;
    }
  }
  const bool ok = !positives.empty() && next == positives.size();
  return nlohmann::json{{"satisfied", ok}, {"timestamps", ok ? ts : std::vector<std::int64_t>{}}}.dump();
}

inline std::optional<std::int64_t> days_in(std::string_view task) {
  const auto w = text::words(task);
  for (std::size_t i = 0; i + 1 < w.size(); ++i)
    if ((w[i + 1] == "days" || w[i + 1] == "day") && std::all_of(w[i].begin(), w[i].end(), ::isdigit))
      return std::stoll(w[i]);
  return std::nullopt;
}

/// Template drafter for the natural-language layer.
inline std::string nl_draft(const prompt::Parsed& p) {
  const auto& task = p.payload;
  const bool discharge = text::ifind(task, "discharg") != std::string::npos;
  const bool follow = text::ifind(task, "follow") != std::string::npos;
  if (!discharge || !follow)
    return nlohmann::json{{"clarification", "Which clinical events should the pipeline detect, and in "
                                            "what temporal order?"}}
        .dump();
  const auto days = days_in(task);
  if (!days)
    return nlohmann::json{{"clarification", "Within how many days must the follow-up occur?"}}.dump();
  nlohmann::json schema = nlohmann::json::array(
      {{{"event_type", "Discharge"},
        {"prompt", "The patient is discharged from the hospital."},
        {"attrs", {"dest"}},
        {"cues", {"discharged"}}},
       {{"event_type", "FollowUp"},
        {"prompt", "The patient attends a follow-up visit after discharge."},
        {"attrs", nlohmann::json::array()},
        {"cues", {"follow-up visit"}}}});
  const auto pattern = "SEQ(Discharge, WITHIN(NOT(FollowUp), " + std::to_string(*days) + " days))";
  nlohmann::json spec{
      {"pipeline_id", "nl-pipeline"},
      {"source", {{"id", "source"}}},
      {"operators",
       {{{"id", "extract"}, {"kind", "sem_extract"}, {"inputs", {"source"}}, {"params", {{"schema", schema}}}},
        {{"id", "pattern"},
         {"kind", "pattern_match"},
         {"inputs", {"extract"}},
         {"params", {{"pattern", pattern}, {"pattern_id", "missed_followup"}}}}}},
      {"sinks", {"pattern"}}};
  return spec.dump();
}

}  // namespace mock_detail

/// Deterministic backend for tests and the bench harness.
///
/// Completion order: scripted replies, then keyword rules over the prompt
/// payload, then (Task mode) a handler for the prompt's task tag, then
/// `default_reply`. Echo mode returns the prompt verbatim.
class MockBackend : public ModelBackend {
 public:
  explicit MockBackend(MockConfig cfg = {}) : cfg_(std::move(cfg)) {}

  std::string provider() const override { return "mock"; }
  std::size_t dimension() const override { return cfg_.dimension; }
  const MockConfig& config() const noexcept { return cfg_; }

  Completion complete(const std::string& prompt) override {
    std::string reply;
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++calls_;
      if (cfg_.fail_every && calls_ % cfg_.fail_every == 0)
        throw BackendError("mock backend: injected failure on call " + std::to_string(calls_));
      if (next_script_ < cfg_.script.size()) reply = cfg_.script[next_script_++];
      else reply = dispatch(prompt);
    }
    Completion c;
    c.text = std::move(reply);
    c.usage.prompt_tokens = static_cast<std::int64_t>(text::count_tokens(prompt));
    c.usage.completion_tokens = static_cast<std::int64_t>(text::count_tokens(c.text));
    return c;
  }

  Embedding embed(const std::string& s) override {
    Embedding e;
    e.vector = hash_embed(s, cfg_.dimension);
    e.zero = norm(e.vector) == 0;
    e.usage.prompt_tokens = static_cast<std::int64_t>(text::count_tokens(s));
    return e;
  }

 private:
  MockConfig cfg_;
  std::mutex mu_;
  std::size_t calls_ = 0;
  std::size_t next_script_ = 0;

  std::string dispatch(const std::string& full) const {
    if (cfg_.mode == MockConfig::Mode::Echo) return full;
    const auto p = prompt::parse(full);
    for (const auto& r : cfg_.rules) {
      if (!r.task.empty() && r.task != p.tag) continue;
      if (text::ifind(p.payload, r.contains) != std::string::npos) return r.reply;
    }
    if (cfg_.mode == MockConfig::Mode::Task) {
      using namespace mock_detail;
      if (p.tag == "extract_events") return extract(p);
      if (p.tag == "filter") return filter(p);
      if (p.tag == "map") {
        const auto instr = prompt::header_value(p.header, "instruction");
        return text::ifind(instr, "summar") != std::string::npos ? text::first_sentence(p.payload) : p.payload;
      }
      if (p.tag == "summarize") return text::first_sentence(p.payload);
      if (p.tag == "aggregate") return p.payload;
      if (p.tag == "join") {
        const auto nl = p.payload.find('\n');
        const auto left = p.payload.substr(0, nl);
        const auto right = nl == std::string::npos ? std::string() : p.payload.substr(nl + 1);
        return jaccard(left.substr(std::min<std::size_t>(5, left.size())),
                       right.substr(std::min<std::size_t>(6, right.size()))) >= 0.5
                   ? "YES"
                   : "NO";
      }
      if (p.tag == "groupby_assign") return group_assign(p);
      if (p.tag == "groupby_refine") return group_refine(p);
      if (p.tag == "window_continue") return window_continue(p);
      if (p.tag == "rag_answer") return rag_answer(p);
      if (p.tag == "pattern_judge") return pattern_judge(p);
      if (p.tag == "nl_draft" || p.tag == "nl_repair") return nl_draft(p);
    }
    return cfg_.default_reply;
  }
};

inline MockConfig mock_config_from_json(const nlohmann::json& j) {
  MockConfig c;
  const auto mode = j.value("mode", std::string("task"));
  if (mode == "task") c.mode = MockConfig::Mode::Task;
  else if (mode == "echo") c.mode = MockConfig::Mode::Echo;
  else if (mode == "rules") c.mode = MockConfig::Mode::Rules;
  else throw ConfigError("unknown mock mode '" + mode + "'");
  if (j.contains("rules"))
    for (const auto& r : j.at("rules"))
      c.rules.push_back({r.at("contains").get<std::string>(), r.at("reply").get<std::string>(),
                         r.value("task", std::string())});
  c.default_reply = j.value("default_reply", c.default_reply);
  c.script = j.value("script", std::vector<std::string>{});
  c.dimension = j.value("dimension", kMockDimension);
  c.fail_every = j.value("fail_every", std::size_t{0});
  if (c.dimension == 0) throw ConfigError("mock dimension must be positive");
  return c;
}

}  // namespace semflow
