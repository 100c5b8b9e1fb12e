#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/retrieval.hpp"
#include "semflow/dataflow/operator.hpp"
#include "semflow/extraction/extraction.hpp"
#include "semflow/nfa/automaton.hpp"
#include "semflow/nfa/matcher.hpp"
#include "semflow/ops/groupby.hpp"
#include "semflow/ops/semantic.hpp"
#include "semflow/ops/window.hpp"
#include "semflow/pattern/format.hpp"
#include "semflow/pattern/parser.hpp"

namespace semflow {

namespace operators {

using nfa::kDefaultInstanceCap;
using nfa::Matcher;
using nfa::Nfa;

class Passthrough : public Operator {
 public:
  std::vector<Record> process(const Record& r, std::size_t) override { return {r}; }
};

/// Structural filter: "contains" (document text), "attr" + "equals"
/// (document or event attrs), "event_types" (events).
class StructuralFilter : public Operator {
 public:
  explicit StructuralFilter(const OperatorContext& ctx) {
    contains_ = params::str(ctx.params, "contains", "");
    attr_ = params::str(ctx.params, "attr", "");
    equals_ = params::str(ctx.params, "equals", "");
    if (ctx.params.contains("event_types")) types_ = ctx.params.at("event_types").get<std::set<std::string>>();
  }

  std::vector<Record> process(const Record& r, std::size_t) override {
    bool keep = true;
    if (const auto* d = std::get_if<Document>(&r)) {
      if (!contains_.empty()) keep = keep && text::ifind(d->text, contains_) != std::string::npos;
      if (!attr_.empty()) keep = keep && d->attrs.count(attr_) && d->attrs.at(attr_) == equals_;
    } else if (const auto* e = std::get_if<SemanticEvent>(&r)) {
      if (!types_.empty()) keep = keep && types_.count(e->event_type);
      if (!attr_.empty()) keep = keep && e->attrs.count(attr_) && e->attrs.at(attr_) == equals_;
    }
    if (keep) return {r};
    return {};
  }

 private:
  std::string contains_, attr_, equals_;
  std::set<std::string> types_;
};

class SemFilter : public Operator {
 public:
  explicit SemFilter(const OperatorContext& ctx)
      : backend_(ctx.backend),
        criterion_(ctx.params.contains("criterion") ? params::required_str(ctx.params, "criterion", ctx.id)
                                                    : params::required_str(ctx.params, "prompt", ctx.id)),
        strategy_(ops::parse_strategy(params::str(ctx.params, "strategy", "llm"))),
        threshold_(params::num(ctx.params, "threshold", ops::kDefaultThreshold)) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    if (ops::sem_filter(std::get<Document>(r), criterion_, *backend_, strategy_, threshold_)) return {r};
    return {};
  }

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::string criterion_;
  ops::Strategy strategy_;
  double threshold_;
};

class SemMap : public Operator {
 public:
  explicit SemMap(const OperatorContext& ctx)
      : backend_(ctx.backend), prompt_(params::required_str(ctx.params, "prompt", ctx.id)) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    return {ops::sem_map(std::get<Document>(r), prompt_, *backend_)};
  }

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::string prompt_;
};

/// Tumbling count windows per entity; a partial window is emitted at flush.
class SemAggregate : public Operator {
 public:
  explicit SemAggregate(const OperatorContext& ctx)
      : backend_(ctx.backend),
        prompt_(params::required_str(ctx.params, "prompt", ctx.id)),
        size_(static_cast<std::size_t>(params::integer(ctx.params, "window_size", 5, 1))) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    const auto& d = std::get<Document>(r);
    auto& w = open_[d.entity_id];
    w.push_back(d);
    if (w.size() < size_) return {};
    auto out = ops::sem_aggregate(w, prompt_, *backend_);
    w.clear();
    return {out};
  }

  std::vector<Record> flush() override {
    std::vector<Record> out;
    for (auto& [_, w] : open_)
      if (!w.empty()) out.push_back(ops::sem_aggregate(w, prompt_, *backend_));
    open_.clear();
    return out;
  }

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::string prompt_;
  std::size_t size_;
  std::map<std::string, std::vector<Document>> open_;
};

/// Symmetric windowed similarity join over two document inputs. Each
/// side is buffered for `window_s` seconds of event time.
class SemJoin : public Operator {
 public:
  explicit SemJoin(const OperatorContext& ctx)
      : backend_(ctx.backend),
        prompt_(params::str(ctx.params, "prompt", "Do the two documents describe the same thing?")),
        strategy_(ops::parse_strategy(params::str(ctx.params, "strategy", "embedding"))),
        threshold_(params::num(ctx.params, "threshold", ops::kDefaultThreshold)),
        window_(params::integer(ctx.params, "window_s", 86400, 0)) {}

  std::vector<Record> process(const Record& r, std::size_t input) override {
    const auto& d = std::get<Document>(r);
    auto& mine = buffers_[input == 0 ? 0 : 1];
    auto& other = buffers_[input == 0 ? 1 : 0];
    for (auto* b : {&mine, &other})
      while (!b->empty() && b->front().timestamp < d.timestamp - window_) b->pop_front();
    const std::vector<Document> probe(other.begin(), other.end());
    std::vector<Record> out;
    for (const auto& [a, b] : ops::sem_join(d, probe, prompt_, *backend_, threshold_, strategy_)) {
      const auto& left = input == 0 ? a : b;
      const auto& right = input == 0 ? b : a;
      Document j;
      j.doc_id = left.doc_id + "|" + right.doc_id;
      j.entity_id = left.entity_id == right.entity_id ? left.entity_id : "mixed";
      j.timestamp = std::max(left.timestamp, right.timestamp);
      j.text = left.text + "\n" + right.text;
      j.attrs = {{"join.left", left.doc_id}, {"join.right", right.doc_id}};
      out.push_back(std::move(j));
    }
    mine.push_back(d);
    return out;
  }

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::string prompt_;
  ops::Strategy strategy_;
  double threshold_;
  Timestamp window_;
  std::deque<Document> buffers_[2];
};

class SemGroupBy : public Operator {
 public:
  explicit SemGroupBy(const OperatorContext& ctx) : backend_(ctx.backend) {
    ops::GroupByConfig cfg;
    cfg.strategy = ops::parse_group_strategy(params::str(ctx.params, "strategy", "M3"));
    cfg.threshold = params::num(ctx.params, "threshold", ops::kDefaultThreshold);
    cfg.refine_every = static_cast<std::size_t>(params::integer(ctx.params, "refine_every", 10, 1));
    group_ = std::make_unique<ops::GroupBy>(cfg, *backend_);
  }

  std::vector<Record> process(const Record& r, std::size_t) override {
    auto d = std::get<Document>(r);
    d.attrs["group_id"] = group_->assign(d);
    return {d};
  }

  nlohmann::json state() const override {
    return {{"groups", group_->state().groups},
            {"tuples_seen", group_->state().tuples_seen},
            {"refinements", group_->refinements()},
            {"rejected_plans", group_->rejected_plans()}};
  }

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::unique_ptr<ops::GroupBy> group_;
};

/// Emits each closed window (per entity) as one document whose text is the
/// member texts joined by newlines.
class SemWindowOp : public Operator {
 public:
  explicit SemWindowOp(const OperatorContext& ctx)
      : backend_(ctx.backend),
        strategy_(ops::parse_window_strategy(params::str(ctx.params, "strategy", "pairwise"))),
        threshold_(params::num(ctx.params, "threshold", ops::kDefaultThreshold)) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    const auto& d = std::get<Document>(r);
    auto it = windows_.find(d.entity_id);
    if (it == windows_.end())
      it = windows_.emplace(d.entity_id, std::make_unique<ops::SemWindow>(strategy_, *backend_, threshold_)).first;
    std::vector<Record> out;
    if (auto closed = it->second->push(d)) out.push_back(to_doc(*closed));
    return out;
  }

  std::vector<Record> flush() override {
    std::vector<Record> out;
    for (auto& [_, w] : windows_)
      if (auto closed = w->flush()) out.push_back(to_doc(*closed));
    return out;
  }

 private:
  std::shared_ptr<ModelBackend> backend_;
  ops::WindowStrategy strategy_;
  double threshold_;
  std::map<std::string, std::unique_ptr<ops::SemWindow>> windows_;

  static Document to_doc(const std::vector<Document>& w) {
    Document d;
    d.doc_id = "win:" + w.front().doc_id + ".." + w.back().doc_id;
    d.entity_id = w.front().entity_id;
    d.timestamp = w.back().timestamp;
    std::string members;
    for (const auto& x : w) {
      if (!d.text.empty()) d.text += '\n';
      d.text += x.text;
      members += (members.empty() ? "" : ",") + x.doc_id;
    }
    d.attrs = {{"window.size", std::to_string(w.size())}, {"window.members", members}};
    return d;
  }
};

/// Answers every document against the documents ingested before it.
class ContRag : public Operator {
 public:
  explicit ContRag(const OperatorContext& ctx)
      : backend_(ctx.backend),
        k_(static_cast<std::size_t>(params::integer(ctx.params, "k", 3, 1))),
        index_(ctx.backend, Chunking{static_cast<std::size_t>(params::integer(ctx.params, "chunk_size", 400, 1)),
                                     static_cast<std::size_t>(params::integer(ctx.params, "overlap", 80, 0))}) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    const auto& d = std::get<Document>(r);
    auto answer = ops::cont_rag(d, index_, *backend_, k_);
    index_.add(d);
    return {answer};
  }

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::size_t k_;
  RetrievalIndex index_;
};

inline EventSchema schema_param(const OperatorContext& ctx) {
  if (!ctx.params.contains("schema")) throw SpecError("operator '" + ctx.id + "' needs a 'schema' param");
  EventSchema s;
  try {
    s = ctx.params.at("schema").get<EventSchema>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("operator '" + ctx.id + "': malformed schema: " + e.what());
  }
  validate_schema(s);
  return s;
}

/// Extraction stage. mode "full" sends the whole document, "rag" the top-k
/// chunks per event type.
class Extractor {
 public:
  explicit Extractor(const OperatorContext& ctx)
      : backend_(ctx.backend),
        schema_(schema_param(ctx)),
        rag_(params::str(ctx.params, "mode", "full") == "rag"),
        k_(static_cast<std::size_t>(params::integer(ctx.params, "k", 2, 1))) {
    const auto mode = params::str(ctx.params, "mode", "full");
    if (mode != "full" && mode != "rag") throw SpecError("mode must be 'full' or 'rag'");
    if (rag_)
      index_ = std::make_unique<RetrievalIndex>(
          ctx.backend, Chunking{static_cast<std::size_t>(params::integer(ctx.params, "chunk_size", 400, 1)),
                                static_cast<std::size_t>(params::integer(ctx.params, "overlap", 80, 0))});
  }

  /// Extracted events, or nullopt when the output could not be parsed.
  std::optional<std::vector<SemanticEvent>> run(const Document& d) {
    try {
      auto evs = rag_ ? extract_events_rag(d, schema_, *index_, *backend_, k_) : extract_events(d, schema_, *backend_);
      events_.insert(events_.end(), evs.begin(), evs.end());
      return evs;
    } catch (const ExtractionParseError&) {
      return std::nullopt;
    }
  }

  const std::vector<SemanticEvent>& events() const noexcept { return events_; }
  const EventSchema& schema() const noexcept { return schema_; }

 private:
  std::shared_ptr<ModelBackend> backend_;
  EventSchema schema_;
  bool rag_;
  std::size_t k_;
  std::unique_ptr<RetrievalIndex> index_;
  std::vector<SemanticEvent> events_;
};

class SemExtract : public Operator {
 public:
  explicit SemExtract(const OperatorContext& ctx) : ex_(ctx) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    auto evs = ex_.run(std::get<Document>(r));
    if (!evs) {
      skip();
      return {};
    }
    return {evs->begin(), evs->end()};
  }

  std::vector<SemanticEvent> events() const override { return ex_.events(); }

 private:
  Extractor ex_;
};

inline std::shared_ptr<const Nfa> pattern_param(const OperatorContext& ctx) {
  const auto text = params::required_str(ctx.params, "pattern", ctx.id);
  return std::make_shared<const Nfa>(nfa::compile(pattern::parse_pattern(text)));
}

/// NFA matching stage over an event stream.
class PatternStage {
 public:
  explicit PatternStage(const OperatorContext& ctx)
      : matcher_(pattern_param(ctx), params::str(ctx.params, "pattern_id", ctx.id),
                 static_cast<std::size_t>(params::integer(ctx.params, "instance_cap",
                                                          static_cast<std::int64_t>(kDefaultInstanceCap), 1))) {}

  std::vector<Record> advance(const SemanticEvent& e) {
    auto& wm = wm_[e.entity_id];
    wm = std::max(wm, e.timestamp);
    return wrap(matcher_.advance(e));
  }

  std::vector<Record> watermark(const std::string& entity, Timestamp t) {
    auto it = wm_.find(entity);
    if (it != wm_.end() && t <= it->second) return {};
    wm_[entity] = t;
    return wrap(matcher_.on_watermark(entity, t));
  }

  std::vector<Record> flush() { return wrap(matcher_.flush()); }

  nlohmann::json state() const {
    return {{"pattern", matcher_.nfa().source_text}, {"pattern_id", matcher_.pattern_id()}, {"matcher", matcher_.snapshot()}};
  }

 private:
  Matcher matcher_;
  std::map<std::string, Timestamp> wm_;

  static std::vector<Record> wrap(std::vector<PatternMatch> ms) {
    std::vector<Record> out;
    for (auto& m : ms) out.emplace_back(std::move(m));
    return out;
  }
};

class PatternMatchOp : public Operator {
 public:
  explicit PatternMatchOp(const OperatorContext& ctx) : stage_(ctx) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    return stage_.advance(std::get<SemanticEvent>(r));
  }
  std::vector<Record> watermark(const std::string& e, Timestamp t) override { return stage_.watermark(e, t); }
  std::vector<Record> flush() override { return stage_.flush(); }
  nlohmann::json state() const override { return stage_.state(); }

 private:
  PatternStage stage_;
};

/// Extraction followed by NFA matching in one operator.
class SemPattern : public Operator {
 public:
  explicit SemPattern(const OperatorContext& ctx) : ex_(ctx), stage_(ctx) {}

  std::vector<Record> process(const Record& r, std::size_t) override {
    auto evs = ex_.run(std::get<Document>(r));
    if (!evs) {
      skip();
      return {};
    }
    std::vector<Record> out;
    for (const auto& e : *evs) {
      auto ms = stage_.advance(e);
      out.insert(out.end(), ms.begin(), ms.end());
    }
    return out;
  }
  std::vector<Record> watermark(const std::string& e, Timestamp t) override { return stage_.watermark(e, t); }
  std::vector<Record> flush() override { return stage_.flush(); }
  std::vector<SemanticEvent> events() const override { return ex_.events(); }

  nlohmann::json state() const override {
    auto j = stage_.state();
    j["events"] = ex_.events();
    return j;
  }

 private:
  Extractor ex_;
  PatternStage stage_;
};

/// Positive (non-negated) event types of a pattern in order of appearance.
inline std::vector<std::string> positive_types(const pattern::PatternExpr& e) {
  std::vector<std::string> out;
  std::function<void(const pattern::PatternExpr&)> walk = [&](const pattern::PatternExpr& x) {
    if (x.kind == pattern::Kind::Not) return;
    if (x.kind == pattern::Kind::Atom) {
      if (std::find(out.begin(), out.end(), x.event_type) == out.end()) out.push_back(x.event_type);
      return;
    }
    for (const auto& c : x.children) walk(c);
  };
  walk(e);
  return out;
}

/// Baseline: per entity, the documents so far (or the top-k chunks per
/// positive event type) are sent to the model at every arrival with the
/// question whether the pattern is satisfied.
class LlmPatternJudge : public Operator {
 public:
  explicit LlmPatternJudge(const OperatorContext& ctx)
      : backend_(ctx.backend),
        schema_(schema_param(ctx)),
        pattern_id_(params::str(ctx.params, "pattern_id", ctx.id)),
        rag_(params::str(ctx.params, "mode", "full") == "rag"),
        k_(static_cast<std::size_t>(params::integer(ctx.params, "k", 2, 1))),
        chunking_{static_cast<std::size_t>(params::integer(ctx.params, "chunk_size", 400, 1)),
                  static_cast<std::size_t>(params::integer(ctx.params, "overlap", 80, 0))} {
    const auto text = params::required_str(ctx.params, "pattern", ctx.id);
    const auto expr = pattern::parse_pattern(text);
    const auto v = pattern::validate_pattern(expr);
    if (!v.ok()) throw CompileError(v.summary());
    pattern_text_ = pattern::format_pattern(expr);
    positives_ = positive_types(expr);
    header_ = "Decide whether the temporal pattern is satisfied by the patient record below. Reply with "
              "JSON {\"satisfied\": bool, \"timestamps\": [timestamps of the matched events]}.\npattern: " +
              pattern_text_ + "\npositive: ";
    for (std::size_t i = 0; i < positives_.size(); ++i) header_ += (i ? ", " : "") + positives_[i];
    for (const auto& t : schema_.types) {
      header_ += "\nEVENT " + t.event_type + ": " + ops::one_line(t.extraction_prompt) + " | cues: ";
      for (std::size_t i = 0; i < t.cues.size(); ++i) header_ += (i ? ", " : "") + t.cues[i];
    }
  }

  std::vector<Record> process(const Record& r, std::size_t) override {
    const auto& d = std::get<Document>(r);
    auto& st = entities_[d.entity_id];
    st.docs.push_back(d);
    std::string payload;
    if (!rag_) {
      for (const auto& x : st.docs) payload += "[ts=" + std::to_string(x.timestamp) + "] " + ops::one_line(x.text) + "\n";
    } else {
      if (!st.index) st.index = std::make_unique<RetrievalIndex>(backend_, chunking_);
      if (!text::trim(d.text).empty()) st.index->add(d);
      std::map<std::string, const Document*> by_id;
      for (const auto& x : st.docs) by_id[x.doc_id] = &x;
      std::set<std::pair<Timestamp, std::string>> picked;
      std::map<std::string, std::string> text_of;
      if (st.index->size() > 0)
        for (const auto& t : positives_) {
          const auto* def = schema_.find(t);
          for (const auto& c : st.index->top_k(def ? retrieval_query(*def) : t, k_)) {
            picked.insert({by_id.at(c.doc_id)->timestamp, c.chunk_id});
            text_of[c.chunk_id] = c.text;
          }
        }
      for (const auto& [ts, id] : picked) payload += "[ts=" + std::to_string(ts) + "] " + ops::one_line(text_of[id]) + "\n";
    }
    const auto reply = backend_->complete(prompt::make("pattern_judge", header_, payload)).text;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(reply);
      if (!j.is_object() || !j.at("satisfied").is_boolean()) throw std::runtime_error("shape");
    } catch (const std::exception&) {
      skip();
      return {};
    }
    if (!j.at("satisfied").get<bool>()) return {};
    std::vector<Timestamp> ts;
    try {
      ts = j.value("timestamps", std::vector<Timestamp>{});
    } catch (const nlohmann::json::exception&) {
      skip();
      return {};
    }
    if (ts.empty() || !st.emitted.insert(ts).second) return {};
    PatternMatch m;
    m.pattern_id = pattern_id_;
    m.entity_id = d.entity_id;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      SemanticEvent e;
      e.event_id = d.entity_id + "@" + std::to_string(ts[i]) + "#" + std::to_string(i);
      e.entity_id = d.entity_id;
      e.event_type = i < positives_.size() ? positives_[i] : "?";
      e.timestamp = ts[i];
      for (const auto& x : st.docs)
        if (x.timestamp == ts[i]) {
          e.source_doc = x.doc_id;
          break;
        }
      m.events.push_back(std::move(e));
    }
    m.first_ts = *std::min_element(ts.begin(), ts.end());
    m.last_effective_ts = *std::max_element(ts.begin(), ts.end());
    m.emitted_at = d.timestamp;
    return {m};
  }

  nlohmann::json state() const override { return {{"pattern", pattern_text_}, {"positive", positives_}}; }

 private:
  struct EntityState {
    std::vector<Document> docs;
    std::unique_ptr<RetrievalIndex> index;
    std::set<std::vector<Timestamp>> emitted;
  };

  std::shared_ptr<ModelBackend> backend_;
  EventSchema schema_;
  std::string pattern_id_;
  bool rag_;
  std::size_t k_;
  Chunking chunking_;
  std::string pattern_text_;
  std::vector<std::string> positives_;
  std::string header_;
  std::map<std::string, EntityState> entities_;
};

template <typename T>
OperatorKind kind(RecordType in, RecordType out, bool model, std::size_t min_in = 1, std::size_t max_in = 1) {
  return {in, out, model, min_in, max_in, [](const OperatorContext& ctx) { return std::make_unique<T>(ctx); }};
}

}  // namespace operators

inline const OperatorRegistry& builtin_operators() {
  using namespace operators;
  using R = RecordType;
  static const OperatorRegistry reg{
      {"passthrough",
       {R::Any, R::Any, false, 1, 1, [](const OperatorContext&) { return std::make_unique<Passthrough>(); }}},
      {"filter", kind<StructuralFilter>(R::Any, R::Any, false)},
      {"sem_filter", kind<SemFilter>(R::Document, R::Document, true)},
      {"sem_map", kind<SemMap>(R::Document, R::Document, true)},
      {"sem_aggregate", kind<SemAggregate>(R::Document, R::Document, true)},
      {"sem_join", kind<SemJoin>(R::Document, R::Document, true, 2, 2)},
      {"sem_groupby", kind<SemGroupBy>(R::Document, R::Document, true)},
      {"sem_window", kind<SemWindowOp>(R::Document, R::Document, true)},
      {"cont_rag", kind<ContRag>(R::Document, R::Document, true)},
      {"sem_extract", kind<SemExtract>(R::Document, R::Event, true)},
      {"pattern_match", kind<PatternMatchOp>(R::Event, R::Match, false)},
      {"sem_pattern", kind<SemPattern>(R::Document, R::Match, true)},
      {"llm_pattern_judge", kind<LlmPatternJudge>(R::Document, R::Match, true)},
  };
  return reg;
}

}  // namespace semflow
