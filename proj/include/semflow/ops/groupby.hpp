#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/backend/backend.hpp"
#include "semflow/backend/prompt.hpp"
#include "semflow/document.hpp"
#include "semflow/ops/semantic.hpp"

namespace semflow::ops {

/// M1: LLM assignment. M2: M1 plus a merge/split refinement prompt every
/// `refine_every` tuples. M3: embedding centroids, LLM-free.
enum class GroupStrategy { M1, M2, M3 };

inline GroupStrategy parse_group_strategy(const std::string& s) {
  if (s == "M1" || s == "m1") return GroupStrategy::M1;
  if (s == "M2" || s == "m2") return GroupStrategy::M2;
  if (s == "M3" || s == "m3") return GroupStrategy::M3;
  throw ConfigError("unknown group-by strategy '" + s + "' (expected M1, M2 or M3)");
}

struct Group {
  std::string group_id;
  std::string label;
  std::vector<std::string> members;
  Vector centroid;
  std::vector<std::string> exemplar_texts;
};

struct GroupState {
  std::vector<Group> groups;
  std::size_t tuples_seen = 0;

  const Group* find(const std::string& id) const {
    for (const auto& g : groups)
      if (g.group_id == id) return &g;
    return nullptr;
  }
};

inline void to_json(nlohmann::json& j, const Group& g) {
  j = nlohmann::json{{"group_id", g.group_id}, {"label", g.label}, {"members", g.members}};
}

/// True when groups are pairwise disjoint and their union is `processed`.
inline bool is_partition(const GroupState& s, const std::vector<std::string>& processed) {
  std::set<std::string> seen;
  std::size_t n = 0;
  for (const auto& g : s.groups)
    for (const auto& m : g.members) {
      if (!seen.insert(m).second) return false;
      ++n;
    }
  const std::set<std::string> want(processed.begin(), processed.end());
  return n == want.size() && seen == want;
}

struct GroupByConfig {
  GroupStrategy strategy = GroupStrategy::M3;
  double threshold = kDefaultThreshold;
  std::size_t refine_every = 10;
  std::size_t max_exemplars = 3;
};

class GroupBy {
 public:
  GroupBy(GroupByConfig cfg, ModelBackend& backend) : cfg_(cfg), backend_(backend) {
    if (cfg_.refine_every == 0) throw ConfigError("refine_every must be >= 1");
  }

  const GroupState& state() const noexcept { return state_; }
  std::size_t refinements() const noexcept { return refinements_; }
  std::size_t rejected_plans() const noexcept { return rejected_plans_; }

  /// Assigns `doc` to a group, creating one when needed, and returns the
  /// group id. Under M2 a refinement runs after every refine_every-th tuple;
  /// an unparseable plan is dropped and counted.
  std::string assign(const Document& doc) {
    if (texts_.count(doc.doc_id)) throw DuplicateDocError("document '" + doc.doc_id + "' already grouped");
    texts_[doc.doc_id] = doc.text;
    std::string id = cfg_.strategy == GroupStrategy::M3 ? assign_embedding(doc) : assign_llm(doc);
    ++state_.tuples_seen;
    if (cfg_.strategy == GroupStrategy::M2 && state_.tuples_seen % cfg_.refine_every == 0) {
      try {
        refine();
      } catch (const PlanParseError&) {
        ++rejected_plans_;
      }
      id = group_of(doc.doc_id);
    }
    return id;
  }

  /// Asks the backend for a merge/split plan and applies it atomically.
  /// Plan lines: "merge g1,g2[,...]" or "split g3 d1,d2"; empty plan is a
  /// no-op. Throws PlanParseError and leaves the state unchanged on any
  /// invalid line.
  void refine() {
    ++refinements_;
    std::string header = "Propose merges of groups that mean the same thing and splits of mixed groups.\n"
                         "Reply one command per line: 'merge g1,g2' or 'split g3 doc1,doc2'. Reply "
                         "nothing when the grouping is fine.\n";
    header += group_lines();
    apply_plan(backend_.complete(prompt::make("groupby_refine", header, "")).text);
  }

  void apply_plan(const std::string& plan) {
    GroupState next = state_;
    for (const auto& raw : text::split(plan, '\n')) {
      const auto line = std::string(text::trim(raw));
      if (line.empty()) continue;
      const auto sp = line.find(' ');
      const auto verb = text::to_lower(line.substr(0, sp));
      const auto rest = sp == std::string::npos ? std::string() : std::string(text::trim(line.substr(sp + 1)));
      if (verb == "merge") {
        merge(next, list(rest), line);
      } else if (verb == "split") {
        const auto sp2 = rest.find(' ');
        if (sp2 == std::string::npos) throw PlanParseError("split needs a group and members: '" + line + "'");
        split(next, rest.substr(0, sp2), list(rest.substr(sp2 + 1)), line);
      } else {
        throw PlanParseError("unknown plan command '" + line + "'");
      }
    }
    state_ = std::move(next);
  }

  std::string group_of(const std::string& doc_id) const {
    for (const auto& g : state_.groups)
      if (std::find(g.members.begin(), g.members.end(), doc_id) != g.members.end()) return g.group_id;
    return {};
  }

  /// doc_id -> group_id for every processed document.
  std::map<std::string, std::string> assignment() const {
    std::map<std::string, std::string> out;
    for (const auto& g : state_.groups)
      for (const auto& m : g.members) out[m] = g.group_id;
    return out;
  }

 private:
  GroupByConfig cfg_;
  ModelBackend& backend_;
  GroupState state_;
  std::size_t next_id_ = 1;
  std::size_t refinements_ = 0;
  std::size_t rejected_plans_ = 0;
  std::map<std::string, std::string> texts_;
  std::map<std::string, Vector> embeddings_;

  static std::vector<std::string> list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& p : text::split(s, ',')) {
      const auto t = text::trim(p);
      if (!t.empty()) out.emplace_back(t);
    }
    return out;
  }

  Group& create(std::string label) {
    Group g;
    g.group_id = "g" + std::to_string(next_id_++);
    g.label = std::move(label);
    state_.groups.push_back(std::move(g));
    return state_.groups.back();
  }

  void add_member(Group& g, const Document& doc) {
    g.members.push_back(doc.doc_id);
    if (g.exemplar_texts.size() < cfg_.max_exemplars) g.exemplar_texts.push_back(doc.text);
  }

  std::string group_lines() const {
    std::string h;
    for (const auto& g : state_.groups) {
      h += "GROUP " + g.group_id + ": " + one_line(g.label) + " |";
      for (std::size_t i = 0; i < g.exemplar_texts.size(); ++i)
        h += (i ? " || " : " ") + one_line(g.exemplar_texts[i]);
      h += '\n';
    }
    return h;
  }

  std::string assign_llm(const Document& doc) {
    std::string header =
        "Assign the document to one of the groups below. Reply with the group id, or 'NEW: <label>' "
        "when none fits.\n";
    header += group_lines();
    const auto reply = std::string(text::trim(backend_.complete(prompt::make("groupby_assign", header, doc.text)).text));
    for (auto& g : state_.groups)
      if (reply == g.group_id || text::to_lower(reply) == text::to_lower(g.label)) {
        add_member(g, doc);
        return g.group_id;
      }
    std::string label = reply;
    if (text::to_lower(reply).rfind("new:", 0) == 0) label = std::string(text::trim(reply.substr(4)));
    if (label.empty()) label = "misc";
    auto& g = create(label);
    add_member(g, doc);
    return g.group_id;
  }

  std::string assign_embedding(const Document& doc) {
    const auto e = backend_.embed(doc.text).vector;
    embeddings_[doc.doc_id] = e;
    Group* best = nullptr;
    double best_sim = 0;
    for (auto& g : state_.groups) {
      const double s = cosine(g.centroid, e);
      if (!best || s > best_sim) {
        best = &g;
        best_sim = s;
      }
    }
    if (!best || best_sim < cfg_.threshold) {
      const auto w = text::words(doc.text);
      best = &create(w.empty() ? "misc" : w.front());
      best->centroid.assign(e.size(), 0.0);
    }
    const auto n = static_cast<double>(best->members.size());
    for (std::size_t i = 0; i < e.size(); ++i) best->centroid[i] = (best->centroid[i] * n + e[i]) / (n + 1);
    add_member(*best, doc);
    return best->group_id;
  }

  Group* find(GroupState& s, const std::string& id, const std::string& line) {
    for (auto& g : s.groups)
      if (g.group_id == id) return &g;
    throw PlanParseError("plan references unknown group '" + id + "' in '" + line + "'");
  }

  void rebuild(Group& g) {
    g.exemplar_texts.clear();
    for (const auto& m : g.members)
      if (g.exemplar_texts.size() < cfg_.max_exemplars) g.exemplar_texts.push_back(texts_.at(m));
    if (cfg_.strategy != GroupStrategy::M3) return;
    g.centroid.assign(backend_.dimension(), 0.0);
    for (const auto& m : g.members) {
      const auto& e = embeddings_.at(m);
      for (std::size_t i = 0; i < e.size() && i < g.centroid.size(); ++i) g.centroid[i] += e[i];
    }
    for (auto& x : g.centroid) x /= static_cast<double>(std::max<std::size_t>(1, g.members.size()));
  }

  void merge(GroupState& s, const std::vector<std::string>& ids, const std::string& line) {
    const std::set<std::string> uniq(ids.begin(), ids.end());
    if (uniq.size() < 2 || uniq.size() != ids.size())
      throw PlanParseError("merge needs two or more distinct groups: '" + line + "'");
    Group* into = find(s, ids.front(), line);
    for (std::size_t i = 1; i < ids.size(); ++i) find(s, ids[i], line);
    for (std::size_t i = 1; i < ids.size(); ++i) {
      auto it = std::find_if(s.groups.begin(), s.groups.end(), [&](const Group& g) { return g.group_id == ids[i]; });
      into = find(s, ids.front(), line);
      into->members.insert(into->members.end(), it->members.begin(), it->members.end());
      s.groups.erase(it);
    }
    rebuild(*find(s, ids.front(), line));
  }

  void split(GroupState& s, const std::string& id, const std::vector<std::string>& docs, const std::string& line) {
    Group* src = find(s, id, line);
    if (docs.empty()) throw PlanParseError("split moves no documents: '" + line + "'");
    const std::set<std::string> moving(docs.begin(), docs.end());
    if (moving.size() != docs.size()) throw PlanParseError("split lists a document twice: '" + line + "'");
    for (const auto& d : docs)
      if (std::find(src->members.begin(), src->members.end(), d) == src->members.end())
        throw PlanParseError("split moves '" + d + "' which is not in " + id);
    if (moving.size() == src->members.size()) throw PlanParseError("split would empty " + id);
    Group g;
    g.group_id = "g" + std::to_string(next_id_++);
    g.label = src->label + "/split";
    std::vector<std::string> keep;
    for (const auto& m : src->members) (moving.count(m) ? g.members : keep).push_back(m);
    src->members = std::move(keep);
    rebuild(*src);
    rebuild(g);
    s.groups.push_back(std::move(g));
  }
};

}  // namespace semflow::ops
