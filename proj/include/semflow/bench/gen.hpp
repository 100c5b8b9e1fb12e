#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semflow/bench/eval.hpp"
#include "semflow/bench/random.hpp"
#include "semflow/document.hpp"
#include "semflow/extraction/extraction.hpp"

namespace semflow::bench {

inline constexpr const char* kFixturePattern = "SEQ(Discharge, WITHIN(NOT(FollowUp), 30 days))";
inline constexpr const char* kFixturePatternId = "missed_followup";
inline constexpr Timestamp kDay = 86400;

struct Topic {
  std::string name;
  std::vector<std::string> sentences;
};

/// Clinical-style filler by topic. No sentence contains an event cue.
inline const std::vector<Topic>& clinical_topics() {
  static const std::vector<Topic> t{
      {"cardiac",
       {"Telemetry shows sinus rhythm with occasional premature beats.",
        "Blood pressure trended down after the beta blocker dose was adjusted.",
        "Echocardiogram reports preserved ejection fraction and mild valve thickening.",
        "Chest pain resolved overnight and troponin remained flat.",
        "Cardiology recommends continuing anticoagulation for atrial fibrillation.",
        "Heart rate stayed between sixty and eighty beats per minute."}},
      {"respiratory",
       {"Oxygen saturation improved on two liters by nasal cannula.",
        "Chest radiograph shows clearing of the right lower lobe infiltrate.",
        "Nebulized bronchodilators were given every four hours.",
        "Breath sounds are diminished at both lung bases.",
        "Pulmonology suggests spirometry once the exacerbation settles.",
        "Cough is productive of small amounts of clear sputum."}},
      {"renal",
       {"Creatinine is trending toward baseline with intravenous fluids.",
        "Urine output was adequate over the last shift.",
        "Potassium was repleted after a low morning value.",
        "Nephrology advises holding nephrotoxic medications for now.",
        "Renal ultrasound shows no hydronephrosis.",
        "Electrolytes will be rechecked with the morning labs."}},
      {"neuro",
       {"Neurological exam is nonfocal and speech is fluent.",
        "Headache improved with scheduled acetaminophen.",
        "Brain imaging shows no acute hemorrhage or infarct.",
        "Gait is steady with a walker under physical therapy supervision.",
        "Sleep was interrupted by intermittent confusion overnight.",
        "Neurology suggests a repeat cognitive screen next week."}},
      {"infection",
       {"Blood cultures remain without growth at forty eight hours.",
        "Fever curve has improved since antibiotics were narrowed.",
        "White blood cell count is down from the prior draw.",
        "Infectious disease recommends a total of ten days of therapy.",
        "Wound edges look clean without surrounding erythema.",
        "Lactate normalized after fluid resuscitation."}},
  };
  return t;
}

/// Cue-bearing sentences per event type.
inline const std::map<std::string, std::vector<std::string>>& event_sentences() {
  static const std::map<std::string, std::vector<std::string>> s{
      {"Admission",
       {"Patient admitted through the emergency department for evaluation.",
        "She was admitted to the medical ward overnight for monitoring."}},
      {"Discharge",
       {"Patient discharged home in stable condition with written instructions.",
        "He was discharged to home with family support and a medication list."}},
      {"FollowUp",
       {"Patient attended a follow-up visit in clinic and reports feeling well.",
        "Seen today for a follow-up visit; recovery is progressing as expected."}},
      {"Outreach",
       {"Telephone outreach completed and medication adherence was reviewed.",
        "Pharmacy refill request processed and no new concerns were raised."}},
  };
  return s;
}

/// Extraction schema matching the generated vocabulary.
inline EventSchema fixture_schema() {
  EventSchema s;
  s.types = {{"Admission", "The patient is admitted to the hospital.", {}, {"admitted"}},
             {"Discharge", "The patient is discharged from the hospital.", {}, {"discharged"}},
             {"FollowUp", "The patient attends a follow-up visit after discharge.", {}, {"follow-up visit"}}};
  return s;
}

struct GenConfig {
  std::size_t entities = 20;
  std::size_t docs_per_entity = 6;
  std::size_t planted = 5;
  std::size_t decoys = 5;
  std::size_t min_chars = 700;
  std::size_t max_chars = 1100;
  Timestamp start = 1'700'000'000;
};

struct GroundTruth {
  std::string pattern = kFixturePattern;
  std::string pattern_id = kFixturePatternId;
  std::set<PatternKey> matches;
  std::map<std::string, std::string> doc_topics;
  std::vector<std::string> planted_entities;
  std::vector<std::string> decoy_entities;
};

inline void to_json(nlohmann::json& j, const GroundTruth& g) {
  j = nlohmann::json{{"pattern", g.pattern},
                     {"pattern_id", g.pattern_id},
                     {"matches", g.matches},
                     {"doc_topics", g.doc_topics},
                     {"planted_entities", g.planted_entities},
                     {"decoy_entities", g.decoy_entities}};
}

inline void from_json(const nlohmann::json& j, GroundTruth& g) {
  g.pattern = j.value("pattern", std::string(kFixturePattern));
  g.pattern_id = j.value("pattern_id", std::string(kFixturePatternId));
  g.matches = j.value("matches", std::set<PatternKey>{});
  g.doc_topics = j.value("doc_topics", std::map<std::string, std::string>{});
  g.planted_entities = j.value("planted_entities", std::vector<std::string>{});
  g.decoy_entities = j.value("decoy_entities", std::vector<std::string>{});
}

struct GenOutput {
  std::vector<Document> documents;
  GroundTruth truth;

  std::string jsonl() const {
    std::string out;
    for (const auto& d : documents) out += nlohmann::json(d).dump() + "\n";
    return out;
  }
};

/// Deterministic synthetic clinical stream. Planted entities have one
/// discharge with no follow-up visit in the next 30 days (some see a late
/// one after 45 days); decoys have a follow-up visit 7 to 25 days after
/// discharge; the rest are never discharged.
inline GenOutput gen_stream(std::uint64_t seed, const GenConfig& cfg = {}) {
  if (cfg.planted + cfg.decoys > cfg.entities)
    throw ConfigError("planted + decoys exceeds the number of entities");
  if (cfg.entities > 0 && cfg.docs_per_entity < 5)
    throw ConfigError("docs_per_entity must be >= 5 to fit the planted scenarios");
  if (cfg.min_chars > cfg.max_chars) throw ConfigError("min_chars exceeds max_chars");
  Rng rng(seed);
  GenOutput out;
  const auto& topics = clinical_topics();

  std::vector<std::size_t> roles(cfg.entities, 0);  // 0 plain, 1 planted, 2 decoy
  for (std::size_t i = 0; i < cfg.planted; ++i) roles[i] = 1;
  for (std::size_t i = 0; i < cfg.decoys; ++i) roles[cfg.planted + i] = 2;
  rng.shuffle(roles);

  auto pick_event = [&](const std::string& type) { return rng.pick(event_sentences().at(type)); };

  for (std::size_t e = 0; e < cfg.entities; ++e) {
    char eid[32];
    std::snprintf(eid, sizeof eid, "P%03zu", e + 1);
    const std::string entity = eid;
    const auto& home = topics[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(topics.size()) - 1))];
    Timestamp t = cfg.start + static_cast<Timestamp>(e) * 3600 + rng.uniform(0, 3599);
    const bool planted_late = roles[e] == 1 && rng.chance(0.5);

    for (std::size_t k = 0; k < cfg.docs_per_entity; ++k) {
      std::string event;
      if (k == 0) event = "Admission";
      if (roles[e] != 0 && k == 2) event = "Discharge";
      if (k > 0 && k != 2 && roles[e] != 0 && k > 2) event = "Outreach";
      if (roles[e] == 2 && k == 3) event = "FollowUp";
      if (roles[e] == 1 && planted_late && k == 3) event = "FollowUp";

      if (k > 0) {
        if (roles[e] == 0 || k < 2) t += rng.uniform(1, 3) * kDay + rng.uniform(0, 7200);
        else if (k == 2) t += rng.uniform(2, 5) * kDay;
        else if (k == 3 && roles[e] == 2) t += rng.uniform(7, 25) * kDay;
        else if (k == 3 && roles[e] == 1 && planted_late) t += 45 * kDay;
        else t += rng.uniform(8, 14) * kDay;
      }
      const auto& topic = rng.chance(0.8) ? home : topics[static_cast<std::size_t>(rng.uniform(0, 4))];
      std::vector<std::string> sentences;
      const auto target = static_cast<std::size_t>(
          rng.uniform(static_cast<std::int64_t>(cfg.min_chars), static_cast<std::int64_t>(cfg.max_chars)));
      std::size_t len = event.empty() ? 0 : pick_event(event).size();
      while (len < target) {
        sentences.push_back(rng.pick(topic.sentences));
        len += sentences.back().size() + 1;
      }
      if (!event.empty()) {
        const auto at = static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(sentences.size())));
        sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(at), pick_event(event));
      }
      Document d;
      char did[32];
      std::snprintf(did, sizeof did, "%s-d%02zu", entity.c_str(), k + 1);
      d.doc_id = did;
      d.entity_id = entity;
      d.timestamp = t;
      for (const auto& s : sentences) d.text += (d.text.empty() ? "" : " ") + s;
      d.attrs = {{"note_type", k == 0 ? "admission" : "progress"}};
      out.truth.doc_topics[d.doc_id] = topic.name;
      if (event == "Discharge" && roles[e] == 1)
        out.truth.matches.insert({entity, kFixturePatternId, {t}});
      out.documents.push_back(std::move(d));
    }
    if (roles[e] == 1) out.truth.planted_entities.push_back(entity);
    if (roles[e] == 2) out.truth.decoy_entities.push_back(entity);
  }
  std::stable_sort(out.documents.begin(), out.documents.end(), [](const Document& a, const Document& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.doc_id < b.doc_id;
  });
  return out;
}

/// Short single-topic notes for the clustering suite; truth is the topic.
inline std::pair<std::vector<Document>, std::map<std::string, std::string>> gen_topic_stream(std::uint64_t seed,
                                                                                         std::size_t n) {
  Rng rng(seed);
  const auto& topics = clinical_topics();
  std::vector<Document> docs;
  std::map<std::string, std::string> truth;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = topics[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(topics.size()) - 1))];
    Document d;
    char id[32];
    std::snprintf(id, sizeof id, "t%04zu", i);
    d.doc_id = id;
    d.entity_id = "stream";
    d.timestamp = static_cast<Timestamp>(i);
    d.text = t.name + " note. " + rng.pick(t.sentences);
    truth[d.doc_id] = t.name;
    docs.push_back(std::move(d));
  }
  return {docs, truth};
}

}  // namespace semflow::bench
