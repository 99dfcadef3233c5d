#pragma once

// Dataset tour construction: chaining recorded episodes whose trajectories
// join end to start into multi-episode tours, joining their instructions, and
// a line-oriented tour file format.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqnav/errors.hpp"
#include "seqnav/geometry.hpp"
#include "seqnav/llm_client.hpp"

namespace seqnav {

inline constexpr double kStitchTolM = 0.25;  // one forward step of slack
inline constexpr int kMaxChainLen = 4;
inline constexpr const char* kTourFileFormat = "seqnav-tour/1";

/**
 * One recorded episode available for stitching. The id is the stable sort key
 * the chaining pass iterates in; start and end duplicate the trajectory's
 * endpoints for quick alignment checks.
 */
struct EpisodeRecord {
  std::string id;
  std::string scene_id;
  Path reference_path;
  std::string instruction;
  std::vector<std::string> phrases;
  Vec2 start{}, end{};
};

struct TourRecord {
  std::string scene_id;
  std::vector<std::string> episode_ids;  // chain order
  std::string stitched_instruction;
  int subtask_count = 0;  // total phrases across the chained episodes

  friend bool operator==(const TourRecord& a, const TourRecord& b) {
    return a.scene_id == b.scene_id && a.episode_ids == b.episode_ids &&
           a.stitched_instruction == b.stitched_instruction &&
           a.subtask_count == b.subtask_count;
  }
  friend bool operator!=(const TourRecord& a, const TourRecord& b) {
    return !(a == b);
  }
};

inline void validate_episode_record(const EpisodeRecord& rec) {
  using detail::require;
  require(!rec.id.empty(), "episode record: id must be non-empty");
  require(!rec.scene_id.empty(), "episode record: scene id must be non-empty");
  require(!rec.reference_path.empty(), "episode record: path must be non-empty");
  require(rec.start == rec.reference_path.front(),
          "episode record: start must equal the first path point");
  require(rec.end == rec.reference_path.back(),
          "episode record: end must equal the last path point");
  require(!rec.instruction.empty(), "episode record: instruction must be non-empty");
  require(!rec.phrases.empty(), "episode record: phrases must be non-empty");
}

// How two chained instructions merge into one; defaults to the offline join.
using InstructionJoiner =
    std::function<std::string(const std::string&, const std::string&)>;

/**
 * Greedy deterministic chaining. Within each scene (scenes in id order),
 * records are visited in stable id order; each unused record opens a chain,
 * which repeatedly appends the first unused record (again in id order) whose
 * start lies within `tol` of the chain's current end, up to `max_chain`
 * episodes. Every record lands in exactly one tour; records nothing aligns
 * with become single-episode tours. Instructions fold left through `join`.
 */
inline std::vector<TourRecord> stitch_trajectories(
    const std::vector<EpisodeRecord>& records, double tol = kStitchTolM,
    int max_chain = kMaxChainLen, const InstructionJoiner& join = {}) {
  detail::require(tol > 0.0, "stitch: tolerance must be positive");
  detail::require(max_chain >= 1, "stitch: chains need at least one episode");
  std::set<std::string> seen_ids;
  for (const EpisodeRecord& rec : records) {
    validate_episode_record(rec);
    detail::require(seen_ids.insert(rec.id).second,
                    "stitch: episode ids must be unique");
  }
  const InstructionJoiner joiner =
      join ? join : InstructionJoiner(concat_instructions_offline);

  // Scene groups in scene-id order, members in episode-id order.
  std::map<std::string, std::vector<const EpisodeRecord*>> by_scene;
  for (const EpisodeRecord& rec : records) by_scene[rec.scene_id].push_back(&rec);
  for (auto& [scene, members] : by_scene)
    std::sort(members.begin(), members.end(),
              [](const EpisodeRecord* a, const EpisodeRecord* b) {
                return a->id < b->id;
              });

  std::vector<TourRecord> tours;
  for (auto& [scene, members] : by_scene) {
    std::vector<bool> used(members.size(), false);
    for (std::size_t head = 0; head < members.size(); ++head) {
      if (used[head]) continue;
      used[head] = true;
      std::vector<const EpisodeRecord*> chain{members[head]};
      while (static_cast<int>(chain.size()) < max_chain) {
        bool extended = false;
        for (std::size_t j = 0; j < members.size(); ++j) {
          if (used[j]) continue;
          if (euclidean(chain.back()->end, members[j]->start) <= tol) {
            used[j] = true;
            chain.push_back(members[j]);
            extended = true;
            break;
          }
        }
        if (!extended) break;
      }

      TourRecord tour;
      tour.scene_id = scene;
      tour.stitched_instruction = chain.front()->instruction;
      for (const EpisodeRecord* rec : chain) {
        tour.episode_ids.push_back(rec->id);
        tour.subtask_count += static_cast<int>(rec->phrases.size());
        if (rec != chain.front())
          tour.stitched_instruction = joiner(tour.stitched_instruction,
                                             rec->instruction);
      }
      tours.push_back(std::move(tour));
    }
  }
  return tours;
}

/**
 * Post-hoc audit: every adjacent pair inside every tour must satisfy the
 * alignment tolerance against the source records. Throws on violation or on
 * an id the record set does not contain.
 */
inline void verify_tour_adjacency(const std::vector<EpisodeRecord>& records,
                                  const std::vector<TourRecord>& tours,
                                  double tol = kStitchTolM) {
  std::map<std::string, const EpisodeRecord*> by_id;
  for (const EpisodeRecord& rec : records) by_id[rec.id] = &rec;
  for (const TourRecord& tour : tours) {
    for (std::size_t i = 0; i < tour.episode_ids.size(); ++i) {
      auto it = by_id.find(tour.episode_ids[i]);
      detail::require(it != by_id.end(), "tour audit: unknown episode id");
      if (i) {
        const EpisodeRecord* prev = by_id.at(tour.episode_ids[i - 1]);
        detail::require(euclidean(prev->end, it->second->start) <= tol,
                        "tour audit: adjacency exceeds the tolerance");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Tour files: one JSON object per line.
// ---------------------------------------------------------------------------

inline std::string tours_to_jsonl(const std::vector<TourRecord>& tours) {
  std::ostringstream out;
  for (const TourRecord& tour : tours) {
    nlohmann::json j;
    j["format"] = kTourFileFormat;
    j["scene_id"] = tour.scene_id;
    j["episode_ids"] = tour.episode_ids;
    j["stitched_instruction"] = tour.stitched_instruction;
    j["subtask_count"] = tour.subtask_count;
    out << j.dump() << '\n';
  }
  return out.str();
}

inline std::vector<TourRecord> tours_from_jsonl(const std::string& text) {
  std::vector<TourRecord> tours;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "tour file line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("format") || !j["format"].is_string())
      throw ParseError(where + ": missing format tag");
    if (j["format"] != kTourFileFormat)
      throw ParseError(where + ": unsupported format \"" +
                       j["format"].get<std::string>() + "\"");
    try {
      TourRecord tour;
      tour.scene_id = j.at("scene_id").get<std::string>();
      tour.episode_ids = j.at("episode_ids").get<std::vector<std::string>>();
      tour.stitched_instruction = j.at("stitched_instruction").get<std::string>();
      tour.subtask_count = j.at("subtask_count").get<int>();
      tours.push_back(std::move(tour));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return tours;
}

inline void write_tours(const std::string& path,
                        const std::vector<TourRecord>& tours) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open tour file for writing: " + path);
  out << tours_to_jsonl(tours);
  if (!out) throw ConfigError("failed writing tour file: " + path);
}

inline std::vector<TourRecord> read_tours(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open tour file for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return tours_from_jsonl(buf.str());
}

// ---------------------------------------------------------------------------
// Episode record files: one JSON object per line, the stitcher's input.
// ---------------------------------------------------------------------------

inline constexpr const char* kRecordsFileFormat = "seqnav-records/1";

inline std::string episode_records_to_jsonl(const std::vector<EpisodeRecord>& records) {
  std::ostringstream out;
  for (const EpisodeRecord& rec : records) {
    validate_episode_record(rec);
    nlohmann::json path = nlohmann::json::array();
    for (const Vec2& v : rec.reference_path) path.push_back({v.x, v.y});
    nlohmann::json j;
    j["format"] = kRecordsFileFormat;
    j["id"] = rec.id;
    j["scene_id"] = rec.scene_id;
    j["reference_path"] = path;
    j["instruction"] = rec.instruction;
    j["phrases"] = rec.phrases;
    out << j.dump() << '\n';
  }
  return out.str();
}

inline std::vector<EpisodeRecord> episode_records_from_jsonl(const std::string& text) {
  std::vector<EpisodeRecord> records;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "records file line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("format") || !j["format"].is_string())
      throw ParseError(where + ": missing format tag");
    if (j["format"] != kRecordsFileFormat)
      throw ParseError(where + ": unsupported format \"" +
                       j["format"].get<std::string>() + "\"");
    try {
      EpisodeRecord rec;
      rec.id = j.at("id").get<std::string>();
      rec.scene_id = j.at("scene_id").get<std::string>();
      for (const nlohmann::json& v : j.at("reference_path")) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
          throw ParseError(where + ": reference_path must hold [x, y] pairs");
        rec.reference_path.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      rec.instruction = j.at("instruction").get<std::string>();
      rec.phrases = j.at("phrases").get<std::vector<std::string>>();
      if (rec.reference_path.empty())
        throw ParseError(where + ": reference_path must be non-empty");
      rec.start = rec.reference_path.front();
      rec.end = rec.reference_path.back();
      try {
        validate_episode_record(rec);
      } catch (const ContractViolation& e) {
        throw ParseError(where + ": " + e.what());
      }
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return records;
}

inline void write_episode_records(const std::string& path,
                                  const std::vector<EpisodeRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open records file for writing: " + path);
  out << episode_records_to_jsonl(records);
  if (!out) throw ConfigError("failed writing records file: " + path);
}

inline std::vector<EpisodeRecord> read_episode_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open records file for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return episode_records_from_jsonl(buf.str());
}

}  // namespace seqnav
