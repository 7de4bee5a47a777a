#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "siftkit/session.hpp"
#include "siftkit/target.hpp"

namespace siftkit {

using Json = nlohmann::ordered_json;

// camelCase fields addGood ... downDocs; missing fields are empty, unknown
// fields and wrong types raise parse errors.
Json batch_to_json(const FeedbackBatch& batch);
FeedbackBatch batch_from_json(const Json& j);

// A feedback script is a JSON array of batches.
std::vector<FeedbackBatch> read_feedback_script(const std::filesystem::path& path);

Json config_to_json(const SessionConfig& config);
// Overlays the fields present in `j` onto `base`.
SessionConfig config_from_json(const Json& j, SessionConfig base = {});
SessionConfig read_config_file(const std::filesystem::path& path, SessionConfig base = {});

Json targets_to_json(const TargetSnapshot& targets);

// iteration, targets, topics (index, keywords, relevance, size) and the
// retrieved documents (id, topic, relevance, closeness).
Json export_results(const SessionState& state);
// Document ids listed in an export, in order.
std::vector<std::string> exported_ids(const Json& exported);

Json events_to_json(const std::vector<SessionEvent>& events);
std::vector<SessionEvent> events_from_json(const Json& j);

// Config plus the event log; loading replays the events from iteration 0.
void save_snapshot(const std::filesystem::path& path, const SessionState& state);
SessionState load_snapshot(const std::filesystem::path& path);

Json parse_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace siftkit
