// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "coreagent/runtime.hpp"

namespace coreagent::runlog {

inline constexpr int kSchemaVersion = 1;

/// Run directory layout:
///   run.json
///   tasks/<task_id>/trace.json        outcome, history, visited screens
///   tasks/<task_id>/steps.jsonl       one StepRecord per line
///   tasks/<task_id>/transcript.jsonl  one model exchange per line
///   tasks/<task_id>/screens/<source_hash>.xml
/// Every JSON object is written with sorted keys and no absolute paths, so two
/// identical runs produce byte-identical directories.
struct RunManifest {
  int schema_version = kSchemaVersion;
  std::string mode;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> task_ids;
};

struct RunData {
  RunManifest manifest;
  std::vector<runtime::Trace> traces;  // ordered as manifest.task_ids
};

nlohmann::json config_to_json(const runtime::RunConfig& cfg);
runtime::RunConfig config_from_json(const nlohmann::json& j);

nlohmann::json step_to_json(const runtime::StepRecord& step);
runtime::StepRecord step_from_json(const nlohmann::json& j);

nlohmann::json exchange_to_json(const runtime::TranscriptEntry& entry);
runtime::TranscriptEntry exchange_from_json(const nlohmann::json& j);

void write_run_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);
RunManifest read_run_manifest(const std::filesystem::path& run_dir);

/// Writes tasks/<task_id>/ under run_dir, replacing any previous contents.
void write_trace(const std::filesystem::path& run_dir, const runtime::Trace& trace);
runtime::Trace read_trace(const std::filesystem::path& task_dir);

/// Throws SchemaMismatch on missing files, bad JSON or a version mismatch.
RunData read_run(const std::filesystem::path& run_dir);

}  // namespace coreagent::runlog
