#pragma once

#include "cegcl/config.hpp"
#include "cegcl/eval.hpp"
#include "cegcl/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cegcl {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_runtime = 2 };

/// Entry point; `args` excludes the program name.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, const char* const* argv);

/// node_id \t community, with a header line.
void write_assignments(const std::filesystem::path& path, const std::vector<std::string>& node_ids,
                       const Labels& labels);
/// Reads an assignments file and orders it by `node_ids`; every node must appear once.
Labels read_assignments(const std::filesystem::path& path, const std::vector<std::string>& node_ids);

/// node_id followed by the row values, tab separated.
void write_embeddings(const std::filesystem::path& path, const std::vector<std::string>& node_ids, const Matrix& h);

/// Flat metrics object; label-based metrics are null without a report.
nlohmann::json metrics_json(const std::optional<MetricsReport>& report, double modularity, std::uint64_t seed,
                            int epochs, double wall_seconds);

/// 64-bit FNV-1a over a config and every regular file under the data path,
/// visited in sorted order; hex encoded.
std::string input_hash(const nlohmann::json& config, const std::filesystem::path& data);

/// Creates `<root>/<command>-<timestamp>-<hash prefix>`, adding a counter if taken.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& command,
                                   const std::string& hash);

}  // namespace cegcl
