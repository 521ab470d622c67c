#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bsde/models.hpp"
#include "bsde/oracle.hpp"
#include "bsde/schemes.hpp"

namespace bsde {

inline constexpr const char* kLibraryVersion = "bsde-0.1.0";

// Flat typed key-value configuration with dotted section names. Unknown keys
// are rejected at parse time with the offending line number.
class ExperimentConfig {
 public:
  static ExperimentConfig parse_file(const std::string& path);
  static ExperimentConfig parse_text(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  // Hash of the canonicalized (sorted) key-value text; stamps every output.
  std::uint64_t hash() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;
};

// Catalog resolution from a config.
SdeModel build_model(const ExperimentConfig& cfg);
TerminalCondition build_terminal(const ExperimentConfig& cfg);
Driver build_driver(const ExperimentConfig& cfg, const SdeModel& model,
                    const TerminalCondition& terminal, double T);
Backend build_backend(const ExperimentConfig& cfg);
ReferenceSolution build_reference(const ExperimentConfig& cfg, const SdeModel& model,
                                  const TerminalCondition& terminal, const Driver& driver);

// Subcommand entry points; each returns a process exit status and writes its
// reports under out_dir.
int cmd_verify_grid(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_solve(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_convergence(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_probe_representation(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_smoothness(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_report(const std::string& out_dir);

}  // namespace bsde
