#pragma once

// Experiment runner: drive a training sequence problem by problem, either
// with the memory updates applied after every solve (and optionally persisted
// to a state file, so a killed run resumes where it stopped) or with the
// initial grammar reused verbatim for every problem.  Each solve produces one
// report row; a final `all` row carries the total wall time.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ham/search.hpp"

namespace ham::harness {

struct RunReportRow {
  std::string problemId;
  double wallTime = 0.0;  // seconds; informational, never asserted on
  std::uint64_t trials = 0;
  std::uint64_t errors = 0;
  std::uint64_t cycles = 0;
  std::uint64_t maxCycles = 0;
  double p_i = 0.0;
  std::uint64_t t_i = 0;
  double cjs = 0.0;      // t_i / p_i, recomputed from this row's fields
  double entropy = 0.0;  // -log2(p_i)
  bool hasHamBytes = false;  // updates-on rows carry the memory size
  std::uint64_t hamBytes = 0;

  bool operator==(const RunReportRow&) const = default;
};

struct RunConfig {
  bool updates = true;
  search::SearchConfig search;
  // When non-empty and updates are on, the memory state is written here
  // after every solve; an existing file is loaded first and its already
  // solved problems are skipped.
  std::string hamFile;
};

struct RunOutcome {
  std::vector<RunReportRow> rows;  // per remaining problem, then the `all` row
  std::vector<search::SolutionRecord> solutions;  // one per emitted problem row
  bool exhausted = false;          // a problem ran out of phases
  std::string exhaustedId;         // which one (empty otherwise)
  std::optional<search::SearchStats> exhaustedStats;
};

using RowSink = std::function<void(const RunReportRow&)>;

// Solves the sequence in order.  Rows reach `onRow` as they are produced
// (the `all` summary row last); phase events stream to `onEvent`.  On
// exhaustion the outcome keeps the rows of the solved prefix.  File problems
// (missing, malformed) throw.
RunOutcome run_sequence(const std::string& seqFile, const std::string& grammarFile,
                        const RunConfig& config, const RowSink& onRow = {},
                        const search::EventSink& onEvent = {});

enum class ReportFormat { Table, Csv };

// Deterministic rendering of the rows.  CSV uses the RunReportRow field
// names as header, one row per line, doubles in shortest round-trip form;
// the hamBytes column appears only when some row carries it.  The table
// format is the human-readable equivalent.
std::string emit_report(const std::vector<RunReportRow>& rows, ReportFormat format);

// Inverse of emit_report(rows, Csv): parse_report_csv(emit_report(r, Csv))
// reproduces r exactly.  Throws ParseError on malformed text.
std::vector<RunReportRow> parse_report_csv(std::string_view text);

}  // namespace ham::harness
