// ham — grammar-guided program search with incremental memory.
//
//   ham run --seq FILE --grammar FILE [--no-update] [--workers N]
//           [--initial-limit CYCLES] [--quantum CYCLES] [--max-phases K]
//           [--ham FILE] [--report table|csv] [--out FILE]
//
// Exit codes: 0 every problem solved, 2 a problem exhausted its phase
// budget, 1 usage or file error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "ham/harness.hpp"
#include "ham/search.hpp"

namespace {

int runCommand(const std::string& seqFile, const std::string& grammarFile,
               const ham::harness::RunConfig& cfg, const std::string& reportFormat,
               const std::string& outFile) {
  const auto onEvent = [](const ham::search::PhaseEvent& ev) {
    std::fprintf(stderr, "%s\n", ham::search::format_event(ev).c_str());
  };
  const auto onRow = [](const ham::harness::RunReportRow& row) {
    if (row.problemId == "all") return;
    std::fprintf(stderr, "solved %s p=%g t=%llu trials=%llu\n", row.problemId.c_str(),
                 row.p_i, static_cast<unsigned long long>(row.t_i),
                 static_cast<unsigned long long>(row.trials));
  };

  const ham::harness::RunOutcome outcome =
      ham::harness::run_sequence(seqFile, grammarFile, cfg, onRow, onEvent);

  const std::string report = ham::harness::emit_report(
      outcome.rows, reportFormat == "csv" ? ham::harness::ReportFormat::Csv
                                          : ham::harness::ReportFormat::Table);
  if (outFile.empty()) {
    std::fputs(report.c_str(), stdout);
  } else {
    std::ofstream out(outFile, std::ios::binary | std::ios::trunc);
    if (!out) throw ham::Error("cannot write report file: " + outFile);
    out << report;
  }

  if (outcome.exhausted) {
    std::fprintf(stderr, "exhausted: %s gave no solution within the phase budget\n",
                 outcome.exhaustedId.c_str());
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grammar-guided program search with incremental memory"};
  app.require_subcommand(1);

  std::string seqFile;
  std::string grammarFile;
  std::string hamFile;
  std::string reportFormat = "table";
  std::string outFile;
  bool noUpdate = false;
  ham::harness::RunConfig cfg;

  CLI::App* run = app.add_subcommand("run", "solve a training sequence in order");
  run->add_option("--seq", seqFile, "training sequence file")->required();
  run->add_option("--grammar", grammarFile, "grammar file")->required();
  run->add_flag("--no-update", noUpdate,
                "reuse the initial grammar for every problem (no memory)");
  run->add_option("--workers", cfg.search.workers, "parallel search workers");
  run->add_option("--initial-limit", cfg.search.initialLimit, "phase-0 cycle budget T_0");
  run->add_option("--quantum", cfg.search.quantum, "per-candidate cycle quantum t_q");
  run->add_option("--max-phases", cfg.search.maxPhases, "phase doublings before giving up");
  run->add_option("--ham", hamFile, "memory state file: loaded if present, saved per solve");
  run->add_option("--report", reportFormat, "report format")
      ->check(CLI::IsMember({"table", "csv"}));
  run->add_option("--out", outFile, "write the report to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 prints the message/help itself; fold every usage failure to 1.
    return app.exit(e) == 0 ? 0 : 1;
  }

  cfg.updates = !noUpdate;
  cfg.hamFile = hamFile;
  try {
    return runCommand(seqFile, grammarFile, cfg, reportFormat, outFile);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
