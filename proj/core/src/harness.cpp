#include "ham/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ham/errors.hpp"
#include "ham/grammar.hpp"
#include "ham/memory.hpp"
#include "ham/problems.hpp"

namespace ham::harness {

namespace {

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open state file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// Write-then-rename so a run killed mid-write never leaves a truncated
// state file behind (the resume contract).
void writeFileReplacing(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write state file: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("cannot write state file: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

RunOutcome run_sequence(const std::string& seqFile, const std::string& grammarFile,
                        const RunConfig& config, const RowSink& onRow,
                        const search::EventSink& onEvent) {
  const problems::TrainingSequence seq = problems::load_sequence_file(seqFile);
  const grammar::Scfg initial = grammar::load_grammar_file(grammarFile);

  RunOutcome out;
  std::optional<memory::HamState> ham;
  std::set<std::string> alreadySolved;
  if (config.updates) {
    if (!config.hamFile.empty() && std::filesystem::exists(config.hamFile)) {
      ham = memory::deserialize(readFile(config.hamFile));
    } else {
      ham = memory::make_state(initial);
    }
    for (const memory::CorpusRecord& rec : ham->corpus) alreadySolved.insert(rec.problemId);
  }

  double totalTime = 0.0;
  for (const problems::ProblemSpec& prob : seq.problems) {
    if (config.updates && alreadySolved.count(prob.id)) continue;  // resumed

    search::SearchConfig scfg = config.search;
    search::SearchResult res;
    if (config.updates) {
      // The start form carries the stored solutions so the define block and
      // call productions are generable; it interns into ham->scfg, which the
      // search then uses as-is.
      scfg.startForm =
          search::problem_start_form(ham->scfg, prob, memory::solution_refs(*ham));
      res = search::levin_search(ham->scfg, prob, scfg, onEvent);
    } else {
      res = search::levin_search(initial, prob, scfg, onEvent);
    }

    if (!res.solution) {
      out.exhausted = true;
      out.exhaustedId = prob.id;
      out.exhaustedStats = res.stats;
      break;
    }

    RunReportRow row;
    row.problemId = prob.id;
    row.wallTime = res.stats.wallTime;
    row.trials = res.stats.trials;
    row.errors = res.stats.schemeErrors;
    row.cycles = res.stats.cyclesSpent;
    row.maxCycles = res.stats.maxCycles;
    row.p_i = res.solution->p_i;
    row.t_i = res.solution->t_i;
    row.cjs = search::cjs(row.p_i, row.t_i);
    row.entropy = search::entropy(row.p_i);

    if (config.updates) {
      memory::CorpusRecord rec = memory::make_record(
          ham->scfg, prob.id, prob.arity, res.solution->programText,
          res.solution->derivationSteps, res.solution->p_i, res.solution->t_i);
      memory::full_update(*ham, std::move(rec));
      row.hasHamBytes = true;
      row.hamBytes = memory::ham_bytes(*ham);
      if (!config.hamFile.empty()) writeFileReplacing(config.hamFile, memory::serialize(*ham));
    }

    totalTime += row.wallTime;
    out.solutions.push_back(std::move(*res.solution));
    if (onRow) onRow(row);
    out.rows.push_back(std::move(row));
  }

  RunReportRow all;
  all.problemId = "all";
  all.wallTime = totalTime;
  if (onRow) onRow(all);
  out.rows.push_back(std::move(all));
  return out;
}

namespace {

constexpr std::string_view kCsvHeader =
    "problemId,wallTime,trials,errors,cycles,maxCycles,p_i,t_i,cjs,entropy";

bool anyHamBytes(const std::vector<RunReportRow>& rows) {
  return std::any_of(rows.begin(), rows.end(),
                     [](const RunReportRow& r) { return r.hasHamBytes; });
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string sig(double v, const char* format) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string emitCsv(const std::vector<RunReportRow>& rows) {
  const bool withHam = anyHamBytes(rows);
  std::string out{kCsvHeader};
  if (withHam) out += ",hamBytes";
  out += '\n';
  for (const RunReportRow& r : rows) {
    out += r.problemId;
    out += ',';
    out += grammar::format_probability(r.wallTime);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += std::to_string(r.errors);
    out += ',';
    out += std::to_string(r.cycles);
    out += ',';
    out += std::to_string(r.maxCycles);
    out += ',';
    out += grammar::format_probability(r.p_i);
    out += ',';
    out += std::to_string(r.t_i);
    out += ',';
    out += grammar::format_probability(r.cjs);
    out += ',';
    out += grammar::format_probability(r.entropy);
    if (withHam) {
      out += ',';
      if (r.hasHamBytes) out += std::to_string(r.hamBytes);
    }
    out += '\n';
  }
  return out;
}

std::string emitTable(const std::vector<RunReportRow>& rows) {
  const bool withHam = anyHamBytes(rows);
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"problem", "time",    "trials", "errors", "cycles",
                                  "max-cyc", "p_i",     "t_i",    "cjs",    "entropy"};
  if (withHam) header.push_back("|HAM|");
  grid.push_back(std::move(header));
  for (const RunReportRow& r : rows) {
    std::vector<std::string> cells{r.problemId, fixed2(r.wallTime)};
    if (r.problemId == "all") {
      // The summary row aggregates wall time only.
      cells.resize(grid[0].size(), "-");
    } else {
      cells.push_back(std::to_string(r.trials));
      cells.push_back(std::to_string(r.errors));
      cells.push_back(std::to_string(r.cycles));
      cells.push_back(std::to_string(r.maxCycles));
      cells.push_back(sig(r.p_i, "%.3g"));
      cells.push_back(std::to_string(r.t_i));
      cells.push_back(sig(r.cjs, "%.4g"));
      cells.push_back(fixed2(r.entropy));
      if (withHam) cells.push_back(r.hasHamBytes ? std::to_string(r.hamBytes) : "-");
    }
    grid.push_back(std::move(cells));
  }

  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& cells : grid) {
    for (std::size_t c = 0; c < cells.size(); ++c) width[c] = std::max(width[c], cells[c].size());
  }
  std::string out;
  for (const auto& cells : grid) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += "  ";
      const std::size_t pad = width[c] - cells[c].size();
      if (c == 0) {  // left-align names, right-align numbers
        out += cells[c];
        out.append(pad, ' ');
      } else {
        out.append(pad, ' ');
        out += cells[c];
      }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

std::vector<std::string_view> splitOn(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = text.find(sep, start);
    if (at == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, at - start));
    start = at + 1;
  }
}

double parseCsvDouble(std::string_view cell) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || end != cell.data() + cell.size()) {
    throw ParseError("report csv: bad number '" + std::string(cell) + "'");
  }
  return v;
}

std::uint64_t parseCsvCount(std::string_view cell) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || end != cell.data() + cell.size()) {
    throw ParseError("report csv: bad count '" + std::string(cell) + "'");
  }
  return v;
}

}  // namespace

std::string emit_report(const std::vector<RunReportRow>& rows, ReportFormat format) {
  return format == ReportFormat::Csv ? emitCsv(rows) : emitTable(rows);
}

std::vector<RunReportRow> parse_report_csv(std::string_view text) {
  std::vector<std::string_view> lines = splitOn(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("report csv: missing header");

  const std::string withHamHeader = std::string(kCsvHeader) + ",hamBytes";
  bool withHam = false;
  if (lines[0] == withHamHeader) {
    withHam = true;
  } else if (lines[0] != kCsvHeader) {
    throw ParseError("report csv: unrecognized header '" + std::string(lines[0]) + "'");
  }
  const std::size_t nCols = withHam ? 11 : 10;

  std::vector<RunReportRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string_view> cells = splitOn(lines[i], ',');
    if (cells.size() != nCols) {
      throw ParseError("report csv: expected " + std::to_string(nCols) + " columns, got " +
                       std::to_string(cells.size()));
    }
    RunReportRow r;
    r.problemId = std::string(cells[0]);
    r.wallTime = parseCsvDouble(cells[1]);
    r.trials = parseCsvCount(cells[2]);
    r.errors = parseCsvCount(cells[3]);
    r.cycles = parseCsvCount(cells[4]);
    r.maxCycles = parseCsvCount(cells[5]);
    r.p_i = parseCsvDouble(cells[6]);
    r.t_i = parseCsvCount(cells[7]);
    r.cjs = parseCsvDouble(cells[8]);
    r.entropy = parseCsvDouble(cells[9]);
    if (withHam && !cells[10].empty()) {
      r.hasHamBytes = true;
      r.hamBytes = parseCsvCount(cells[10]);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ham::harness
