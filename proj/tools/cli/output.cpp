#include <algorithm>
#include <charconv>
#include <cstdio>
#include <ostream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "heurevo/error.hpp"

namespace heurevo::cli {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_aligned(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()));
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      line += r[c];
      if (c + 1 < r.size()) line += std::string(width[c] - r[c].size() + 2, ' ');
    }
    out << line << '\n';
  }
}

std::string seed_text(const EvalRecord& r) {
  return r.seed ? std::to_string(*r.seed) : std::string("mean");
}

nlohmann::json record_json(const EvalRecord& r) {
  nlohmann::json h = nlohmann::json::object();
  for (const auto& [k, n] : r.histogram) h[std::to_string(k)] = n;
  return {{"heuristic", r.heuristic},
          {"dataset", r.dataset},
          {"seed", r.seed ? nlohmann::json(*r.seed) : nlohmann::json("mean")},
          {"min_ade", r.min_ade},
          {"min_fde", r.min_fde},
          {"objective_j", r.objective_j},
          {"scenes", r.scenes},
          {"seeds", r.seeds},
          {"histogram", std::move(h)}};
}

}  // namespace

OutputFormat parse_format(std::string_view text) {
  if (text == "table") return OutputFormat::kTable;
  if (text == "csv") return OutputFormat::kCsv;
  if (text == "records") return OutputFormat::kRecords;
  throw ValidationError("unknown format '" + std::string(text) + "' (expected table, csv or records)");
}

std::vector<std::uint64_t> SeedRange::seeds() const {
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = first;; ++s) {
    out.push_back(s);
    if (s == last) break;
  }
  return out;
}

SeedRange parse_seed_range(std::string_view text) {
  auto number = [&](std::string_view part) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || r.ec != std::errc() || r.ptr != part.data() + part.size()) {
      throw ValidationError("bad seed '" + std::string(text) + "' (expected N or A..B)");
    }
    return v;
  };
  SeedRange range;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    range.first = number(text.substr(0, dots));
    range.last = number(text.substr(dots + 2));
    range.is_range = true;
    if (range.last < range.first) throw ValidationError("empty seed range '" + std::string(text) + "'");
  } else {
    range.first = range.last = number(text);
  }
  return range;
}

void write_eval(std::ostream& out, std::span<const EvalRecord> records, OutputFormat format) {
  switch (format) {
    case OutputFormat::kTable: {
      std::vector<std::vector<std::string>> rows{{"heuristic", "dataset", "seed", "minADE", "minFDE", "J", "scenes"}};
      for (const auto& r : records) {
        rows.push_back({r.heuristic, r.dataset, seed_text(r), fixed(r.min_ade, 4), fixed(r.min_fde, 4),
                        fixed(r.objective_j, 4), std::to_string(r.scenes)});
      }
      write_aligned(out, rows);
      break;
    }
    case OutputFormat::kCsv:
      out << "heuristic,dataset,seed,min_ade,min_fde,objective_j,scenes,seeds\n";
      for (const auto& r : records) {
        out << r.heuristic << ',' << r.dataset << ',' << seed_text(r) << ',' << fixed(r.min_ade, 6)
            << ',' << fixed(r.min_fde, 6) << ',' << fixed(r.objective_j, 6) << ',' << r.scenes << ','
            << r.seeds << '\n';
      }
      break;
    case OutputFormat::kRecords:
      for (const auto& r : records) out << record_json(r).dump() << '\n';
      break;
  }
}

void write_bench(std::ostream& out, const BenchTable& t, OutputFormat format) {
  auto cell = [&](const std::string& row, const std::string& col) -> const EvalRecord* {
    auto it = t.cells.find({row, col});
    return it == t.cells.end() ? nullptr : &it->second;
  };
  switch (format) {
    case OutputFormat::kTable: {
      out << t.name << " (minADE/minFDE, " << t.unit << ")\n";
      std::vector<std::vector<std::string>> rows;
      std::vector<std::string> header{"heuristic"};
      header.insert(header.end(), t.columns.begin(), t.columns.end());
      rows.push_back(header);
      for (const auto& r : t.rows) {
        std::vector<std::string> line{r};
        for (const auto& c : t.columns) {
          const EvalRecord* e = cell(r, c);
          line.push_back(e ? fixed(e->min_ade, 2) + "/" + fixed(e->min_fde, 2) : "unavailable");
        }
        rows.push_back(std::move(line));
      }
      write_aligned(out, rows);
      break;
    }
    case OutputFormat::kCsv:
      out << "table,heuristic,column,min_ade,min_fde,objective_j,seeds\n";
      for (const auto& r : t.rows) {
        for (const auto& c : t.columns) {
          out << t.name << ',' << r << ',' << c << ',';
          if (const EvalRecord* e = cell(r, c)) {
            out << fixed(e->min_ade, 6) << ',' << fixed(e->min_fde, 6) << ',' << fixed(e->objective_j, 6)
                << ',' << e->seeds << '\n';
          } else {
            out << ",,,0\n";
          }
        }
      }
      break;
    case OutputFormat::kRecords:
      for (const auto& r : t.rows) {
        for (const auto& c : t.columns) {
          nlohmann::json j = {{"table", t.name}, {"heuristic", r}, {"column", c}, {"unit", t.unit}};
          if (const EvalRecord* e = cell(r, c)) {
            j["min_ade"] = e->min_ade;
            j["min_fde"] = e->min_fde;
            j["objective_j"] = e->objective_j;
            j["seeds"] = e->seeds;
            j["dataset"] = e->dataset;
          } else {
            j["available"] = false;
          }
          out << j.dump() << '\n';
        }
      }
      break;
  }
}

}  // namespace heurevo::cli
