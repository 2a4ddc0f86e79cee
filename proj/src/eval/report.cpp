// Copyright 2026 The xlkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "xlkd/eval/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "xlkd/common/error.hpp"

namespace xlkd::eval {
namespace {

const std::array<const char*, 4> kGroupNames = {"source", "reference", "baseline", "ours"};

const std::vector<std::string> kLabelRank = {
    "Off-the-shelf source",   "Gold-supervised target",  "Translate-test",          "Translate-train-pseudo",
    "2-step KD",              "+ Balanced distillation", "+ Data augmentation",     "+ Balanced + augmentation"};

std::size_t rank_of(const std::string& label) {
  auto it = std::find(kLabelRank.begin(), kLabelRank.end(), label);
  return static_cast<std::size_t>(it - kLabelRank.begin());
}

std::size_t arch_rank(const std::string& arch) {
  for (std::size_t i = 0; i < kArchOrder.size(); ++i)
    if (arch == kArchOrder[i]) return i;
  return kArchOrder.size();
}

RowGroup parse_group(const std::string& s) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i)
    if (s == kGroupNames[i]) return static_cast<RowGroup>(i);
  throw SchemaError("report row: unknown group '" + s + "'");
}

nlohmann::ordered_json metrics_json(const MetricsRow& m) {
  nlohmann::ordered_json j;
  j["model"] = m.model;
  j["task"] = m.task;
  j["scores"] = nlohmann::ordered_json::object();
  for (const auto& [lang, v] : m.scores) j["scores"][lang] = v;
  if (!m.scores.empty()) j["average"] = m.average();
  if (m.source_score) j["source_score"] = *m.source_score;
  return j;
}

MetricsRow metrics_from_json(const nlohmann::json& j) {
  MetricsRow m;
  m.model = j.at("model").get<std::string>();
  m.task = j.at("task").get<std::string>();
  m.scores = j.at("scores").get<std::map<std::string, double>>();
  if (j.contains("source_score")) m.source_score = j.at("source_score").get<double>();
  return m;
}

std::string pct(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v * 100.0);
  return buf;
}

std::string signed_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f", v * 100.0);
  return buf;
}

std::string arch_cell(const ReportRow& r) {
  if (r.source_arch.empty() && r.target_arch.empty()) return "-";
  if (r.target_arch.empty() || r.source_arch == r.target_arch) return r.source_arch.empty() ? r.target_arch : r.source_arch;
  if (r.source_arch.empty()) return r.target_arch;
  return r.source_arch + " -> " + r.target_arch;
}

// Markdown table with every column padded to its widest cell.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& body) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = std::max<std::size_t>(3, header[c].size());
  for (const auto& row : body)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    out << "|";
    for (std::size_t c = 0; c < cells.size(); ++c) {
      // First column left-aligned, numbers right-aligned.
      const std::string pad(width[c] - cells[c].size(), ' ');
      out << ' ' << (c == 0 ? cells[c] + pad : pad + cells[c]) << " |";
    }
    out << '\n';
  };
  line(header);
  out << "|";
  for (std::size_t c = 0; c < header.size(); ++c)
    out << ' ' << (c == 0 ? std::string(width[c], '-') : std::string(width[c] - 1, '-') + ":") << " |";
  out << '\n';
  for (const auto& row : body) line(row);
  return out.str();
}

}  // namespace

std::string ReportRow::key() const {
  std::string k = metrics.task + "|" + label + "|" + source_arch + "|" + target_arch;
  if (pivot_size >= 0) k += "|pivot" + std::to_string(pivot_size);
  return k;
}

nlohmann::ordered_json ReportRow::to_json() const {
  nlohmann::ordered_json j;
  j["group"] = kGroupNames[static_cast<std::size_t>(group)];
  j["label"] = label;
  j["source_arch"] = source_arch;
  j["target_arch"] = target_arch;
  j["pivot_size"] = pivot_size;
  j["metrics"] = metrics_json(metrics);
  if (stage1) {
    j["stage1"] = metrics_json(*stage1);
    Delta d = dissipation_delta(*stage1, metrics);
    j["delta"] = {{"per_language", d.per_language}, {"average", d.average}};
  }
  return j;
}

ReportRow ReportRow::from_json(const nlohmann::json& j) {
  ReportRow r;
  try {
    r.group = parse_group(j.at("group").get<std::string>());
    r.label = j.at("label").get<std::string>();
    r.source_arch = j.value("source_arch", "");
    r.target_arch = j.value("target_arch", "");
    r.pivot_size = j.value("pivot_size", -1);
    r.metrics = metrics_from_json(j.at("metrics"));
    if (j.contains("stage1")) r.stage1 = metrics_from_json(j.at("stage1"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("report row: ") + e.what());
  }
  return r;
}

bool TransferGrid::empty() const { return populated() == 0; }

std::size_t TransferGrid::populated() const {
  std::size_t n = 0;
  for (const auto& row : score)
    for (const auto& cell : row) n += cell.has_value();
  return n;
}

std::string TransferGrid::to_csv() const {
  std::ostringstream out;
  auto cell = [](std::optional<double> v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  for (const auto* name : {"score", "drop"}) {
    const auto& m = std::string(name) == "score" ? score : drop;
    for (std::size_t s = 0; s < 3; ++s) {
      out << task << ',' << pivot_size << ',' << name << ',' << kArchOrder[s];
      for (std::size_t t = 0; t < 3; ++t) out << ',' << cell(m[s][t]);
      out << '\n';
    }
  }
  return out.str();
}

TransferGrid build_grid(const std::vector<ReportRow>& rows, const std::string& task, int pivot_size) {
  TransferGrid g;
  g.task = task;
  g.pivot_size = pivot_size;
  std::map<std::string, double> source_score;
  for (const auto& r : rows)
    if (r.group == RowGroup::kSource && r.metrics.task == task && r.metrics.source_score)
      source_score[r.source_arch] = *r.metrics.source_score;
  for (const auto& r : rows) {
    if (r.label != "2-step KD" || r.metrics.task != task || r.pivot_size != pivot_size) continue;
    const std::size_t s = arch_rank(r.source_arch), t = arch_rank(r.target_arch);
    if (s >= 3 || t >= 3) continue;
    g.score[s][t] = r.metrics.average();
    auto src = source_score.find(r.source_arch);
    if (src != source_score.end()) g.drop[s][t] = src->second - r.metrics.average();
  }
  return g;
}

ExperimentReport build_report(std::vector<ReportRow> rows, std::vector<TransferGrid> grids) {
  ExperimentReport rep;
  std::set<std::string> langs;
  for (const auto& r : rows)
    for (const auto& [l, v] : r.metrics.scores) langs.insert(l);
  rep.languages.assign(langs.begin(), langs.end());
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    auto key = [](const ReportRow& r) {
      return std::make_tuple(r.metrics.task, static_cast<int>(r.group), rank_of(r.label), r.label, arch_rank(r.source_arch),
                             arch_rank(r.target_arch), r.pivot_size);
    };
    return key(a) < key(b);
  });
  rep.rows = std::move(rows);
  for (auto& g : grids)
    if (!g.empty()) rep.grids.push_back(std::move(g));
  std::stable_sort(rep.grids.begin(), rep.grids.end(), [](const TransferGrid& a, const TransferGrid& b) {
    return std::tie(a.task, a.pivot_size) < std::tie(b.task, b.pivot_size);
  });
  return rep;
}

nlohmann::ordered_json ExperimentReport::to_json() const {
  nlohmann::ordered_json j;
  j["conventions"] = {{"sentence", "intent accuracy"},
                      {"word", "micro-averaged exact-match span F1; I- tags that do not continue a span are read as B-"},
                      {"average", "mean over target languages"},
                      {"delta", "target model minus pivot after the first step"}};
  j["languages"] = languages;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(r.to_json());
  j["grids"] = nlohmann::ordered_json::array();
  for (const auto& g : grids) {
    nlohmann::ordered_json gj;
    gj["task"] = g.task;
    gj["pivot_size"] = g.pivot_size;
    gj["order"] = kArchOrder;
    for (const auto* name : {"score", "drop"}) {
      const auto& m = std::string(name) == "score" ? g.score : g.drop;
      nlohmann::ordered_json mat = nlohmann::ordered_json::array();
      for (const auto& row : m) {
        nlohmann::ordered_json r = nlohmann::ordered_json::array();
        for (const auto& c : row) r.push_back(c ? nlohmann::ordered_json(*c) : nlohmann::ordered_json());
        mat.push_back(r);
      }
      gj[name] = mat;
    }
    j["grids"].push_back(gj);
  }
  return j;
}

std::string ExperimentReport::markdown() const {
  std::ostringstream out;
  out << "# xlkd report\n\n"
      << "Scores in percent. Sentence task: intent accuracy. Word task: micro-averaged exact-match span F1, "
         "with I- tags that do not continue a span read as B-. Avg is over target languages; the source "
         "column is the source-language test score where one exists.\n";
  std::set<std::string> tasks;
  for (const auto& r : rows) tasks.insert(r.metrics.task);
  for (const std::string& task : {std::string("sentence"), std::string("word")}) {
    if (!tasks.contains(task)) continue;
    out << "\n## " << (task == "sentence" ? "Sentence classification" : "Slot tagging") << "\n\n";
    std::vector<std::string> header = {"Model", "Arch", "Pivot", "Source"};
    header.insert(header.end(), languages.begin(), languages.end());
    header.push_back("Avg");
    std::vector<std::vector<std::string>> body, delta_body;
    for (const auto& r : rows) {
      if (r.metrics.task != task) continue;
      std::vector<std::string> line = {r.label, arch_cell(r), r.pivot_size < 0 ? "-" : std::to_string(r.pivot_size),
                                       pct(r.metrics.source_score)};
      for (const auto& l : languages) {
        auto it = r.metrics.scores.find(l);
        line.push_back(it == r.metrics.scores.end() ? "-" : pct(it->second));
      }
      line.push_back(r.metrics.scores.empty() ? "-" : pct(r.metrics.average()));
      body.push_back(std::move(line));
      if (r.stage1) {
        Delta d = dissipation_delta(*r.stage1, r.metrics);
        std::vector<std::string> dl = {r.label, arch_cell(r), std::to_string(r.pivot_size), pct(r.stage1->average()),
                                       pct(r.metrics.average())};
        for (const auto& l : languages) {
          auto it = d.per_language.find(l);
          dl.push_back(it == d.per_language.end() ? "-" : signed_pct(it->second));
        }
        dl.push_back(signed_pct(d.average));
        delta_body.push_back(std::move(dl));
      }
    }
    out << render_table(header, body);
    if (!delta_body.empty()) {
      out << "\n### Dissipation\n\nStep-1 is the pivot after distillation from the source model; step-2 the target "
             "model. Delta is step-2 minus step-1.\n\n";
      std::vector<std::string> dh = {"Model", "Arch", "Pivot", "Step-1 avg", "Step-2 avg"};
      for (const auto& l : languages) dh.push_back("Delta " + l);
      dh.push_back("Delta avg");
      out << render_table(dh, delta_body);
    }
    for (const auto& g : grids) {
      if (g.task != task) continue;
      for (const auto* name : {"score", "drop"}) {
        const bool is_score = std::string(name) == "score";
        out << "\n### " << (is_score ? "Transfer grid" : "Drop from source") << " (pivot " << g.pivot_size
            << ", rows transfer to columns)\n\n";
        std::vector<std::string> gh = {"Source \\ Target"};
        gh.insert(gh.end(), kArchOrder.begin(), kArchOrder.end());
        std::vector<std::vector<std::string>> gb;
        for (std::size_t s = 0; s < 3; ++s) {
          std::vector<std::string> line = {kArchOrder[s]};
          for (std::size_t t = 0; t < 3; ++t) line.push_back(pct(is_score ? g.score[s][t] : g.drop[s][t]));
          gb.push_back(std::move(line));
        }
        out << render_table(gh, gb);
      }
    }
  }
  return out.str();
}

std::string ExperimentReport::grid_csv() const {
  if (grids.empty()) return {};
  std::string out = "task,pivot_size,matrix,source,transformer,bilstm,cnn\n";
  for (const auto& g : grids) out += g.to_csv();
  return out;
}

}  // namespace xlkd::eval
