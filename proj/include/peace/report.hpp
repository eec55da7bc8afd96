// Copyright 2026 The peace-engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Likert ratings, per-cell aggregation and table rendering for evaluation
// reports. Cells are task x implicitness class x mode.

#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/corpus.hpp"
#include "peace/metrics.hpp"
#include "peace/stats.hpp"

namespace peace {

using json = nlohmann::json;

inline constexpr std::array<std::string_view, 5> kLikertDims = {"F", "SO", "I", "SP", "P"};

struct LikertRating {
  std::string sample_id;
  std::string annotator_id;
  std::array<int, 5> scores{};  // F, SO, I, SP, P

  void validate() const {
    require(!sample_id.empty() && !annotator_id.empty(), "rating needs sample_id and annotator_id");
    for (std::size_t d = 0; d < 5; ++d) {
      require(scores[d] >= 1 && scores[d] <= 5,
              "rating " + sample_id + "/" + annotator_id + ": " + std::string(kLikertDims[d]) + " outside [1,5]");
    }
  }
};

inline void to_json(json& j, const LikertRating& r) {
  j = json{{"sample_id", r.sample_id}, {"annotator_id", r.annotator_id}};
  for (std::size_t d = 0; d < 5; ++d) j[std::string(kLikertDims[d])] = r.scores[d];
}

inline void from_json(const json& j, LikertRating& r) {
  r.sample_id = j.at("sample_id").get<std::string>();
  r.annotator_id = j.at("annotator_id").get<std::string>();
  for (std::size_t d = 0; d < 5; ++d) r.scores[d] = j.at(std::string(kLikertDims[d])).get<int>();
  r.validate();
}

inline std::vector<LikertRating> load_ratings_csv(std::istream& in, const std::string& name = "<ratings>") {
  const auto table = read_csv(in, name);
  for (std::string_view col : {"sample_id", "annotator_id", "F", "SO", "I", "SP", "P"}) {
    if (std::find(table.columns.begin(), table.columns.end(), col) == table.columns.end()) {
      fail(Errc::schema, name + ": missing column '" + std::string(col) + "'", std::string(col));
    }
  }
  std::vector<LikertRating> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [ln, row] : table.rows) {
    LikertRating r;
    r.sample_id = std::string(text::trim(row.at("sample_id")));
    r.annotator_id = std::string(text::trim(row.at("annotator_id")));
    for (std::size_t d = 0; d < 5; ++d) {
      const auto raw = std::string(text::trim(row.at(std::string(kLikertDims[d]))));
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(raw, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (raw.empty() || used != raw.size()) {
        fail(Errc::parse, name + ":" + std::to_string(ln) + ": " + std::string(kLikertDims[d]) + " is not an integer",
             std::to_string(ln));
      }
      r.scores[d] = v;
    }
    try {
      r.validate();
    } catch (const Error& e) {
      fail(Errc::parse, name + ":" + std::to_string(ln) + ": " + e.what(), std::to_string(ln));
    }
    if (!seen.insert({r.sample_id, r.annotator_id}).second) {
      fail(Errc::parse, name + ":" + std::to_string(ln) + ": duplicate rating for " + r.sample_id + "/" + r.annotator_id,
           std::to_string(ln));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<LikertRating> load_ratings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open ratings file '" + path + "'");
  return load_ratings_csv(in, path);
}

/// Mean of the five dimension means.
inline double likert_overall(const std::array<double, 5>& dim_means) {
  double s = 0.0;
  for (double v : dim_means) s += v;
  return s / 5.0;
}

// ---------------------------------------------------------------------------
// Report model

// Fixed column order: explicit/implicit x RAG/no-RAG.
inline constexpr std::array<std::pair<ImplicitClass, GenMode>, 4> kReportColumns = {{
    {ImplicitClass::explicit_, GenMode::rag},
    {ImplicitClass::explicit_, GenMode::no_rag},
    {ImplicitClass::implicit, GenMode::rag},
    {ImplicitClass::implicit, GenMode::no_rag},
}};

inline std::string column_name(std::size_t c) {
  const auto [cls, mode] = kReportColumns.at(c);
  return std::string(cls == ImplicitClass::explicit_ ? "Exp_" : "Imp_") + std::string(to_string(mode));
}

struct ReportCell {
  std::optional<double> value;
  std::size_t n = 0;  // contributing samples
};

struct ReportRow {
  std::string metric;
  std::array<ReportCell, 4> cells;
  // RAG vs NoRAG, paired by HS message id: [0] explicit, [1] implicit.
  std::array<std::optional<StatResult>, 2> tests;
  std::array<std::optional<std::string>, 2> test_notes;
};

struct ReportSection {
  TaskKind task = TaskKind::explanation;
  std::vector<ReportRow> likert;
  std::vector<ReportRow> automatic;
  std::vector<std::string> empty_cells;  // column names with no samples
};

struct AgreementEntry {
  std::string dimension;
  std::optional<double> alpha;
  std::optional<std::string> note;
};

struct MetricReport {
  std::vector<ReportSection> sections;
  std::vector<AgreementEntry> agreement;  // ordinal alpha per Likert dimension
  std::size_t n_samples = 0;
  std::size_t n_ratings = 0;
};

inline std::string section_title(TaskKind t) {
  return t == TaskKind::explanation ? "Explanations" : "Counter-speech";
}

// Automatic metric keys and their table labels.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 7> kAutoMetrics = {{
    {"sem_sim", "Sem. Sim."},
    {"faithfulness", "Faithfulness"},
    {"perplexity", "Perplexity"},
    {"distinct_3", "Distinct-3"},
    {"hate_ent", "Hate-Ent."},
    {"ev_contr", "Ev.-Contr."},
    {"ev_ent", "Ev.-Ent."},
}};

inline std::string metric_label(std::string_view key) {
  for (const auto& [k, label] : kAutoMetrics)
    if (k == key) return std::string(label);
  return std::string(key);
}

inline void to_json(json& j, const ReportRow& r) {
  j = json{{"metric", r.metric}, {"values", json::array()}, {"n", json::array()}, {"tests", json::object()}};
  for (const auto& c : r.cells) {
    j["values"].push_back(c.value ? json(*c.value) : json(nullptr));
    j["n"].push_back(c.n);
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string cls = k == 0 ? "explicit" : "implicit";
    json t = r.tests[k] ? json(*r.tests[k]) : json(nullptr);
    if (r.test_notes[k]) t = json{{"note", *r.test_notes[k]}};
    j["tests"][cls] = t;
  }
}

inline void to_json(json& j, const MetricReport& r) {
  json cols = json::array();
  for (std::size_t c = 0; c < 4; ++c) cols.push_back(column_name(c));
  j = json{{"columns", cols},
           {"n_samples", r.n_samples},
           {"n_ratings", r.n_ratings},
           {"sections", json::array()},
           {"agreement", json::array()}};
  for (const auto& s : r.sections) {
    j["sections"].push_back({{"task", to_string(s.task)},
                             {"title", section_title(s.task)},
                             {"likert", s.likert},
                             {"automatic", s.automatic},
                             {"empty_cells", s.empty_cells}});
  }
  for (const auto& a : r.agreement) {
    json e = {{"dimension", a.dimension}, {"alpha", a.alpha ? json(*a.alpha) : json(nullptr)}};
    if (a.note) e["note"] = *a.note;
    j["agreement"].push_back(std::move(e));
  }
}

inline void from_json(const json& j, StatResult& r) {
  r.statistic = j.at("statistic").get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.method = j.at("method").get<std::string>() == "exact" ? StatMethod::exact : StatMethod::normal_approx;
  r.n_effective = j.at("n_effective").get<std::size_t>();
  r.w_plus = j.value("w_plus", 0.0);
  r.w_minus = j.value("w_minus", 0.0);
}

inline void from_json(const json& j, ReportRow& r) {
  r.metric = j.at("metric").get<std::string>();
  const auto& vals = j.at("values");
  const auto& ns = j.at("n");
  require(vals.size() == 4 && ns.size() == 4, "report row needs four cells");
  for (std::size_t c = 0; c < 4; ++c) {
    if (!vals[c].is_null()) r.cells[c].value = vals[c].get<double>();
    r.cells[c].n = ns[c].get<std::size_t>();
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& t = j.at("tests").at(k == 0 ? "explicit" : "implicit");
    if (t.is_null()) continue;
    if (t.contains("note")) r.test_notes[k] = t["note"].get<std::string>();
    else r.tests[k] = t.get<StatResult>();
  }
}

/// Reads back a report written by to_json (used by `eval report`).
inline MetricReport report_from_json(const json& j) {
  MetricReport r;
  try {
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.n_ratings = j.at("n_ratings").get<std::size_t>();
    for (const auto& s : j.at("sections")) {
      ReportSection sec;
      sec.task = parse_task_kind(s.at("task").get<std::string>());
      sec.likert = s.at("likert").get<std::vector<ReportRow>>();
      sec.automatic = s.at("automatic").get<std::vector<ReportRow>>();
      sec.empty_cells = s.value("empty_cells", std::vector<std::string>{});
      r.sections.push_back(std::move(sec));
    }
    for (const auto& a : j.value("agreement", json::array())) {
      AgreementEntry e;
      e.dimension = a.at("dimension").get<std::string>();
      if (!a.at("alpha").is_null()) e.alpha = a["alpha"].get<double>();
      if (a.contains("note")) e.note = a["note"].get<std::string>();
      r.agreement.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(Errc::parse, std::string("malformed report: ") + e.what());
  }
  return r;
}

namespace detail {

inline ReportCell mean_cell(const std::vector<double>& xs) {
  ReportCell c;
  c.n = xs.size();
  if (!xs.empty()) {
    double s = 0.0;
    for (double x : xs) s += x;
    c.value = s / static_cast<double>(xs.size());
  }
  return c;
}

// Paired test over HS ids present in both maps.
inline void paired_test(const std::map<std::string, double>& rag, const std::map<std::string, double>& no_rag,
                        std::optional<StatResult>& out, std::optional<std::string>& note) {
  std::vector<double> x, y;
  for (const auto& [id, v] : rag) {
    if (auto it = no_rag.find(id); it != no_rag.end()) {
      x.push_back(v);
      y.push_back(it->second);
    }
  }
  if (x.empty()) {
    if (!rag.empty() || !no_rag.empty()) note = "no paired samples";
    return;
  }
  try {
    out = wilcoxon_signed_rank(x, y);
  } catch (const Error& e) {
    if (e.code() != Errc::all_zero_differences) throw;
    note = std::string(errc_name(e.code()));
  }
}

}  // namespace detail

/// Aggregates ratings (and optionally per-sample metrics) into report
/// cells. Likert cell value = mean over every rating of the cell's
/// samples; Overall = mean of the five dimension means.
inline MetricReport aggregate_report(const std::vector<GenerationSample>& samples,
                                     const std::vector<LikertRating>& ratings,
                                     const std::vector<SampleMetrics>& metrics = {}) {
  std::map<std::string, const GenerationSample*> by_id;
  for (const auto& s : samples) {
    s.validate();
    require(by_id.emplace(s.sample_id, &s).second, "duplicate sample_id '" + s.sample_id + "'");
  }
  std::map<std::string, std::vector<const LikertRating*>> ratings_of;
  std::map<std::string, std::map<std::string, const LikertRating*>> matrix;  // sample -> annotator
  std::set<std::string> annotators;
  for (const auto& r : ratings) {
    r.validate();
    require(by_id.count(r.sample_id), "rating references unknown sample '" + r.sample_id + "'");
    require(matrix[r.sample_id].emplace(r.annotator_id, &r).second,
            "duplicate rating for " + r.sample_id + "/" + r.annotator_id);
    ratings_of[r.sample_id].push_back(&r);
    annotators.insert(r.annotator_id);
  }
  std::map<std::string, const SampleMetrics*> metrics_of;
  for (const auto& m : metrics) {
    require(by_id.count(m.sample_id), "metrics reference unknown sample '" + m.sample_id + "'");
    require(metrics_of.emplace(m.sample_id, &m).second, "duplicate metrics for '" + m.sample_id + "'");
  }

  MetricReport report;
  report.n_samples = samples.size();
  report.n_ratings = ratings.size();

  for (auto task : {TaskKind::explanation, TaskKind::counter_speech}) {
    std::array<std::vector<const GenerationSample*>, 4> cells;
    bool any = false;
    for (const auto& s : samples) {
      if (s.task != task) continue;
      any = true;
      for (std::size_t c = 0; c < 4; ++c) {
        if (kReportColumns[c].first == s.implicitness_class && kReportColumns[c].second == s.mode) cells[c].push_back(&s);
      }
    }
    if (!any) continue;
    ReportSection sec;
    sec.task = task;
    for (std::size_t c = 0; c < 4; ++c)
      if (cells[c].empty()) sec.empty_cells.push_back(column_name(c));

    // Per-sample value for a row; nullopt when the sample has no data.
    using Extract = std::function<std::optional<double>(const GenerationSample&)>;
    auto build_row = [&](const std::string& name, const Extract& per_sample, bool pooled_ratings,
                         std::optional<std::size_t> dim) {
      ReportRow row;
      row.metric = name;
      std::array<std::map<std::string, double>, 4> by_hs;
      for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> xs;
        for (const auto* s : cells[c]) {
          if (auto v = per_sample(*s)) by_hs[c][s->hs_message.id] = *v;
          if (pooled_ratings && dim) {
            if (auto it = ratings_of.find(s->sample_id); it != ratings_of.end())
              for (const auto* r : it->second) xs.push_back(r->scores[*dim]);
          } else if (auto v = per_sample(*s)) {
            xs.push_back(*v);
          }
        }
        row.cells[c] = detail::mean_cell(xs);
        if (pooled_ratings) row.cells[c].n = by_hs[c].size();
      }
      detail::paired_test(by_hs[0], by_hs[1], row.tests[0], row.test_notes[0]);
      detail::paired_test(by_hs[2], by_hs[3], row.tests[1], row.test_notes[1]);
      return row;
    };

    if (!ratings.empty()) {
      auto sample_dim_mean = [&](const GenerationSample& s, std::size_t d) -> std::optional<double> {
        auto it = ratings_of.find(s.sample_id);
        if (it == ratings_of.end()) return std::nullopt;
        double sum = 0.0;
        for (const auto* r : it->second) sum += r->scores[d];
        return sum / static_cast<double>(it->second.size());
      };
      for (std::size_t d = 0; d < 5; ++d) {
        sec.likert.push_back(build_row(std::string(kLikertDims[d]),
                                       [&, d](const GenerationSample& s) { return sample_dim_mean(s, d); }, true, d));
      }
      ReportRow overall = build_row(
          "Overall",
          [&](const GenerationSample& s) -> std::optional<double> {
            std::array<double, 5> m{};
            for (std::size_t d = 0; d < 5; ++d) {
              auto v = sample_dim_mean(s, d);
              if (!v) return std::nullopt;
              m[d] = *v;
            }
            return likert_overall(m);
          },
          false, std::nullopt);
      for (std::size_t c = 0; c < 4; ++c) {
        std::array<double, 5> means{};
        bool ok = true;
        for (std::size_t d = 0; d < 5; ++d) {
          if (!sec.likert[d].cells[c].value) ok = false;
          else means[d] = *sec.likert[d].cells[c].value;
        }
        overall.cells[c].value = ok ? std::optional(likert_overall(means)) : std::nullopt;
      }
      sec.likert.push_back(std::move(overall));
    }

    if (!metrics.empty()) {
      for (const auto& [key, label] : kAutoMetrics) {
        if (key == "distinct_3") {
          ReportRow row;
          row.metric = std::string(key);
          for (std::size_t c = 0; c < 4; ++c) {
            std::vector<std::string> texts;
            for (const auto* s : cells[c]) texts.push_back(s->output_text);
            row.cells[c].n = texts.size();
            try {
              row.cells[c].value = distinct_n(texts, 3);
            } catch (const Error& e) {
              if (e.code() != Errc::no_ngrams) throw;
            }
          }
          sec.automatic.push_back(std::move(row));
          continue;
        }
        auto field = [&, k = key](const GenerationSample& s) -> std::optional<double> {
          auto it = metrics_of.find(s.sample_id);
          if (it == metrics_of.end()) return std::nullopt;
          const auto& m = *it->second;
          if (k == "sem_sim") return m.sem_sim;
          if (k == "faithfulness") return m.faithfulness;
          if (k == "perplexity") return m.perplexity;
          if (k == "hate_ent") return m.hate_ent;
          if (k == "ev_contr") return m.ev_contr;
          return m.ev_ent;
        };
        sec.automatic.push_back(build_row(std::string(key), field, false, std::nullopt));
      }
    }
    report.sections.push_back(std::move(sec));
  }

  if (!ratings.empty()) {
    for (std::size_t d = 0; d < 5; ++d) {
      std::vector<std::vector<std::optional<double>>> units;
      for (const auto& [sid, row] : matrix) {
        std::vector<std::optional<double>> u;
        for (const auto& a : annotators) {
          auto it = row.find(a);
          u.push_back(it == row.end() ? std::nullopt : std::optional<double>(it->second->scores[d]));
        }
        units.push_back(std::move(u));
      }
      AgreementEntry e;
      e.dimension = std::string(kLikertDims[d]);
      try {
        e.alpha = krippendorff_alpha(units, AlphaLevel::ordinal);
      } catch (const Error& err) {
        if (err.code() != Errc::no_variance && err.code() != Errc::insufficient_data) throw;
        e.note = std::string(errc_name(err.code()));
      }
      report.agreement.push_back(std::move(e));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Text rendering

namespace detail {

inline std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

inline void render_rows(std::ostringstream& out, const std::string& title, const std::vector<ReportRow>& rows,
                        bool labels_from_keys, bool& any_marker) {
  constexpr std::size_t kFirst = 14, kCol = 11;
  out << pad_right(title, kFirst);
  for (std::size_t c = 0; c < 4; ++c) out << pad_left(column_name(c), kCol);
  out << "\n";
  for (const auto& r : rows) {
    out << pad_right(labels_from_keys ? metric_label(r.metric) : r.metric, kFirst);
    for (std::size_t c = 0; c < 4; ++c) {
      std::string v = r.cells[c].value ? text::fixed(*r.cells[c].value, 2) : "-";
      const auto& t = r.tests[c / 2];
      if (c % 2 == 0 && r.cells[c].value && t && t->p_value < 0.05) {
        v += "*";
        any_marker = true;
      }
      out << pad_left(v, kCol);
    }
    out << "\n";
  }
}

}  // namespace detail

/// Aligned text: the Likert table followed by the automatic metrics when
/// present.
inline std::string render_text(const MetricReport& r) {
  std::ostringstream out;
  bool marker = false;
  bool first = true;
  for (const auto& s : r.sections) {
    if (s.likert.empty()) continue;
    if (!first) out << "\n";
    first = false;
    detail::render_rows(out, section_title(s.task), s.likert, false, marker);
  }
  for (const auto& s : r.sections) {
    if (s.automatic.empty()) continue;
    if (!first) out << "\n";
    first = false;
    detail::render_rows(out, section_title(s.task), s.automatic, true, marker);
  }
  for (const auto& s : r.sections) {
    if (!s.empty_cells.empty()) {
      out << "\nempty cells (" << section_title(s.task) << "): " << text::join(s.empty_cells, ", ") << "\n";
    }
  }
  if (!r.agreement.empty()) {
    out << "\nKrippendorff alpha (ordinal):";
    for (const auto& a : r.agreement) out << " " << a.dimension << "=" << (a.alpha ? text::fixed(*a.alpha, 2) : "n/a");
    out << "\n";
  }
  if (marker) out << "\n* Wilcoxon signed-rank p < 0.05, RAG vs NoRAG paired by HS message\n";
  return out.str();
}

}  // namespace peace
