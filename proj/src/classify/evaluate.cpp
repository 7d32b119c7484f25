#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "policyforge/classify.hpp"
#include "policyforge/csv.hpp"
#include "policyforge/fileio.hpp"
#include "policyforge/hash.hpp"

namespace policyforge::classify {

namespace {

std::string row_digest(const LabeledStatement& s) {
  std::string blob = s.text;
  for (const auto& [k, v] : s.gold) blob += '\x1f' + k + '=' + v;
  return sha256_hex(blob);
}

std::optional<double> mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

LabeledDataset parse_labeled_dataset(const std::string& csv_text) {
  const auto table = csv::parse(csv_text);
  if (table.empty()) throw MalformedDataset("dataset is empty");
  const auto& header = table.front();
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto text_col = column("text");
  if (!text_col) throw MalformedDataset("header has no 'text' column");
  std::map<std::string, std::size_t> cols;
  for (const auto& c : schema().categories) {
    auto idx = column(c.key);
    if (!idx) throw MalformedDataset("header has no '" + c.key + "' column");
    cols[c.key] = *idx;
  }
  const auto note_col = column("annotator_note");

  LabeledDataset ds;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& row = table[r];
    const std::string where = "row " + std::to_string(r);
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    if (row.size() != header.size()) {
      throw MalformedDataset(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                             std::to_string(row.size()));
    }
    LabeledStatement s;
    s.text = row[*text_col];
    if (s.text.find_first_not_of(" \t\r\n") == std::string::npos) throw MalformedDataset(where + ": empty text");
    for (const auto& c : schema().categories) {
      const auto& raw = row[cols[c.key]];
      if (raw.empty()) throw MalformedDataset(where + ": missing label for '" + c.key + "'");
      auto label = normalize_label(c, raw);
      if (!label) throw MalformedDataset(where + ": illegal label '" + raw + "' for '" + c.key + "'");
      s.gold[c.key] = *label;
    }
    if (note_col && !row[*note_col].empty()) s.annotator_note = row[*note_col];
    ds.statements.push_back(std::move(s));
  }
  if (ds.statements.empty()) throw MalformedDataset("dataset has no rows");

  for (const auto& c : schema().categories) {
    for (const auto& l : c.labels) ds.counts[c.key][l] = 0;
  }
  std::vector<std::string> digests;
  for (const auto& s : ds.statements) {
    for (const auto& [k, v] : s.gold) ++ds.counts[k][v];
    digests.push_back(row_digest(s));
  }
  std::sort(digests.begin(), digests.end());
  std::string all;
  for (const auto& d : digests) all += d;
  ds.fingerprint = sha256_hex(all).substr(0, 16);
  return ds;
}

LabeledDataset load_labeled_dataset(const std::filesystem::path& path) {
  try {
    return parse_labeled_dataset(read_file(path));
  } catch (const MalformedDataset& e) {
    throw MalformedDataset(path.string() + ": " + e.what());
  }
}

std::optional<double> Cell::precision() const {
  if (tp + fp == 0) return std::nullopt;
  return static_cast<double>(tp) / (tp + fp);
}

std::optional<double> Cell::recall() const {
  if (tp + fn == 0) return std::nullopt;
  return static_cast<double>(tp) / (tp + fn);
}

const Cell* EvaluationReport::cell(std::string_view category, std::string_view label) const {
  for (const auto& c : cells) {
    if (c.category == category && c.label == label) return &c;
  }
  return nullptr;
}

EvaluationReport evaluate_predictions(const LabeledDataset& dataset, const std::vector<Values>& predicted,
                                      const std::string& provider) {
  if (dataset.statements.empty()) throw ConfigError("cannot evaluate an empty dataset");
  if (predicted.size() != dataset.statements.size()) throw ConfigError("prediction count differs from dataset");
  EvaluationReport rep;
  rep.provider = provider;
  rep.dataset_fingerprint = dataset.fingerprint;
  rep.n_statements = static_cast<int>(dataset.statements.size());

  std::vector<double> all_p, all_r, men_p, men_r;
  for (const auto& cat : schema().categories) {
    std::vector<double> cat_p, cat_r;
    int pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
    for (const auto& label : cat.labels) {
      Cell cell{cat.key, label};
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool gold = dataset.statements[i].gold.at(cat.key) == label;
        const bool pred = predicted[i].at(cat.key) == label;
        if (gold && pred) ++cell.tp;
        else if (!gold && pred) ++cell.fp;
        else if (gold && !pred) ++cell.fn;
        else ++cell.tn;
      }
      pooled_tp += cell.tp;
      pooled_fp += cell.fp;
      pooled_fn += cell.fn;
      if (cell.support() > 0) {
        const auto p = cell.precision();
        const auto r = cell.recall();
        if (p) cat_p.push_back(*p), all_p.push_back(*p);
        if (r) cat_r.push_back(*r), all_r.push_back(*r);
        if (!is_absence_label(label)) {
          if (p) men_p.push_back(*p);
          if (r) men_r.push_back(*r);
        }
      }
      rep.cells.push_back(cell);
    }
    rep.macro[cat.key] = {mean(cat_p), mean(cat_r)};
    Averages micro;
    if (pooled_tp + pooled_fp > 0) micro.precision = static_cast<double>(pooled_tp) / (pooled_tp + pooled_fp);
    if (pooled_tp + pooled_fn > 0) micro.recall = static_cast<double>(pooled_tp) / (pooled_tp + pooled_fn);
    rep.micro[cat.key] = micro;
  }
  rep.macro_overall = {mean(all_p), mean(all_r)};
  rep.macro_mentioned = {mean(men_p), mean(men_r)};
  return rep;
}

EvaluationReport evaluate(ClassifierProvider& provider, const LabeledDataset& dataset) {
  std::vector<Values> predicted;
  predicted.reserve(dataset.statements.size());
  for (const auto& s : dataset.statements) predicted.push_back(classify_statement(s.text, provider).values);
  return evaluate_predictions(dataset, predicted, provider.name());
}

std::string report_csv(const EvaluationReport& r) {
  std::ostringstream out;
  csv::write_row(out, {"category", "label", "support", "tp", "fp", "fn", "tn", "precision", "recall"});
  for (const auto& c : r.cells) {
    csv::write_row(out, {c.category, c.label, std::to_string(c.support()), std::to_string(c.tp),
                         std::to_string(c.fp), std::to_string(c.fn), std::to_string(c.tn),
                         fmt(c.precision()), fmt(c.recall())});
  }
  for (const auto& cat : schema().categories) {
    const auto& m = r.macro.at(cat.key);
    csv::write_row(out, {cat.key, "(macro)", "", "", "", "", "", fmt(m.precision), fmt(m.recall)});
    const auto& mi = r.micro.at(cat.key);
    csv::write_row(out, {cat.key, "(micro)", "", "", "", "", "", fmt(mi.precision), fmt(mi.recall)});
  }
  csv::write_row(out, {"(all)", "(macro)", "", "", "", "", "", fmt(r.macro_overall.precision),
                       fmt(r.macro_overall.recall)});
  csv::write_row(out, {"(mentioned)", "(macro)", "", "", "", "", "", fmt(r.macro_mentioned.precision),
                       fmt(r.macro_mentioned.recall)});
  csv::write_row(out, {"(meta)", "provider=" + r.provider, std::to_string(r.n_statements), "", "", "", "",
                       "dataset=" + r.dataset_fingerprint, ""});
  return out.str();
}

}  // namespace policyforge::classify
