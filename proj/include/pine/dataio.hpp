#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "pine/error.hpp"
#include "pine/rng.hpp"

namespace pine {

enum class FeatureKind { Continuous, Categorical };

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  // Categorical only: categories[code - 1] is the token encoded as `code`.
  std::vector<std::string> categories;
};

/// Row-major feature matrix with optional class labels.
/// Labels are stored 0-based (class c in the file maps to c - 1 here).
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t n_features, std::vector<double> values, std::vector<int> labels = {},
          std::vector<FeatureMeta> features = {}, std::vector<std::string> class_names = {})
      : p_(n_features),
        values_(std::move(values)),
        labels_(std::move(labels)),
        features_(std::move(features)),
        class_names_(std::move(class_names)) {
    if (p_ == 0 || values_.size() % p_ != 0)
      throw Error(Errc::InconsistentColumnCount, "value count is not a multiple of the feature count");
    if (!labels_.empty() && labels_.size() != n_rows())
      throw Error(Errc::DimensionMismatch, "label count differs from row count");
    if (features_.empty()) {
      for (std::size_t j = 0; j < p_; ++j) features_.push_back({"x" + std::to_string(j + 1), FeatureKind::Continuous, {}});
    }
    if (features_.size() != p_) throw Error(Errc::DimensionMismatch, "feature metadata size differs from p");
    if (!labels_.empty() && class_names_.empty()) {
      const int c = *std::max_element(labels_.begin(), labels_.end()) + 1;
      for (int k = 0; k < c; ++k) class_names_.push_back(std::to_string(k));
    }
    for (int y : labels_) {
      if (y < 0 || y >= static_cast<int>(class_names_.size()))
        throw Error(Errc::InvalidArgument, "label outside the class range");
    }
  }

  std::size_t n_rows() const noexcept { return p_ == 0 ? 0 : values_.size() / p_; }
  std::size_t n_features() const noexcept { return p_; }
  int n_classes() const noexcept { return static_cast<int>(class_names_.size()); }
  bool has_labels() const noexcept { return !labels_.empty(); }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * p_, p_}; }
  double at(std::size_t i, std::size_t j) const { return values_[i * p_ + j]; }
  int label(std::size_t i) const { return labels_.at(i); }

  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<FeatureMeta>& features() const noexcept { return features_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(n_rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, j);
    return out;
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<double> vals;
    vals.reserve(rows.size() * p_);
    std::vector<int> labs;
    for (std::size_t r : rows) {
      const auto x = row(r);
      vals.insert(vals.end(), x.begin(), x.end());
      if (has_labels()) labs.push_back(labels_[r]);
    }
    Dataset out;
    out.p_ = p_;
    out.values_ = std::move(vals);
    out.labels_ = std::move(labs);
    out.features_ = features_;
    out.class_names_ = class_names_;
    return out;
  }

  /// Decode an ordinal code back to its category token.
  std::string category_name(std::size_t feature, double code) const {
    const auto& meta = features_.at(feature);
    if (meta.kind != FeatureKind::Categorical) throw Error(Errc::InvalidArgument, "feature is not categorical");
    const auto idx = static_cast<std::size_t>(code);
    if (code != static_cast<double>(idx) || idx < 1 || idx > meta.categories.size())
      throw Error(Errc::InvalidArgument, "code outside the category range");
    return meta.categories[idx - 1];
  }

 private:
  std::size_t p_ = 0;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<FeatureMeta> features_;
  std::vector<std::string> class_names_;
};

namespace csv {

struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC-4180: comma separated, double-quoted fields with "" escapes, CRLF or LF.
inline std::vector<Record> parse(std::string_view text) {
  std::vector<Record> out;
  Record rec;
  std::string field;
  std::size_t line = 1;
  rec.line = line;
  bool in_quotes = false;
  bool field_started = false;
  bool any = false;
  auto end_field = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) out.push_back(std::move(rec));
    rec = Record{};
    rec.line = line;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started)
          throw Error(Errc::ParseError, "line " + std::to_string(line) + ": stray quote inside unquoted field");
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        ++line;
        end_record();
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(Errc::ParseError, "line " + std::to_string(line) + ": unterminated quoted field");
  if (any && (field_started || !rec.fields.empty() || !field.empty())) end_record();
  return out;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace csv

/// Parse CSV text. Numeric columns become continuous features, any other
/// column is ordinal-encoded by first appearance (codes start at 1). The label
/// column, when named, is mapped to classes by sorted distinct value (numeric
/// order when every label is numeric, lexicographic otherwise).
inline Dataset parse_csv(std::string_view text, const std::optional<std::string>& label_column = std::nullopt) {
  auto records = csv::parse(text);
  if (records.empty()) throw Error(Errc::EmptyDataset, "missing header row");
  const auto header = records.front().fields;
  const std::size_t width = header.size();
  if (records.size() == 1) throw Error(Errc::EmptyDataset, "no data rows");

  std::optional<std::size_t> label_idx;
  if (label_column) {
    const auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end()) throw Error(Errc::ParseError, "label column '" + *label_column + "' not in header");
    label_idx = static_cast<std::size_t>(it - header.begin());
  }

  const std::size_t n = records.size() - 1;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.fields.size() != width)
      throw Error(Errc::InconsistentColumnCount, "line " + std::to_string(r.line) + " has " +
                                                     std::to_string(r.fields.size()) + " fields, header has " +
                                                     std::to_string(width));
    for (std::size_t j = 0; j < width; ++j) {
      const auto& f = r.fields[j];
      if (f.find_first_not_of(" \t") == std::string::npos)
        throw Error(Errc::ParseError, "row " + std::to_string(i) + ", column " + std::to_string(j + 1) + " ('" +
                                          header[j] + "') is empty");
    }
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t j = 0; j < width; ++j)
    if (!label_idx || j != *label_idx) feature_cols.push_back(j);
  if (feature_cols.empty()) throw Error(Errc::EmptyDataset, "no feature columns");

  const std::size_t p = feature_cols.size();
  std::vector<double> values(n * p);
  std::vector<FeatureMeta> meta(p);
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t j = feature_cols[k];
    meta[k].name = header[j];
    bool numeric = true;
    for (std::size_t i = 0; i < n && numeric; ++i) numeric = csv::parse_number(records[i + 1].fields[j]).has_value();
    if (numeric) {
      for (std::size_t i = 0; i < n; ++i) values[i * p + k] = *csv::parse_number(records[i + 1].fields[j]);
    } else {
      meta[k].kind = FeatureKind::Categorical;
      std::map<std::string, int> codes;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& tok = records[i + 1].fields[j];
        auto [it, inserted] = codes.try_emplace(tok, static_cast<int>(codes.size()) + 1);
        if (inserted) meta[k].categories.push_back(tok);
        values[i * p + k] = it->second;
      }
    }
  }

  std::vector<int> labels;
  std::vector<std::string> class_names;
  if (label_idx) {
    std::vector<std::string> distinct;
    bool numeric = true;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tok = records[i + 1].fields[*label_idx];
      numeric = numeric && csv::parse_number(tok).has_value();
      distinct.push_back(tok);
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (numeric) {
      std::stable_sort(distinct.begin(), distinct.end(), [](const std::string& a, const std::string& b) {
        return *csv::parse_number(a) < *csv::parse_number(b);
      });
    }
    class_names = distinct;
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& tok = records[i + 1].fields[*label_idx];
      labels[i] = static_cast<int>(std::find(distinct.begin(), distinct.end(), tok) - distinct.begin());
    }
  }
  return Dataset(p, std::move(values), std::move(labels), std::move(meta), std::move(class_names));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
  out << content;
}

inline Dataset load_csv(const std::string& path, const std::optional<std::string>& label_column = std::nullopt) {
  return parse_csv(read_file(path), label_column);
}

/// Categorical features are written back as their tokens; labels as class names.
inline std::string to_csv(const Dataset& ds, const std::string& label_column = "label") {
  std::ostringstream out;
  for (std::size_t j = 0; j < ds.n_features(); ++j) out << (j ? "," : "") << csv::quote(ds.features()[j].name);
  if (ds.has_labels()) out << ',' << csv::quote(label_column);
  out << "\r\n";
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
      if (j) out << ',';
      if (ds.features()[j].kind == FeatureKind::Categorical) out << csv::quote(ds.category_name(j, ds.at(i, j)));
      else out << csv::format_number(ds.at(i, j));
    }
    if (ds.has_labels()) out << ',' << csv::quote(ds.class_names()[ds.label(i)]);
    out << "\r\n";
  }
  return out.str();
}

struct SplitSpec {
  std::vector<double> ratios;
  std::uint64_t seed = 0;

  void validate() const {
    if (ratios.empty()) throw Error(Errc::InvalidArgument, "split needs at least one ratio");
    double sum = 0.0;
    for (double r : ratios) {
      if (!(r >= 0.0)) throw Error(Errc::InvalidArgument, "split ratios must be non-negative");
      sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::InvalidArgument, "split ratios must sum to 1");
  }
};

/// Partition sizes: floor(ratio * n) for every partition but the last, which
/// takes the remainder. A partition with a positive ratio is never left empty
/// when n allows it; it borrows one row from the largest partition.
inline std::vector<std::size_t> split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const std::size_t k = spec.ratios.size();
  if (n < k) throw Error(Errc::TooFewRows, std::to_string(n) + " rows cannot fill " + std::to_string(k) + " partitions");
  std::vector<std::size_t> sizes(k, 0);
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    // 1e-9 absorbs products such as 0.29 * 100 = 28.999999999999996.
    sizes[i] = static_cast<std::size_t>(std::floor(spec.ratios[i] * static_cast<double>(n) + 1e-9));
    used += sizes[i];
  }
  if (used > n) throw Error(Errc::InvalidArgument, "split ratios overflow the row count");
  sizes[k - 1] = n - used;
  for (std::size_t i = 0; i < k; ++i) {
    if (sizes[i] > 0 || spec.ratios[i] <= 0.0) continue;
    const auto donor = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    if (sizes[donor] <= 1) break;
    --sizes[donor];
    ++sizes[i];
  }
  return sizes;
}

/// Seeded shuffle of row indices, cut into consecutive partitions.
inline std::vector<std::vector<std::size_t>> split_indices(std::size_t n, const SplitSpec& spec) {
  const auto sizes = split_sizes(n, spec);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SplitMix64 rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::vector<std::size_t>> parts;
  std::size_t at = 0;
  for (std::size_t s : sizes) {
    parts.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(at), perm.begin() + static_cast<std::ptrdiff_t>(at + s));
    at += s;
  }
  return parts;
}

inline std::vector<Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  std::vector<Dataset> out;
  for (const auto& idx : split_indices(ds.n_rows(), spec)) out.push_back(ds.subset(idx));
  return out;
}

inline nlohmann::json split_manifest(std::size_t n, const SplitSpec& spec) {
  nlohmann::json j;
  j["seed"] = spec.seed;
  j["ratios"] = spec.ratios;
  j["n_rows"] = n;
  j["prng"] = "splitmix64-fisher-yates";
  j["partitions"] = split_indices(n, spec);
  return j;
}

}  // namespace pine
