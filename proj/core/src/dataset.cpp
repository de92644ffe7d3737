#include "flesd/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "flesd/error.hpp"
#include "flesd/rng.hpp"

namespace flesd {

void Dataset::validate() const {
  if (features.rows() != labels.size() || ids.size() != labels.size()) {
    throw SchemaError("Dataset: features/labels/ids lengths differ");
  }
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw SchemaError("Dataset: label " + std::to_string(l) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
  }
  std::set<std::int64_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw SchemaError("Dataset: duplicate sample ids");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features = gather_rows(features, rows);
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t r : rows) {
    out.labels.push_back(labels.at(r));
    out.ids.push_back(ids.at(r));
  }
  out.num_classes = num_classes;
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (int l : labels) h.at(static_cast<std::size_t>(l)) += 1;
  return h;
}

Dataset synth_gaussian_blobs(int n_classes, std::size_t per_class, std::size_t in_dim,
                             double spread, std::uint64_t seed) {
  if (n_classes < 1 || per_class < 1 || in_dim < 1) {
    throw ParameterError("synth_gaussian_blobs: counts must be >= 1");
  }
  if (!(spread > 0.0)) throw ParameterError("synth_gaussian_blobs: spread must be > 0");

  Rng rng(derive_seed({seed, tag(SeedTag::kData)}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix centers(static_cast<std::size_t>(n_classes), in_dim);
  for (double& v : centers.data()) v = normal(rng);

  const std::size_t n = per_class * static_cast<std::size_t>(n_classes);
  Dataset ds;
  ds.features = Matrix(n, in_dim);
  ds.labels.resize(n);
  ds.ids.resize(n);
  ds.num_classes = n_classes;
  std::size_t row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      for (std::size_t j = 0; j < in_dim; ++j) {
        ds.features(row, j) = centers(static_cast<std::size_t>(c), j) + spread * normal(rng);
      }
      ds.labels[row] = c;
      ds.ids[row] = static_cast<std::int64_t>(row);
    }
  }
  return ds;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(line, "not a finite number: '" + cell + "'");
  }
  return v;
}

int parse_label(const std::string& cell, std::size_t line) {
  int v = 0;
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || v < 0) {
    throw ParseError(line, "label is not a non-negative integer: '" + cell + "'");
  }
  return v;
}

}  // namespace

Dataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": need at least one feature column and a label column");
    }
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(width) + " columns, found " +
                        std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
      values.push_back(parse_double(cells[j], line_no));
    }
    labels.push_back(parse_label(cells.back(), line_no));
  }
  if (labels.empty()) throw SchemaError("dataset " + path.string() + " is empty");

  Dataset ds;
  ds.features = Matrix(labels.size(), width - 1, std::move(values));
  ds.num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  ds.labels = std::move(labels);
  ds.ids.resize(ds.labels.size());
  std::iota(ds.ids.begin(), ds.ids.end(), std::int64_t{0});
  return ds;
}

TrainTestSplit train_test_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("train_test_split: fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed({seed, tag(SeedTag::kSplit)}));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(ds.size())));
  std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test(order.begin() + n_train, order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {ds.subset(train), ds.subset(test)};
}

Dataset concat(std::span<const Dataset> parts) {
  Dataset out;
  if (parts.empty()) return out;
  const std::size_t dim = parts.front().in_dim();
  std::vector<double> values;
  for (const Dataset& p : parts) {
    if (p.in_dim() != dim && !p.empty()) throw DimensionError("concat: feature width differs");
    values.insert(values.end(), p.features.data().begin(), p.features.data().end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.ids.insert(out.ids.end(), p.ids.begin(), p.ids.end());
    out.num_classes = std::max(out.num_classes, p.num_classes);
  }
  out.features = Matrix(out.labels.size(), dim, std::move(values));
  return out;
}

}  // namespace flesd
