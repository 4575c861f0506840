#pragma once

// N x K class-probability matrix with true labels, and its CSV form.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "venation/errors.hpp"

namespace venation {

// Row-major N x K matrix of doubles.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct PredictionMatrix {
  std::vector<std::string> image_ids;
  std::vector<int> true_labels;
  std::vector<std::string> class_names;
  ScoreMatrix scores;

  std::size_t size() const noexcept { return true_labels.size(); }
  int class_count() const noexcept {
    return static_cast<int>(class_names.size());
  }

  // Throws unless shapes agree, labels are in range and every row is a
  // probability vector within `tolerance`.
  void validate(double tolerance = 1e-5) const {
    const auto n = true_labels.size();
    if (image_ids.size() != n || scores.rows() != n) {
      throw ShapeError("prediction matrix: row count mismatch");
    }
    if (scores.cols() != class_names.size()) {
      throw ShapeError("prediction matrix: " + std::to_string(scores.cols()) +
                       " score columns for " +
                       std::to_string(class_names.size()) + " classes");
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (true_labels[r] < 0 || true_labels[r] >= class_count()) {
        throw ShapeError("prediction matrix: label out of range at row " +
                         std::to_string(r));
      }
      double sum = 0.0;
      for (double p : scores.row(r)) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw ShapeError("prediction matrix: probability outside [0,1] at row " +
                           std::to_string(r));
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > tolerance) {
        throw ShapeError("prediction matrix: row " + std::to_string(r) +
                         " sums to " + std::to_string(sum));
      }
    }
  }
};

// Header: image_id,true_label,p_<class0>,...; probabilities with 6
// decimals. Image ids and class names must not contain commas.
inline std::string predictions_to_csv(const PredictionMatrix& pm) {
  std::ostringstream out;
  out << "image_id,true_label";
  for (const auto& name : pm.class_names) out << ",p_" << name;
  out << "\n";
  char buf[32];
  for (std::size_t r = 0; r < pm.size(); ++r) {
    out << pm.image_ids[r] << "," << pm.true_labels[r];
    for (double p : pm.scores.row(r)) {
      std::snprintf(buf, sizeof buf, "%.6f", p);
      out << "," << buf;
    }
    out << "\n";
  }
  return out.str();
}

inline void write_predictions(const std::filesystem::path& path,
                              const PredictionMatrix& pm) {
  for (const auto& id : pm.image_ids) {
    if (id.find(',') != std::string::npos) {
      throw ConfigError("image id contains a comma: " + id);
    }
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << predictions_to_csv(pm);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

inline PredictionMatrix parse_predictions_csv(std::istream& in,
                                              const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("empty predictions file " + source);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "image_id" ||
      header[1] != "true_label") {
    throw ConfigError("bad predictions header in " + source);
  }
  PredictionMatrix pm;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i].rfind("p_", 0) != 0) {
      throw ConfigError("bad predictions column '" + header[i] + "' in " +
                        source);
    }
    pm.class_names.push_back(header[i].substr(2));
  }
  const std::size_t k = pm.class_names.size();

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != k + 2) {
      throw ConfigError(source + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(k + 2) + " fields");
    }
    try {
      pm.image_ids.push_back(cells[0]);
      pm.true_labels.push_back(std::stoi(cells[1]));
      for (std::size_t c = 0; c < k; ++c) values.push_back(std::stod(cells[c + 2]));
    } catch (const std::exception&) {
      throw ConfigError(source + ":" + std::to_string(line_no) +
                        ": malformed number");
    }
  }
  pm.scores = ScoreMatrix(pm.image_ids.size(), k);
  for (std::size_t r = 0; r < pm.image_ids.size(); ++r)
    for (std::size_t c = 0; c < k; ++c) pm.scores(r, c) = values[r * k + c];
  pm.validate();
  return pm;
}

inline PredictionMatrix read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read predictions " + path.string());
  return parse_predictions_csv(in, path.string());
}

}  // namespace venation
