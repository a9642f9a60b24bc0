#pragma once

#include "palm/kernel.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace palm {

/// Responses paired with unit-coded inputs; what the fitting code consumes.
struct CodedData {
  Design X;
  Eigen::VectorXd y;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

/// The global training corpus in natural units together with the map used
/// to code it onto [0,1]^d.
class TrainingSet {
public:
  /// Coding defaults to the per-dimension range of X.
  TrainingSet(Design X, Eigen::VectorXd y,
              std::optional<CodingMap> coding = std::nullopt);

  const Design &X() const { return X_; }
  const Eigen::VectorXd &y() const { return y_; }
  const CodingMap &coding() const { return coding_; }
  Eigen::Index size() const { return X_.rows(); }
  Eigen::Index dim() const { return X_.cols(); }

  CodedData coded() const { return {coding_.code(X_), y_}; }
  TrainingSet with_responses(Eigen::VectorXd y) const {
    return TrainingSet(X_, std::move(y), coding_);
  }

private:
  Design X_;
  Eigen::VectorXd y_;
  CodingMap coding_;
};

/// A parsed CSV table: header names and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;
};

CsvTable read_csv(const std::filesystem::path &path);

/// Columns x1..xd,y.
TrainingSet read_dataset_csv(const std::filesystem::path &path);
void write_dataset_csv(const std::filesystem::path &path, const Design &X,
                       const Eigen::VectorXd &y);

/// Columns x1..xd; a trailing y column, if present, is ignored.
Design read_inputs_csv(const std::filesystem::path &path);

/// Shortest decimal representation that reads back to the same double.
std::string format_double(double v);

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path &path,
                       const std::string &contents);

} // namespace palm
