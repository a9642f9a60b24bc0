#pragma once

#include "palm/centers.hpp"
#include "palm/palm.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace palm {

inline constexpr int kModelFormatVersion = 1;

/// Bookkeeping stored next to the model.
struct ModelMeta {
  /// Training CSV the model was fitted to, used by load when no data is given.
  std::string training_path;
  /// Center selection order; empty when centers were supplied directly.
  std::vector<std::pair<Eigen::VectorXd, SelectionMode>> history;
};

/// A model restored from disk: exactly one of the two kinds is set.
struct LoadedModel {
  std::optional<PalmModel> palm;
  std::optional<GlobalPlusPalm> two_stage;
  ModelMeta meta;

  MomentPrediction predict(Point x) const;
  Eigen::Index dim() const;
  const PalmModel &local_model() const;
};

/// FNV-1a over the bytes of X and y, as 16 hex digits.
std::string data_checksum(const TrainingSet &data);

/// Only indices and hyperparameters are written; factorizations are rebuilt
/// from the training data on load.
std::string serialize_model(const PalmModel &model, const TrainingSet &data,
                            const ModelMeta &meta);
std::string serialize_model(const GlobalPlusPalm &model, const TrainingSet &data,
                            const ModelMeta &meta);

/// Throws when the data does not match the stored checksum or the format
/// version is unknown.
LoadedModel deserialize_model(const std::string &text, const TrainingSet &data);

void save_model(const std::filesystem::path &path, const PalmModel &model,
                const TrainingSet &data, const ModelMeta &meta);
void save_model(const std::filesystem::path &path, const GlobalPlusPalm &model,
                const TrainingSet &data, const ModelMeta &meta);

/// Reads the training CSV named in the file unless `data` is given.
LoadedModel load_model(const std::filesystem::path &path,
                       const std::optional<TrainingSet> &data = std::nullopt);

} // namespace palm
