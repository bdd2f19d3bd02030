#pragma once

// 2-D projection of label text embeddings for concept-space plots. The
// reducer is pluggable; PCA ships by default.

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ace/embedding.hpp"
#include "ace/vocab.hpp"

namespace ace {

class Reducer {
 public:
  virtual ~Reducer() = default;
  virtual std::string name() const = 0;
  /// rows of `points` are samples; returns rows x 2.
  virtual Eigen::MatrixXd fit_transform(const Eigen::MatrixXd& points) = 0;
};

/// Top two principal components. Each axis is signed so that its largest
/// absolute loading is positive, which makes the output reproducible.
class PcaReducer final : public Reducer {
 public:
  std::string name() const override { return "pca"; }
  Eigen::MatrixXd fit_transform(const Eigen::MatrixXd& points) override;
};

std::unique_ptr<Reducer> make_reducer(const std::string& name);

struct ProjectionRow {
  std::string label;
  std::string group;  // root label text of the owning action
  double x = 0.0;
  double y = 0.0;
};

/// Every tree node of every action, rendered with the action's object.
std::vector<ProjectionRow> project_concepts(const Vocabulary& vocab, const TextEncoder& text, Reducer& reducer);

/// label,group,x,y
std::string projection_csv(const std::vector<ProjectionRow>& rows);

}  // namespace ace
