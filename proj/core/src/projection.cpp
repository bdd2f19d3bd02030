#include "ace/projection.hpp"

#include <cstdio>

#include "ace/errors.hpp"

namespace ace {

Eigen::MatrixXd PcaReducer::fit_transform(const Eigen::MatrixXd& points) {
  if (points.rows() == 0) return Eigen::MatrixXd(0, 2);
  const Eigen::MatrixXd centered = points.rowwise() - points.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::kNumericsError, "PCA eigen-decomposition failed");
  // eigenvalues ascend
  Eigen::MatrixXd axes(points.cols(), 2);
  for (int k = 0; k < 2; ++k) {
    const Eigen::Index col = points.cols() - 1 - k;
    Eigen::VectorXd v = col >= 0 ? Eigen::VectorXd(eig.eigenvectors().col(col)) : Eigen::VectorXd::Zero(points.cols());
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(k) = v;
  }
  return centered * axes;
}

std::unique_ptr<Reducer> make_reducer(const std::string& name) {
  if (name == "pca") return std::make_unique<PcaReducer>();
  throw Error(ErrorCode::kConfigError, "unknown reducer '" + name + "' (available: pca)");
}

std::vector<ProjectionRow> project_concepts(const Vocabulary& vocab, const TextEncoder& text, Reducer& reducer) {
  std::vector<ProjectionRow> rows;
  for (const auto& action : vocab.actions()) {
    for (const auto& node : vocab.tree(action.verb()).nodes()) {
      rows.push_back({action.with_verb(node).text(), action.text(), 0.0, 0.0});
    }
  }
  Eigen::MatrixXd points(static_cast<Eigen::Index>(rows.size()), text.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) points.row(static_cast<Eigen::Index>(i)) = text.encode(rows[i].label).vector.transpose();
  const Eigen::MatrixXd xy = reducer.fit_transform(points);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].x = xy(static_cast<Eigen::Index>(i), 0);
    rows[i].y = xy(static_cast<Eigen::Index>(i), 1);
  }
  return rows;
}

std::string projection_csv(const std::vector<ProjectionRow>& rows) {
  std::string out = "label,group,x,y\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f\n", r.x, r.y);
    out += r.label + "," + r.group + buf;
  }
  return out;
}

}  // namespace ace
