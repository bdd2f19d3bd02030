#include "ace/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ace/errors.hpp"
#include "ace/hash.hpp"
#include "ace/vocab.hpp"
#include "json.hpp"

namespace ace {

Embedding normalize(Eigen::VectorXd v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::kNormalizationError, "cannot normalize a zero-norm vector");
  v /= n;
  return {std::move(v), true};
}

namespace {

// d(z/|z|)/dz applied to an upstream gradient.
Eigen::VectorXd normalize_backward(const Eigen::VectorXd& z, const Eigen::VectorXd& d_unit) {
  const double n = z.norm();
  const Eigen::VectorXd u = z / n;
  return (d_unit - u * u.dot(d_unit)) / n;
}

}  // namespace

Gradients zero_gradients(const std::vector<Parameter>& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
  return g;
}

// --- LinearVideoEncoder --------------------------------------------------

LinearVideoEncoder::LinearVideoEncoder(Eigen::MatrixXd projection) {
  params_.push_back({kVideoProjection, std::move(projection), true});
}

Eigen::VectorXd LinearVideoEncoder::pooled(const VideoSample& sample) const {
  if (sample.features.rows() == 0 || sample.features.cols() != feature_dim()) {
    throw Error(ErrorCode::kShapeError, "clip '" + sample.clip_id + "' has " + std::to_string(sample.features.rows()) +
                                            "x" + std::to_string(sample.features.cols()) +
                                            " features, encoder expects frames x " + std::to_string(feature_dim()));
  }
  return sample.features.colwise().mean().transpose();
}

Embedding LinearVideoEncoder::encode(const VideoSample& sample) const {
  return normalize(params_[0].value * pooled(sample));
}

void LinearVideoEncoder::backward(const VideoSample& sample, const Eigen::VectorXd& d_embedding,
                                  Gradients& grads) const {
  if (!params_[0].trainable) return;
  const Eigen::VectorXd x = pooled(sample);
  const Eigen::VectorXd z = params_[0].value * x;
  grads[0].noalias() += normalize_backward(z, d_embedding) * x.transpose();
}

// --- HashedBagTextEncoder ------------------------------------------------

HashedBagTextEncoder::HashedBagTextEncoder(Eigen::MatrixXd token_table, Eigen::MatrixXd projection) {
  if (token_table.cols() != projection.cols()) {
    throw Error(ErrorCode::kShapeError, "token table width " + std::to_string(token_table.cols()) +
                                            " does not match projection input " + std::to_string(projection.cols()));
  }
  params_.push_back({kTextTokenTable, std::move(token_table), false});
  params_.push_back({kTextProjection, std::move(projection), true});
}

std::size_t HashedBagTextEncoder::bucket(std::string_view token, std::size_t buckets) {
  return static_cast<std::size_t>(fnv1a64(token) % buckets);
}

std::vector<std::size_t> HashedBagTextEncoder::rows_for(std::string_view text) const {
  std::vector<std::size_t> rows;
  for (const auto& tok : tokenize(to_lower(text))) rows.push_back(bucket(tok, buckets()));
  if (rows.empty()) throw Error(ErrorCode::kShapeError, "cannot encode empty text");
  return rows;
}

Embedding HashedBagTextEncoder::encode(std::string_view text) const {
  const auto rows = rows_for(text);
  const auto& table = params_[0].value;
  Eigen::VectorXd bag = Eigen::VectorXd::Zero(table.cols());
  for (auto r : rows) bag += table.row(static_cast<Eigen::Index>(r)).transpose();
  bag /= static_cast<double>(rows.size());
  return normalize(params_[1].value * bag);
}

void HashedBagTextEncoder::backward(std::string_view text, const Eigen::VectorXd& d_embedding,
                                    Gradients& grads) const {
  const bool table_trainable = params_[0].trainable;
  const bool proj_trainable = params_[1].trainable;
  if (!table_trainable && !proj_trainable) return;

  const auto rows = rows_for(text);
  const auto& table = params_[0].value;
  const auto& proj = params_[1].value;
  Eigen::VectorXd bag = Eigen::VectorXd::Zero(table.cols());
  for (auto r : rows) bag += table.row(static_cast<Eigen::Index>(r)).transpose();
  bag /= static_cast<double>(rows.size());

  const Eigen::VectorXd dz = normalize_backward(proj * bag, d_embedding);
  if (proj_trainable) grads[1].noalias() += dz * bag.transpose();
  if (table_trainable) {
    const Eigen::VectorXd d_bag = proj.transpose() * dz / static_cast<double>(rows.size());
    for (auto r : rows) grads[0].row(static_cast<Eigen::Index>(r)) += d_bag.transpose();
  }
}

// --- EncoderPair ---------------------------------------------------------

void EncoderPair::set_trainable(const std::set<std::string>& names) {
  if (video->dim() != text->dim()) {
    throw Error(ErrorCode::kConfigError, "video dim " + std::to_string(video->dim()) + " != text dim " +
                                             std::to_string(text->dim()));
  }
  std::set<std::string> unknown = names;
  for (auto* params : {&video->parameters(), &text->parameters()}) {
    for (auto& p : *params) {
      p.trainable = names.contains(p.name);
      unknown.erase(p.name);
    }
  }
  if (!unknown.empty()) throw Error(ErrorCode::kConfigError, "unknown parameter '" + *unknown.begin() + "'");
}

std::vector<std::string> EncoderPair::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : video->parameters()) out.push_back(p.name);
  for (const auto& p : text->parameters()) out.push_back(p.name);
  return out;
}

EncoderPair EncoderPair::clone_toy() const { return make_toy_encoders(all_parameters(*this)); }

std::vector<Parameter> all_parameters(const EncoderPair& pair) {
  std::vector<Parameter> out = pair.video->parameters();
  const auto& t = pair.text->parameters();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

EncoderPair make_toy_encoders(const std::vector<Parameter>& params) {
  const Parameter* video = nullptr;
  const Parameter* table = nullptr;
  const Parameter* proj = nullptr;
  for (const auto& p : params) {
    if (p.name == kVideoProjection) video = &p;
    else if (p.name == kTextTokenTable) table = &p;
    else if (p.name == kTextProjection) proj = &p;
  }
  if (!video || !table || !proj) throw Error(ErrorCode::kSchemaError, "toy encoder parameters incomplete");
  EncoderPair pair;
  pair.video = std::make_unique<LinearVideoEncoder>(video->value);
  pair.text = std::make_unique<HashedBagTextEncoder>(table->value, proj->value);
  pair.video->parameters()[0].trainable = video->trainable;
  pair.text->parameters()[0].trainable = table->trainable;
  pair.text->parameters()[1].trainable = proj->trainable;
  if (pair.video->dim() != pair.text->dim()) {
    throw Error(ErrorCode::kShapeError, "video and text encoders disagree on embedding dimension");
  }
  return pair;
}

// --- parameter files -----------------------------------------------------

using json = nlohmann::ordered_json;

std::string parameters_to_json(const std::vector<Parameter>& params) {
  json doc = json::array();
  for (const auto& p : params) {
    std::vector<double> data(static_cast<std::size_t>(p.value.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), p.value.rows(), p.value.cols()) = p.value;
    doc.push_back(json{{"name", p.name},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"trainable", p.trainable},
                       {"data", std::move(data)}});
  }
  return doc.dump();
}

std::vector<Parameter> parameters_from_json(std::string_view text) {
  std::vector<Parameter> out;
  try {
    const json doc = json::parse(text);
    for (const auto& j : doc) {
      const auto rows = j.at("rows").get<Eigen::Index>();
      const auto cols = j.at("cols").get<Eigen::Index>();
      const auto data = j.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw Error(ErrorCode::kSchemaError, "parameter '" + j.at("name").get<std::string>() + "' size mismatch");
      }
      Parameter p{j.at("name").get<std::string>(), Eigen::MatrixXd(rows, cols), j.value("trainable", true)};
      p.value = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          data.data(), rows, cols);
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("parameter file: ") + e.what());
  }
  return out;
}

void save_parameters(const std::vector<Parameter>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIngestError, "cannot write " + path.string());
  out << parameters_to_json(params) << '\n';
}

std::vector<Parameter> load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIngestError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parameters_from_json(ss.str());
}

}  // namespace ace
