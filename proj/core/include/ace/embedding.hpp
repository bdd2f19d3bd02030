#pragma once

// Video/text encoder interfaces sharing one D-dimensional normalized space,
// plus the toy trainable encoders used for desk-scale runs.

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ace {

struct Embedding {
  Eigen::VectorXd vector;
  bool normalized = false;
};

/// L2-normalizes `v`; throws NormalizationError on a zero (or non-finite) norm.
Embedding normalize(Eigen::VectorXd v);

struct VideoSample {
  Eigen::MatrixXd features;  // frames x feature_dim
  std::size_t label_index = 0;
  std::string clip_id;
};

struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  bool trainable = true;
};

/// One gradient matrix per parameter, in parameters() order.
using Gradients = std::vector<Eigen::MatrixXd>;

Gradients zero_gradients(const std::vector<Parameter>& params);

/// Maps a clip to the shared space. backward() adds d(loss)/d(parameter) for
/// every trainable parameter given d(loss)/d(embedding).
class VideoEncoder {
 public:
  virtual ~VideoEncoder() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Embedding encode(const VideoSample& sample) const = 0;
  virtual void backward(const VideoSample& sample, const Eigen::VectorXd& d_embedding, Gradients& grads) const = 0;
  virtual std::vector<Parameter>& parameters() = 0;
  virtual const std::vector<Parameter>& parameters() const = 0;
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Embedding encode(std::string_view text) const = 0;
  virtual void backward(std::string_view text, const Eigen::VectorXd& d_embedding, Gradients& grads) const = 0;
  virtual std::vector<Parameter>& parameters() = 0;
  virtual const std::vector<Parameter>& parameters() const = 0;
};

struct EncoderPair {
  std::unique_ptr<VideoEncoder> video;
  std::unique_ptr<TextEncoder> text;

  /// Marks exactly the named parameters trainable; throws ConfigError on an
  /// unknown name or mismatched encoder dimensions.
  void set_trainable(const std::set<std::string>& names);
  std::vector<std::string> parameter_names() const;
  EncoderPair clone_toy() const;
};

inline constexpr const char* kVideoProjection = "video.projection";
inline constexpr const char* kTextTokenTable = "text.token_table";
inline constexpr const char* kTextProjection = "text.projection";

/// Mean over frames, one linear projection, L2 normalization.
class LinearVideoEncoder final : public VideoEncoder {
 public:
  explicit LinearVideoEncoder(Eigen::MatrixXd projection);  // D x feature_dim

  Eigen::Index dim() const override { return params_[0].value.rows(); }
  Eigen::Index feature_dim() const { return params_[0].value.cols(); }
  Embedding encode(const VideoSample& sample) const override;
  void backward(const VideoSample& sample, const Eigen::VectorXd& d_embedding, Gradients& grads) const override;
  std::vector<Parameter>& parameters() override { return params_; }
  const std::vector<Parameter>& parameters() const override { return params_; }

 private:
  Eigen::VectorXd pooled(const VideoSample& sample) const;
  std::vector<Parameter> params_;
};

/// Whitespace tokens hashed into a bucket table; the bag is the mean of the
/// token rows, followed by a linear projection and L2 normalization.
class HashedBagTextEncoder final : public TextEncoder {
 public:
  HashedBagTextEncoder(Eigen::MatrixXd token_table, Eigen::MatrixXd projection);  // buckets x E, D x E

  static std::size_t bucket(std::string_view token, std::size_t buckets);

  Eigen::Index dim() const override { return params_[1].value.rows(); }
  std::size_t buckets() const { return static_cast<std::size_t>(params_[0].value.rows()); }
  Embedding encode(std::string_view text) const override;
  void backward(std::string_view text, const Eigen::VectorXd& d_embedding, Gradients& grads) const override;
  std::vector<Parameter>& parameters() override { return params_; }
  const std::vector<Parameter>& parameters() const override { return params_; }

 private:
  std::vector<std::size_t> rows_for(std::string_view text) const;
  std::vector<Parameter> params_;
};

/// Builds the toy encoder pair from named parameters.
EncoderPair make_toy_encoders(const std::vector<Parameter>& params);
std::vector<Parameter> all_parameters(const EncoderPair& pair);

/// Text file of named matrices with exact (round-trip) doubles.
void save_parameters(const std::vector<Parameter>& params, const std::filesystem::path& path);
std::vector<Parameter> load_parameters(const std::filesystem::path& path);

std::string parameters_to_json(const std::vector<Parameter>& params);
std::vector<Parameter> parameters_from_json(std::string_view text);

}  // namespace ace
