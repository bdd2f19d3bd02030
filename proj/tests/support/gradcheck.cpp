#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ace/ace_loss.hpp"
#include "toy.hpp"

namespace ace::testing {

GradCheck gradient_check(std::uint64_t seed, double step) {
  std::mt19937_64 gen(seed);
  const std::size_t classes = 2 + seed % 3;
  const auto vocab = toy_vocab(classes, 2 + static_cast<int>(seed % 2), 2, 1 + seed % 2);
  auto enc = random_encoders(gen, 3 + static_cast<Eigen::Index>(seed % 3), 3, 256, 3);
  const auto batch = random_batch(gen, 1 + seed % 3, classes, 2, 3);
  enc.set_trainable({kVideoProjection, kTextTokenTable, kTextProjection});

  LossOptions options;
  options.tau = 0.1;
  Rng rng(seed);
  const auto labels = sample_iteration_labels(vocab, rng, options.flags);

  auto grads = zero_loss_gradients(enc);
  compute_loss(batch, vocab, enc, labels, options, &grads);

  GradCheck out;
  auto probe = [&](std::vector<Parameter>& params, Gradients& g) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (!params[p].trainable) continue;
      auto& w = params[p].value;
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
          const double keep = w(i, j);
          w(i, j) = keep + step;
          const double up = compute_loss(batch, vocab, enc, labels, options).l_total;
          w(i, j) = keep - step;
          const double down = compute_loss(batch, vocab, enc, labels, options).l_total;
          w(i, j) = keep;
          const double numeric = (up - down) / (2 * step);
          const double analytic = g[p](i, j);
          const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
          out.max_rel_error = std::max(out.max_rel_error, std::abs(numeric - analytic) / scale);
          ++out.entries;
        }
      }
    }
  };
  probe(enc.video->parameters(), grads.video);
  probe(enc.text->parameters(), grads.text);
  return out;
}

}  // namespace ace::testing
