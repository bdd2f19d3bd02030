#pragma once

// Slow, loop-only reference implementations. They share no code with the
// library beyond the encoders and the vocabulary containers.

#include <cstddef>
#include <span>
#include <vector>

#include "ace/ace_loss.hpp"
#include "ace/embedding.hpp"
#include "ace/vocab.hpp"

namespace ace::oracle {

struct Loss {
  double l_fixed = 0.0;
  double l_rand = 0.0;
  double l_total = 0.0;
};

// Texts standing for `label` of class `owner`, straight from the tree entries.
std::vector<std::string> label_texts(const ActionLabel& label, const Vocabulary& vocab, std::size_t owner, bool leaf);

// S(I, a) as the plain average of cosines over the label's texts, over tau.
double sim(const VideoSample& clip, const ActionLabel& label, const Vocabulary& vocab, std::size_t owner, bool leaf,
           double tau, const EncoderPair& enc);

Loss loss(std::span<const VideoSample> batch, const Vocabulary& vocab, const EncoderPair& enc,
          const IterationLabels& labels, const LossOptions& options);

struct Scores {
  double accuracy = 0.0;  // percent
  double macro_f1 = 0.0;  // percent
};

// Accuracy and macro-F1 from an explicit confusion matrix.
Scores confusion_scores(std::span<const std::size_t> predictions, std::span<const std::size_t> truth,
                        std::size_t classes);

}  // namespace ace::oracle
