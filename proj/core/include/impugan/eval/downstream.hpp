#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "impugan/data/table.hpp"

namespace impugan::eval {

enum class ClassifierKind { kLinearSvm, kMlp };

std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier(const std::string& text);

struct ClassifierOptions {
  // Linear one-vs-rest hinge loss, L2 regularized, minibatch Adam.
  int svm_epochs = 50;
  double svm_lr = 0.01;
  double svm_l2 = 1e-4;
  // One ReLU hidden layer with softmax output; stops after `mlp_patience`
  // epochs without a training-loss gain of `mlp_tol`.
  int mlp_hidden = 10;
  int mlp_max_epochs = 300;
  double mlp_lr = 1e-3;
  double mlp_l2 = 1e-4;
  double mlp_tol = 1e-4;
  int mlp_patience = 10;
  int batch_size = 200;
};

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Median/mode fill, standardization and one-hot encoding fitted on one table
// and reused on another.
class FeatureEncoder {
 public:
  FeatureEncoder(const data::Table& train, std::size_t label);

  FeatureMatrix transform(const data::Table& table) const;
  int width() const { return width_; }

 private:
  std::size_t label_;
  std::vector<double> fill_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<int> offset_;
  std::vector<int> cats_;
  int width_ = 0;
};

// Trains on `train` and returns accuracy on `test`. Training rows whose label
// is missing are dropped; test labels must be observed.
double downstream_accuracy(const data::Table& train, const data::Table& test, std::size_t label, ClassifierKind kind,
                           std::uint64_t seed, const ClassifierOptions& options = {});

}  // namespace impugan::eval
