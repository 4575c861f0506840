#pragma once

// Validation-loss driven callbacks: early stopping with best-epoch tracking
// and plateau-based learning-rate reduction. Both improve only on a strict
// decrease of the monitored loss.

#include <algorithm>
#include <limits>
#include <string>

#include "venation/errors.hpp"

namespace venation {

enum class StopDecision { proceed, stop };

class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("early stopping patience must be >= 1");
  }

  // Feeds the loss of the next epoch (epochs count from 1).
  StopDecision step(double val_loss) {
    ++epoch_;
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
      wait_ = 0;
      improved_ = true;
    } else {
      ++wait_;
      improved_ = false;
    }
    return wait_ >= patience_ ? StopDecision::stop : StopDecision::proceed;
  }

  int patience() const noexcept { return patience_; }
  int epoch() const noexcept { return epoch_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }
  int wait() const noexcept { return wait_; }
  // Whether the most recent step set a new minimum.
  bool improved() const noexcept { return improved_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int wait_ = 0;
  bool improved_ = false;
  double best_ = std::numeric_limits<double>::infinity();
};

class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor, int patience,
                   double min_lr)
      : lr_(initial_lr), factor_(factor), patience_(patience), min_lr_(min_lr) {
    if (!(factor > 0.0 && factor < 1.0)) {
      throw ConfigError("plateau factor must lie in (0, 1)");
    }
    if (patience < 1) throw ConfigError("plateau patience must be >= 1");
    if (!(initial_lr > 0.0) || min_lr < 0.0) {
      throw ConfigError("plateau learning rates must be positive");
    }
  }

  // Consumes an epoch's validation loss and returns the rate for the next
  // epoch.
  double step(double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      wait_ = 0;
    } else if (++wait_ >= patience_) {
      if (lr_ > min_lr_) lr_ = std::max(lr_ * factor_, min_lr_);
      wait_ = 0;
    }
    return lr_;
  }

  double learning_rate() const noexcept { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  int wait_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace venation
