#pragma once

#include <limits>

#include "decgnn/errors.hpp"

namespace decgnn {

// Patience-based stopping rule shared by the autoencoder and GNN trainers.
// A value counts as an improvement only when it beats the best so far by
// more than min_delta.
class EarlyStopper {
public:
    enum class Goal { Minimize, Maximize };

    EarlyStopper(int patience, double min_delta, Goal goal) : patience_(patience), min_delta_(min_delta), goal_(goal) {
        if (patience < 1) throw ConfigError("patience must be >= 1");
    }

    // Returns true when `value` is a new best.
    bool observe(double value) {
        const bool improved = count_ == 0 || (goal_ == Goal::Minimize ? value < best_ - min_delta_
                                                                      : value > best_ + min_delta_);
        if (improved) {
            best_ = value;
            best_index_ = count_;
            stale_ = 0;
        } else {
            ++stale_;
        }
        ++count_;
        return improved;
    }

    bool should_stop() const { return stale_ >= patience_; }
    double best() const { return best_; }
    int best_index() const { return best_index_; }
    int stale_epochs() const { return stale_; }
    int observed() const { return count_; }

private:
    int patience_;
    double min_delta_;
    Goal goal_;
    double best_ = std::numeric_limits<double>::quiet_NaN();
    int best_index_ = -1;
    int stale_ = 0;
    int count_ = 0;
};

}  // namespace decgnn
