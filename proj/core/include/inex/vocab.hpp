#pragma once

#include <optional>
#include <string>
#include <vector>

namespace inex {

// Closed symbolic token vocabulary shared by the toy model, agents, and
// corpus generators. Token ids are stable: specials first, then categories,
// colors, actions.
struct Vocab {
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kYes = 2;
  static constexpr int kNo = 3;
  static constexpr int kQueryExists = 4;
  static constexpr int kQueryDescribe = 5;
  static constexpr int kSep = 6;
  static constexpr int kFeedback = 7;
  static constexpr int kNumSpecials = 8;

  std::vector<std::string> categories;
  std::vector<std::string> colors;
  std::vector<std::string> actions;

  int size() const {
    return kNumSpecials + static_cast<int>(categories.size() + colors.size() +
                                           actions.size());
  }

  int category_token(const std::string& name) const {
    return kNumSpecials + index_of(categories, name);
  }
  int color_token(const std::string& name) const {
    return kNumSpecials + static_cast<int>(categories.size()) +
           index_of(colors, name);
  }
  int action_token(const std::string& name) const {
    return kNumSpecials + static_cast<int>(categories.size() + colors.size()) +
           index_of(actions, name);
  }

  bool is_category(int id) const {
    return id >= kNumSpecials && id < kNumSpecials + static_cast<int>(categories.size());
  }
  bool is_color(int id) const {
    const int base = kNumSpecials + static_cast<int>(categories.size());
    return id >= base && id < base + static_cast<int>(colors.size());
  }
  bool is_action(int id) const {
    const int base = kNumSpecials + static_cast<int>(categories.size() + colors.size());
    return id >= base && id < base + static_cast<int>(actions.size());
  }

  const std::string& category_name(int id) const {
    return categories[id - kNumSpecials];
  }
  const std::string& color_name(int id) const {
    return colors[id - kNumSpecials - categories.size()];
  }
  const std::string& action_name(int id) const {
    return actions[id - kNumSpecials - categories.size() - colors.size()];
  }

  static Vocab standard() {
    Vocab v;
    v.categories = {"dog",   "cat",   "car",    "tree",  "person", "bird",
                    "chair", "table", "bottle", "horse", "boat",   "sheep"};
    v.colors = {"red", "blue", "green", "yellow", "black", "white"};
    v.actions = {"running", "sitting", "standing", "flying", "sleeping", "eating"};
    return v;
  }

 private:
  static int index_of(const std::vector<std::string>& xs, const std::string& name) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

}  // namespace inex
