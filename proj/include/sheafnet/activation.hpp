#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "sheafnet/error.hpp"

namespace sheafnet {

/// Topological facts about a coordinatewise activation R -> R, consumed by
/// the dataset-dependency classifier.
struct ActivationTraits {
  bool surjective = false;
  bool open = false;
  bool bijective = false;
  /// Closure of the image; infinite bounds mean unbounded.
  double range_lo = -std::numeric_limits<double>::infinity();
  double range_hi = std::numeric_limits<double>::infinity();
};

struct Activation {
  std::string name;
  std::function<double(double)> fn;
  ActivationTraits traits;

  double operator()(double x) const { return fn(x); }
};

/// Process-wide catalog of activations. Entries are never removed, so
/// pointers handed out stay valid for the life of the program.
class ActivationRegistry {
 public:
  static ActivationRegistry& instance() {
    static ActivationRegistry registry;
    return registry;
  }

  const Activation* find(std::string_view name) const {
    std::shared_lock lock(mutex_);
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }

  const Activation& get(std::string_view name) const {
    if (const auto* a = find(name)) return *a;
    throw InvalidInput("unregistered activation '" + std::string(name) + "'");
  }

  /// Registers a new activation; names are unique.
  const Activation& add(Activation a) {
    if (!a.fn) throw InvalidInput("activation '" + a.name + "' has no function");
    if (a.traits.bijective && !a.traits.surjective)
      throw InvalidInput("activation '" + a.name + "': bijective implies surjective");
    std::unique_lock lock(mutex_);
    if (index_.count(a.name)) throw InvalidInput("activation '" + a.name + "' already registered");
    storage_.push_back(std::move(a));
    const Activation* p = &storage_.back();
    index_.emplace(p->name, p);
    return *p;
  }

  std::vector<std::string> names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [n, _] : index_) out.push_back(n);
    return out;
  }

 private:
  ActivationRegistry() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    storage_.push_back({"identity", [](double x) { return x; }, {true, true, true, -inf, inf}});
    storage_.push_back({"relu", [](double x) { return x > 0.0 ? x : 0.0; }, {false, false, false, 0.0, inf}});
    storage_.push_back(
        {"sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, {false, true, false, 0.0, 1.0}});
    storage_.push_back({"tanh", [](double x) { return std::tanh(x); }, {false, true, false, -1.0, 1.0}});
    storage_.push_back({"sin", [](double x) { return std::sin(x); }, {false, false, false, -1.0, 1.0}});
    storage_.push_back({"cos", [](double x) { return std::cos(x); }, {false, false, false, -1.0, 1.0}});
    for (const auto& a : storage_) index_.emplace(a.name, &a);
  }

  mutable std::shared_mutex mutex_;
  std::deque<Activation> storage_;
  std::map<std::string, const Activation*, std::less<>> index_;
};

inline const Activation& activation(std::string_view name) { return ActivationRegistry::instance().get(name); }

}  // namespace sheafnet
