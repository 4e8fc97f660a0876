#pragma once

// Option registry shared by every subcommand: each setting is both a
// command-line flag and a key of the JSON config file. Flags override the
// file; keys that no flag declares are rejected.

#include <CLI11.hpp>

#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "stc/io.hpp"

namespace stc::cli {

// Reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class T>
T config_value(const io::Json& j, const std::string& key) {
  auto bad = [&](const char* expected) {
    return UsageError("config key '" + key + "' must be " + expected);
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) throw bad("a boolean");
    return j.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) throw bad("an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (j.is_number_unsigned()) return j.get<T>();
      if (j.get<long long>() < 0) throw bad("a non-negative integer");
    }
    return j.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) throw bad("a number");
    return j.get<T>();
  } else {
    if (!j.is_string()) throw bad("a string");
    return j.get<std::string>();
  }
}

class Registry {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& key, T& value,
                   const std::string& help) {
    CLI::Option* opt =
        app->add_option("--" + key, value, help)->capture_default_str();
    bindings_.push_back({app, key, opt, [&value, key](const io::Json& j) {
                           value = config_value<T>(j, key);
                         }});
    return opt;
  }

  // Applies `config` for subcommand `sub`: keys of `sub` and of the root
  // app are accepted.
  void apply(const io::Json& config, const CLI::App* root,
             const CLI::App* sub) const {
    if (!config.is_object())
      throw UsageError("config file must contain a JSON object");
    for (const auto& [key, value] : config.items()) {
      const Binding* b = nullptr;
      for (const Binding& cand : bindings_)
        if (cand.key == key && (cand.app == sub || cand.app == root)) b = &cand;
      if (!b)
        throw UsageError("unknown config key '" + key + "' for " +
                         sub->get_name());
      if (b->option->count() == 0) b->set(value);
    }
  }

 private:
  struct Binding {
    const CLI::App* app;
    std::string key;
    CLI::Option* option;
    std::function<void(const io::Json&)> set;
  };
  std::vector<Binding> bindings_;
};

}  // namespace stc::cli
