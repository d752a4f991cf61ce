#pragma once

#include <map>
#include <string>
#include <vector>

#include "hyphy/common.hpp"

namespace hyphy {

/// Flat `key = value` configuration with dotted section keys.
/// Lines starting with '#' and blank lines are ignored.
class Config {
  public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get_str(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    long get_long(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;
    std::vector<std::uint64_t> get_seeds(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

    /// Sorted `key = value` lines; parseable by from_string.
    std::string serialize() const;

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace hyphy
