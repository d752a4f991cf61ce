#include "hyphy/config.hpp"

#include <fstream>
#include <sstream>

namespace hyphy {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    return from_string(buffer.str());
}

Config Config::from_string(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not `key = value`");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
        cfg.kv_[key] = value;
    }
    return cfg;
}

std::string Config::get_str(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("config: missing key " + key);
    return it->second;
}

double Config::get_double(const std::string& key) const {
    try {
        size_t pos = 0;
        const std::string v = get_str(key);
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config: key " + key + " is not a number");
    }
}

int Config::get_int(const std::string& key) const {
    const double v = get_double(key);
    const int i = static_cast<int>(std::llround(v));
    if (std::abs(v - i) > 1e-9) throw ConfigError("config: key " + key + " is not an integer");
    return i;
}

long Config::get_long(const std::string& key) const {
    const double v = get_double(key);
    return static_cast<long>(std::llround(v));
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key " + key + " is not a boolean");
}

std::vector<double> Config::get_list(const std::string& key) const {
    std::vector<double> out;
    std::istringstream is(get_str(key));
    std::string cell;
    while (std::getline(is, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw ConfigError("config: key " + key + " has a non-numeric list entry");
        }
    }
    if (out.empty()) throw ConfigError("config: key " + key + " is an empty list");
    return out;
}

std::vector<std::uint64_t> Config::get_seeds(const std::string& key) const {
    std::vector<std::uint64_t> seeds;
    for (double v : get_list(key)) {
        if (v < 0) throw ConfigError("config: negative seed in " + key);
        seeds.push_back(static_cast<std::uint64_t>(v));
    }
    return seeds;
}

std::string Config::serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    return os.str();
}

}  // namespace hyphy
