#include "bsdelab/config.hpp"

#include <fstream>
#include <sstream>

namespace bsdelab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.entries_.count(key))
            throw ConfigError("config: duplicate key '" + key + "'");
        cfg.entries_[key] = value;
    }
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

std::string RunConfig::get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: " + v);
    }
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int RunConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        const int i = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an integer: " + v);
    }
}

int RunConfig::get_int(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    try {
        std::size_t pos = 0;
        const unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(u);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an unsigned integer: " + v);
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: " + v);
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    std::istringstream in(get_string(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' has a non-numeric entry: " + item);
        }
    }
    if (out.empty()) throw ConfigError("config: key '" + key + "' must list values");
    return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (double d : get_double_list(key)) out.push_back(static_cast<int>(d));
    return out;
}

void RunConfig::validate_keys(const std::set<std::string>& allowed) const {
    std::string bad;
    for (const auto& [key, value] : entries_)
        if (!allowed.count(key)) bad += (bad.empty() ? "" : ", ") + key;
    if (!bad.empty()) throw ConfigError("config: unknown keys: " + bad);
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    for (const auto& [key, value] : entries_) out << key << " = " << value << "\n";
    return out.str();
}

}  // namespace bsdelab
