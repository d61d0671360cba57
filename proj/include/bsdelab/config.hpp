#ifndef BSDELAB_CONFIG_HPP
#define BSDELAB_CONFIG_HPP

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsdelab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat typed key-value text: one `key = value` per line, dotted keys,
// '#' comments. Unknown keys are rejected against the experiment schema.
class RunConfig {
public:
    static RunConfig parse_string(const std::string& text);
    static RunConfig parse_file(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }

    // throws ConfigError listing every key outside the allowed set
    void validate_keys(const std::set<std::string>& allowed) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

    // canonical text form (sorted keys), the determinism anchor for run ids
    std::string canonical() const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace bsdelab

#endif
