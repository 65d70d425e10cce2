#pragma once
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gaitnirs {

// Shortest decimal form that round-trips the exact double (std::to_chars).
std::string fmt_double(double v);
std::string fmt_int(long long v);

double parse_double(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

std::vector<std::string> split_csv(const std::string& line);
std::vector<std::string> read_lines(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file, const std::string& content);
std::string read_text_file(const std::filesystem::path& file);

// Line-oriented `key = value` config with [section] headers and # comments.
class ConfigFile {
  public:
    static ConfigFile parse_file(const std::filesystem::path& file);
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key, long long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    // Rejects keys outside `allowed` within a known section (typo guard).
    void check_keys(const std::string& section, const std::vector<std::string>& allowed) const;

    std::map<std::string, std::map<std::string, std::string>> sections;
};

uint64_t fnv1a64(const std::string& data);

} // namespace gaitnirs
