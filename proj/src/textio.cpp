#include "gaitnirs/textio.hpp"
#include "gaitnirs/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace gaitnirs {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_int(long long v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
    double v = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw DataError("bad number '" + s + "' in " + context);
    return v;
}

long long parse_int(const std::string& s, const std::string& context) {
    long long v = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw DataError("bad integer '" + s + "' in " + context);
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_text_file(const std::filesystem::path& file, const std::string& content) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file.string());
    out << content;
    if (!out) throw DataError("write failed for " + file.string());
}

std::string read_text_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

} // namespace

ConfigFile ConfigFile::parse_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), file.string());
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            cfg.sections[section]; // record even if empty
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.sections[section][key] = value;
    }
    return cfg;
}

bool ConfigFile::has_section(const std::string& section) const {
    return sections.count(section) > 0;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto it = sections.find(section);
    return it != sections.end() && it->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto it = sections.find(section);
    if (it == sections.end()) return fallback;
    auto kt = it->second.find(key);
    return kt == it->second.end() ? fallback : kt->second;
}

double ConfigFile::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return parse_double(get(section, key, ""), "[" + section + "] " + key);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

long long ConfigFile::get_int(const std::string& section, const std::string& key, long long fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return parse_int(get(section, key, ""), "[" + section + "] " + key);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key, "");
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean '" + v + "' for [" + section + "] " + key);
}

void ConfigFile::check_keys(const std::string& section, const std::vector<std::string>& allowed) const {
    auto it = sections.find(section);
    if (it == sections.end()) return;
    for (const auto& [key, value] : it->second) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    }
}

uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace gaitnirs
