#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thermo/error.hpp"
#include "thermo/text_util.hpp"

namespace thermo {

/// One `[name]` block of a key=value document. Keys before the first header
/// land in a section with an empty name. Sections may repeat.
struct KvSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    std::optional<std::string> get(std::string_view key) const {
        for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
            if (it->first == key) return it->second;
        }
        return std::nullopt;
    }

    std::vector<std::string> get_all(std::string_view key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries) {
            if (k == key) out.push_back(v);
        }
        return out;
    }

    double get_double(std::string_view key, double fallback) const {
        const auto v = get(key);
        if (!v) return fallback;
        const auto d = text::to_double(*v);
        if (!d) fail_data("[" + name + "] " + std::string(key) + ": not a number '" + *v + "'");
        return *d;
    }

    long long get_int(std::string_view key, long long fallback) const {
        const auto v = get(key);
        if (!v) return fallback;
        const auto i = text::to_int(*v);
        if (!i) fail_data("[" + name + "] " + std::string(key) + ": not an integer '" + *v + "'");
        return *i;
    }

    /// Comma-separated list of numbers.
    std::vector<double> get_doubles(std::string_view key) const {
        std::vector<double> out;
        const auto v = get(key);
        if (!v) return out;
        for (auto tok : text::split(*v, ',')) {
            const auto d = text::to_double(tok);
            if (!d) fail_data("[" + name + "] " + std::string(key) + ": not a number '" + std::string(tok) + "'");
            out.push_back(*d);
        }
        return out;
    }
};

struct KvDocument {
    std::vector<KvSection> sections;

    const KvSection* find(std::string_view name) const {
        for (const auto& s : sections) {
            if (s.name == name) return &s;
        }
        return nullptr;
    }

    std::vector<const KvSection*> find_all(std::string_view name) const {
        std::vector<const KvSection*> out;
        for (const auto& s : sections) {
            if (s.name == name) out.push_back(&s);
        }
        return out;
    }
};

/// `#` and `;` start comment lines.
inline KvDocument parse_kv(std::string_view body) {
    KvDocument doc;
    doc.sections.push_back({"", {}});
    int lineno = 0;
    for (const auto& raw : text::lines(body)) {
        ++lineno;
        const auto line = text::trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail_data("line " + std::to_string(lineno) + ": unterminated section header");
            doc.sections.push_back({std::string(text::trim(line.substr(1, line.size() - 2))), {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail_data("line " + std::to_string(lineno) + ": expected key=value");
        doc.sections.back().entries.emplace_back(std::string(text::trim(line.substr(0, eq))),
                                                 std::string(text::trim(line.substr(eq + 1))));
    }
    if (doc.sections.front().entries.empty() && doc.sections.size() > 1) doc.sections.erase(doc.sections.begin());
    return doc;
}

}  // namespace thermo
