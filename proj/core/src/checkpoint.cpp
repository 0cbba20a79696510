#include "gnnpower/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gnnpower/errors.hpp"

namespace gnnpower {

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

constexpr const char* kParamsHeader = "gnnpower-params v1";
constexpr const char* kModulesHeader = "gnnpower-modules v1";
constexpr const char* kAssignmentHeader = "gnnpower-assignment v1";

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    return in;
}

void write_vec(std::ostream& out, const Vec& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ' ';
        out << format_full(v[i]);
    }
}

struct KvLine {
    std::string key;
    std::string value;
};

/// Reads "key = value" lines, skipping blanks and '#' comments.
std::vector<KvLine> read_kv_lines(std::istream& in, const char* expected_header,
                                  const std::string& what) {
    std::string line;
    if (!std::getline(in, line) || line != expected_header)
        throw ParseError(what + ": missing or unknown header");
    std::vector<KvLine> lines;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(what + ": malformed line: " + line);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        lines.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return lines;
}

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ParseError(what + ": bad number: " + s);
    return v;
}

long parse_long(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ParseError(what + ": bad integer: " + s);
    return v;
}

Vec parse_vec(const std::string& s, const std::string& what) {
    Vec v;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) v.push_back(parse_double(tok, what));
    return v;
}

} // namespace

void save_params(const std::filesystem::path& path, const ReGnnParams& params,
                 const std::string& provenance) {
    params.validate();
    std::ofstream out = open_out(path);
    out << kParamsHeader << '\n';
    out << "layers = " << params.depth() << '\n';
    out << "taps = " << params.taps_per_layer() << '\n';
    out << "pmax = ";
    write_vec(out, params.pmax);
    out << '\n';
    for (int l = 0; l < params.depth(); ++l) {
        out << "layer" << l << " = ";
        write_vec(out, params.layers[l].taps);
        out << '\n';
    }
    out << "provenance = " << provenance << '\n';
}

ReGnnParams load_params(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    const auto lines = read_kv_lines(in, kParamsHeader, "params checkpoint");
    ReGnnParams p;
    long depth = -1, taps = -1;
    std::vector<Vec> layers;
    for (const auto& [key, value] : lines) {
        if (key == "layers") depth = parse_long(value, key);
        else if (key == "taps") taps = parse_long(value, key);
        else if (key == "pmax") p.pmax = parse_vec(value, key);
        else if (key.rfind("layer", 0) == 0) {
            const long idx = parse_long(key.substr(5), key);
            if (idx != static_cast<long>(layers.size()))
                throw ParseError("params checkpoint: layers out of order");
            layers.push_back(parse_vec(value, key));
        } else if (key == "provenance") {
            // informational only
        } else {
            throw ParseError("params checkpoint: unknown key: " + key);
        }
    }
    if (depth != static_cast<long>(layers.size()))
        throw ParseError("params checkpoint: layer count mismatch");
    for (const Vec& l : layers) {
        if (static_cast<long>(l.size()) != taps)
            throw ParseError("params checkpoint: tap count mismatch");
        p.layers.push_back(FilterTaps{l});
    }
    p.validate();
    return p;
}

void save_module_set(const std::filesystem::path& path, const ModuleSet& mods,
                     const std::string& provenance) {
    mods.validate();
    std::ofstream out = open_out(path);
    out << kModulesHeader << '\n';
    out << "modules = " << mods.size() << '\n';
    out << "taps = " << mods.taps_per_module() << '\n';
    out << "pmax = ";
    write_vec(out, mods.pmax);
    out << '\n';
    for (int i = 0; i < mods.size(); ++i) {
        out << "module" << i << " = ";
        write_vec(out, mods.modules[i].taps);
        out << '\n';
    }
    out << "provenance = " << provenance << '\n';
}

ModuleSet load_module_set(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    const auto lines = read_kv_lines(in, kModulesHeader, "module-set checkpoint");
    ModuleSet m;
    long count = -1, taps = -1;
    std::vector<Vec> modules;
    for (const auto& [key, value] : lines) {
        if (key == "modules") count = parse_long(value, key);
        else if (key == "taps") taps = parse_long(value, key);
        else if (key == "pmax") m.pmax = parse_vec(value, key);
        else if (key.rfind("module", 0) == 0) {
            const long idx = parse_long(key.substr(6), key);
            if (idx != static_cast<long>(modules.size()))
                throw ParseError("module-set checkpoint: modules out of order");
            modules.push_back(parse_vec(value, key));
        } else if (key == "provenance") {
        } else {
            throw ParseError("module-set checkpoint: unknown key: " + key);
        }
    }
    if (count != static_cast<long>(modules.size()))
        throw ParseError("module-set checkpoint: module count mismatch");
    for (const Vec& taps_v : modules) {
        if (static_cast<long>(taps_v.size()) != taps)
            throw ParseError("module-set checkpoint: tap count mismatch");
        m.modules.push_back(FilterTaps{taps_v});
    }
    m.validate();
    return m;
}

void save_assignment(const std::filesystem::path& path, const HardAssignment& s,
                     const std::string& provenance) {
    std::ofstream out = open_out(path);
    out << kAssignmentHeader << '\n';
    out << "layers = " << s.depth() << '\n';
    out << "assignment =";
    for (int idx : s.s) out << ' ' << idx;
    out << '\n';
    out << "provenance = " << provenance << '\n';
}

HardAssignment load_assignment(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    const auto lines = read_kv_lines(in, kAssignmentHeader, "assignment");
    HardAssignment s;
    long depth = -1;
    for (const auto& [key, value] : lines) {
        if (key == "layers") depth = parse_long(value, key);
        else if (key == "assignment") {
            std::istringstream iv(value);
            std::string tok;
            while (iv >> tok) s.s.push_back(static_cast<int>(parse_long(tok, key)));
        } else if (key == "provenance") {
        } else {
            throw ParseError("assignment: unknown key: " + key);
        }
    }
    if (depth != static_cast<long>(s.s.size()))
        throw ParseError("assignment: layer count mismatch");
    return s;
}

std::string checkpoint_kind(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::getline(in, line);
    if (line == kParamsHeader) return "params";
    if (line == kModulesHeader) return "modules";
    if (line == kAssignmentHeader) return "assignment";
    throw ParseError("unknown checkpoint header in " + path.string());
}

} // namespace gnnpower
