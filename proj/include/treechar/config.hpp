#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "treechar/coeff.hpp"
#include "treechar/errors.hpp"
#include "treechar/exact.hpp"
#include "treechar/tree.hpp"

namespace treechar {

// Flat key=value run configuration; flags override file entries. Every output
// embeds the config hash, the seed and the effective parameters.
struct RunConfig {
    long p = 2;
    int precision = 24;
    std::string model = "principal-series";
    long level = 2;
    std::string origin = "base";  // "base" or "edge" (the standard edge)
    long window = 4;
    long e_min = 0, e_max = 2;
    long r_min = 0, r_max = 3;
    unsigned long max_quotient = 200000;
    unsigned long max_facets = 2000000;
    std::string out_dir = ".";
    unsigned long seed = 12345;
    int workers = 1;

    static RunConfig from_file(const std::string& path) {
        RunConfig c;
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path);
        std::string line;
        while (std::getline(in, line)) {
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                while (!s.empty() && isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
                while (!s.empty() && isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
                return s;
            };
            c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return c;
    }

    void set(const std::string& key, const std::string& value) {
        try {
            if (key == "p") p = std::stol(value);
            else if (key == "precision") precision = std::stoi(value);
            else if (key == "model") model = value;
            else if (key == "level") level = std::stol(value);
            else if (key == "origin") origin = value;
            else if (key == "window") window = std::stol(value);
            else if (key == "e_min") e_min = std::stol(value);
            else if (key == "e_max") e_max = std::stol(value);
            else if (key == "r_min") r_min = std::stol(value);
            else if (key == "r_max") r_max = std::stol(value);
            else if (key == "max_quotient") max_quotient = std::stoul(value);
            else if (key == "max_facets") max_facets = std::stoul(value);
            else if (key == "out_dir") out_dir = value;
            else if (key == "seed") seed = std::stoul(value);
            else if (key == "workers") workers = std::stoi(value);
            else throw ConfigError("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw ConfigError("bad value for " + key + ": " + value);
        } catch (const std::out_of_range&) {
            throw ConfigError("out-of-range value for " + key + ": " + value);
        }
    }

    void validate() const {
        if (!(p == 2 || p == 3 || p == 5))
            throw ConfigError("p must be one of 2, 3, 5 at desk scale");
        if (precision < 4) throw ConfigError("precision must be >= 4");
        if (model != "trivial" && model != "principal-series")
            throw ConfigError("model must be trivial or principal-series");
        if (level < 1 || level > 4) throw ConfigError("level must be in [1, 4]");
        if (origin != "base" && origin != "edge") throw ConfigError("origin: base or edge");
        if (e_min < 0 || e_max < e_min) throw ConfigError("bad e-range");
        if (r_min < 0 || r_max < r_min) throw ConfigError("bad r-range");
        if (window < r_max + 1) throw ConfigError("window must exceed r_max");
        if (window > 6) throw ConfigError("window > 6 exceeds desk scale");
        if (max_quotient == 0 || max_facets == 0) throw ConfigError("budgets must be positive");
        if (workers < 1 || workers > 64) throw ConfigError("workers in [1, 64]");
    }

    Int prime() const { return Int(p); }

    Model model_obj() const {
        return model == "trivial" ? Model::trivial() : Model::principal_series(level);
    }

    Facet origin_facet() const {
        Int q(p);
        if (origin == "base") return Facet(base_vertex(q));
        return Facet(UEdge(base_vertex(q), Vertex{q, 0, 1, 0}));
    }

    std::string serialize() const {
        std::ostringstream os;
        os << "p=" << p << "\nprecision=" << precision << "\nmodel=" << model
           << "\nlevel=" << level << "\norigin=" << origin << "\nwindow=" << window
           << "\ne_min=" << e_min << "\ne_max=" << e_max << "\nr_min=" << r_min
           << "\nr_max=" << r_max << "\nmax_quotient=" << max_quotient
           << "\nmax_facets=" << max_facets << "\nseed=" << seed << "\nworkers=" << workers
           << "\n";
        return os.str();
    }

    std::string hash() const {
        // FNV-1a 64
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : serialize()) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        std::ostringstream os;
        os << std::hex << h;
        return os.str();
    }
};

// Parser for 2x2 group-element specs: "id", "diag(x,y)", "[[a,b],[c,d]]";
// entries are signed sums of rational-times-p-power terms, e.g.
// "1+p", "2*p^3", "p^-1", "3/2".
class ElementParser {
public:
    explicit ElementParser(Int p) : p_(std::move(p)) {}

    RatMat2 parse(const std::string& spec) const {
        std::string s;
        for (char c : spec)
            if (!isspace(static_cast<unsigned char>(c))) s.push_back(c);
        if (s == "id") return RatMat2::identity();
        if (s.rfind("diag(", 0) == 0 && s.back() == ')') {
            auto inner = s.substr(5, s.size() - 6);
            auto comma = split_top(inner);
            if (comma.size() != 2) throw ConfigError("diag needs two entries");
            return RatMat2{entry(comma[0]), 0, 0, entry(comma[1])};
        }
        if (s.rfind("[[", 0) == 0 && s.substr(s.size() - 2) == "]]") {
            auto inner = s.substr(2, s.size() - 4);  // a,b],[c,d
            auto rows = split_on(inner, "],[");
            if (rows.size() != 2) throw ConfigError("matrix needs two rows");
            auto r0 = split_top(rows[0]);
            auto r1 = split_top(rows[1]);
            if (r0.size() != 2 || r1.size() != 2) throw ConfigError("rows need two entries");
            return RatMat2{entry(r0[0]), entry(r0[1]), entry(r1[0]), entry(r1[1])};
        }
        throw ConfigError("cannot parse element spec: " + spec);
    }

private:
    static std::vector<std::string> split_on(const std::string& s, const std::string& sep) {
        std::vector<std::string> out;
        std::size_t pos = 0;
        for (;;) {
            auto next = s.find(sep, pos);
            if (next == std::string::npos) {
                out.push_back(s.substr(pos));
                break;
            }
            out.push_back(s.substr(pos, next - pos));
            pos = next + sep.size();
        }
        return out;
    }

    static std::vector<std::string> split_top(const std::string& s) {
        return split_on(s, ",");
    }

    // signed sum of terms
    Rat entry(const std::string& s) const {
        if (s.empty()) throw ConfigError("empty entry");
        Rat total = 0;
        std::size_t i = 0;
        while (i < s.size()) {
            int sign = 1;
            while (i < s.size() && (s[i] == '+' || s[i] == '-')) {
                if (s[i] == '-') sign = -sign;
                ++i;
            }
            std::size_t start = i;
            while (i < s.size() && s[i] != '+' && s[i] != '-') {
                // a '-' directly after '^' belongs to the exponent
                if (s[i] == '^' && i + 1 < s.size() && s[i + 1] == '-') ++i;
                ++i;
            }
            total += Rat(sign) * term(s.substr(start, i - start));
        }
        return total;
    }

    // term := rat ['*'? 'p' ['^' int]] | 'p' ['^' int]
    Rat term(const std::string& s) const {
        if (s.empty()) throw ConfigError("empty term");
        std::size_t ppos = s.find('p');
        Rat coeff = 1;
        if (ppos == std::string::npos) return rational(s);
        if (ppos > 0) {
            std::string c = s.substr(0, ppos);
            if (!c.empty() && c.back() == '*') c.pop_back();
            if (!c.empty()) coeff = rational(c);
        }
        long expo = 1;
        if (ppos + 1 < s.size()) {
            if (s[ppos + 1] != '^') throw ConfigError("bad p-power in term: " + s);
            expo = std::stol(s.substr(ppos + 2));
        }
        return coeff * pow_rat(p_, expo);
    }

    Rat rational(const std::string& s) const {
        auto slash = s.find('/');
        try {
            if (slash == std::string::npos) return Rat(Int(s));
            Rat r(Int(s.substr(0, slash)), Int(s.substr(slash + 1)));
            r.canonicalize();
            return r;
        } catch (const std::invalid_argument&) {
            throw ConfigError("bad rational: " + s);
        }
    }

    Int p_;
};

}  // namespace treechar
