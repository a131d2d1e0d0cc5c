#pragma once

#include <fstream>
#include <json.hpp>
#include <string>

#include "treechar/character.hpp"
#include "treechar/config.hpp"
#include "treechar/elements.hpp"
#include "treechar/linalg.hpp"

namespace treechar {

using Json = nlohmann::ordered_json;

inline Json config_stamp(const RunConfig& cfg) {
    return Json{{"config_hash", cfg.hash()},
                {"seed", cfg.seed},
                {"p", cfg.p},
                {"model", cfg.model},
                {"level", cfg.level},
                {"window", cfg.window},
                {"precision", cfg.precision}};
}

inline Json json_class(const ElementClass& cls) {
    Json j{{"tag", tag_str(cls.tag)},
           {"translation_length", cls.translation_length.get_str()},
           {"barycentric", cls.barycentric},
           {"empirical_agreement", cls.empirical_agreement}};
    if (cls.fixed_depth) j["fixed_depth"] = *cls.fixed_depth;
    return j;
}

inline Json json_scan(const ScanTable& t) {
    Json cells = Json::array();
    for (const auto& c : t.cells)
        cells.push_back(Json{{"e", c.e}, {"r", c.r}, {"value", c.value.get_str()}});
    Json j{{"cells", cells}};
    if (t.e_frontier) j["e_frontier"] = *t.e_frontier;
    if (t.r_frontier) j["r_frontier"] = *t.r_frontier;
    if (t.plateau) j["plateau"] = t.plateau->get_str();
    return j;
}

inline std::string scan_csv(const ScanTable& t) {
    std::string out = "e,r,value\n";
    for (const auto& c : t.cells)
        out += std::to_string(c.e) + "," + std::to_string(c.r) + "," + c.value.get_str() + "\n";
    return out;
}

inline Json json_report(const CharacterReport& rep) {
    Json contributions = Json::array();
    for (const auto& [f, v] : rep.contributions)
        contributions.push_back(Json{{"facet", f}, {"value", v.get_str()}});
    return Json{{"element", rep.element},
                {"classification", json_class(rep.cls)},
                {"model", rep.model},
                {"e", rep.e},
                {"r", rep.r},
                {"window", rep.window_radius},
                {"fixed_facet_sum", rep.fixed_facet_value.get_str()},
                {"hopf_trace", rep.hopf_value.get_str()},
                {"fiber_trace", rep.fiber_value.get_str()},
                {"three_way_agreement", rep.three_way_agreement},
                {"contributions", contributions},
                {"scan", json_scan(rep.scan)}};
}

// Chain dump: JSON keyed by canonical facet forms, values are the fiber
// coordinates of the chain at that facet.
inline Json json_chain(const ChainSpace& cs, const Chain& c) {
    Json j = Json::object();
    if (c.degree == 0) {
        for (std::size_t vi = 0; vi < cs.verts().size(); ++vi) {
            Json coords = Json::array();
            bool nonzero = false;
            for (std::size_t k = 0; k < cs.fiber_dim(cs.vfiber(static_cast<int>(vi))); ++k) {
                const Rat& x = c.coords[cs.voff(static_cast<int>(vi)) + k];
                coords.push_back(x.get_str());
                nonzero = nonzero || x != 0;
            }
            if (nonzero) j[cs.verts()[vi].str()] = coords;
        }
    } else {
        for (std::size_t ei = 0; ei < cs.edges().size(); ++ei) {
            Json coords = Json::array();
            bool nonzero = false;
            for (std::size_t k = 0; k < cs.fiber_dim(cs.efiber(static_cast<int>(ei))); ++k) {
                const Rat& x = c.coords[cs.eoff(static_cast<int>(ei)) + k];
                coords.push_back(x.get_str());
                nonzero = nonzero || x != 0;
            }
            if (nonzero) j[cs.edges()[ei].str()] = coords;
        }
    }
    return j;
}

// Fiber dimensions per facet at the given depth.
inline Json json_fiber_dims(const ChainSpace& cs) {
    Json j = Json::object();
    for (std::size_t vi = 0; vi < cs.verts().size(); ++vi)
        j[cs.verts()[vi].str()] = cs.fiber_dim(cs.vfiber(static_cast<int>(vi)));
    for (std::size_t ei = 0; ei < cs.edges().size(); ++ei)
        j[cs.edges()[ei].str()] = cs.fiber_dim(cs.efiber(static_cast<int>(ei)));
    return j;
}

// Sparse triplet text: one "row col num/den" line per nonzero entry.
inline std::string triplet_dump(const QMat& m) {
    std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (m.at(i, j) != 0)
                out += std::to_string(i) + " " + std::to_string(j) + " " +
                       m.at(i, j).get_num().get_str() + "/" + m.at(i, j).get_den().get_str() +
                       "\n";
    return out;
}

// Dense rational text: "rows cols" then row-major "num/den" entries.
inline std::string dense_dump(const QMat& m) {
    std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += " ";
            out += m.at(i, j).get_num().get_str() + "/" + m.at(i, j).get_den().get_str();
        }
        out += "\n";
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
}

}  // namespace treechar
