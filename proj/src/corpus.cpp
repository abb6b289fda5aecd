#include "blockbuild/corpus.hpp"

#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace blockbuild {

using nlohmann::json;

Speaker parse_speaker(const std::string& s) {
    if (s == "architect") return Speaker::Architect;
    if (s == "builder") return Speaker::Builder;
    throw MalformedRecord("unknown speaker \"" + s + "\"");
}

const char* speaker_name(Speaker s) {
    return s == Speaker::Architect ? "architect" : "builder";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "valid") return Split::Valid;
    if (s == "test") return Split::Test;
    throw MalformedRecord("unknown split \"" + s + "\"");
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

std::string normalize_text(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    auto push = [&](char c) {
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    };
    for (unsigned char uc : raw) {
        if (std::isspace(uc)) {
            pending_space = true;
        } else if (std::ispunct(uc)) {
            pending_space = true;
            push(static_cast<char>(uc));
            pending_space = true;
        } else {
            push(static_cast<char>(std::tolower(uc)));
        }
    }
    return out;
}

namespace {

// json access with line/field diagnostics
const json& field(const json& j, const char* name, int line) {
    auto it = j.find(name);
    if (it == j.end()) {
        throw MalformedRecord("line " + std::to_string(line) + ": missing field \"" + name + "\"");
    }
    return *it;
}

int int_field(const json& j, const char* name, int line) {
    const json& f = field(j, name, line);
    if (!f.is_number_integer()) {
        throw MalformedRecord("line " + std::to_string(line) + ": field \"" + name +
                              "\" must be an integer");
    }
    return f.get<int>();
}

std::string str_field(const json& j, const char* name, int line) {
    const json& f = field(j, name, line);
    if (!f.is_string()) {
        throw MalformedRecord("line " + std::to_string(line) + ": field \"" + name +
                              "\" must be a string");
    }
    return f.get<std::string>();
}

Cell cell_fields(const json& j, int line) {
    return Cell{int_field(j, "x", line), int_field(j, "y", line), int_field(j, "z", line)};
}

Action parse_action(const json& j, int line) {
    const std::string type = str_field(j, "type", line);
    if (type == "place") {
        return Action::place(parse_color(str_field(j, "color", line)), cell_fields(j, line));
    }
    if (type == "remove") {
        return Action::remove(cell_fields(j, line));
    }
    throw MalformedRecord("line " + std::to_string(line) + ": unknown action type \"" + type + "\"");
}

Episode parse_episode(const json& j, const Dims& dims, int line) {
    Episode ep;
    ep.id = str_field(j, "id", line);
    ep.split = parse_split(str_field(j, "split", line));

    const json& dialogue = field(j, "dialogue", line);
    if (!dialogue.is_array()) {
        throw MalformedRecord("line " + std::to_string(line) + ": \"dialogue\" must be an array");
    }
    int turn = 0;
    for (const json& u : dialogue) {
        Utterance ut;
        ut.speaker = parse_speaker(str_field(u, "speaker", line));
        ut.text = normalize_text(str_field(u, "text", line));
        ut.turn_index = turn++;
        if (ut.text.empty()) {
            throw MalformedRecord("line " + std::to_string(line) + ": utterance " +
                                  std::to_string(ut.turn_index) + " is empty after normalization");
        }
        ep.dialogue.push_back(std::move(ut));
    }

    ep.initial_world = Grid(dims);
    const json& blocks = field(j, "initial_blocks", line);
    if (!blocks.is_array()) {
        throw MalformedRecord("line " + std::to_string(line) + ": \"initial_blocks\" must be an array");
    }
    for (const json& b : blocks) {
        const Cell c = cell_fields(b, line);
        if (!ep.initial_world.in_bounds(c)) {
            throw MalformedRecord("line " + std::to_string(line) + ": initial block " + to_string(c) +
                                  " out of bounds");
        }
        if (ep.initial_world.occupied(c)) {
            throw MalformedRecord("line " + std::to_string(line) + ": duplicate initial block at " +
                                  to_string(c));
        }
        ep.initial_world.set(c, parse_color(str_field(b, "color", line)));
    }

    const json& turns = field(j, "gold_turns", line);
    if (!turns.is_array()) {
        throw MalformedRecord("line " + std::to_string(line) + ": \"gold_turns\" must be an array");
    }
    int prev_turn = -1;
    for (const json& t : turns) {
        GoldTurn gt;
        gt.turn_index = int_field(t, "turn", line);
        if (gt.turn_index < 0 || gt.turn_index >= static_cast<int>(ep.dialogue.size())) {
            throw MalformedRecord("line " + std::to_string(line) + ": gold turn " +
                                  std::to_string(gt.turn_index) + " has no dialogue position");
        }
        if (gt.turn_index <= prev_turn) {
            throw MalformedRecord("line " + std::to_string(line) +
                                  ": gold turns must be strictly increasing");
        }
        prev_turn = gt.turn_index;
        const json& actions = field(t, "actions", line);
        if (!actions.is_array()) {
            throw MalformedRecord("line " + std::to_string(line) + ": \"actions\" must be an array");
        }
        for (const json& a : actions) gt.actions.push_back(parse_action(a, line));
        ep.gold_turns.push_back(std::move(gt));
    }

    // Gold feasibility: the concatenated gold sequence must replay cleanly.
    Grid g = ep.initial_world;
    for (const GoldTurn& gt : ep.gold_turns) {
        for (std::size_t i = 0; i < gt.actions.size(); ++i) {
            try {
                g = apply(g, gt.actions[i]);
            } catch (const DataError& e) {
                throw InfeasibleGoldAction("episode " + ep.id + ", turn " +
                                           std::to_string(gt.turn_index) + ", step " +
                                           std::to_string(i) + ": " + e.what());
            }
        }
    }
    return ep;
}

std::vector<Episode> load_impl(const std::filesystem::path& path, const Split* split,
                               const Dims& dims, bool lenient) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file " + path.string());

    std::vector<Episode> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line, nullptr, true);
            if (!j.is_object()) {
                throw MalformedRecord("line " + std::to_string(line_no) + ": record is not an object");
            }
            Episode ep = parse_episode(j, dims, line_no);
            if (split == nullptr || ep.split == *split) out.push_back(std::move(ep));
        } catch (const json::parse_error& e) {
            if (!lenient) {
                throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
            }
            std::cerr << "warning: skipping unparseable record at line " << line_no << "\n";
        } catch (const DataError& e) {
            if (!lenient) throw;
            std::cerr << "warning: skipping episode at line " << line_no << ": " << e.what() << "\n";
        }
    }
    return out;
}

json action_json(const Action& a) {
    json j;
    if (a.kind == ActionKind::Place) {
        j["type"] = "place";
        j["x"] = a.cell.x;
        j["y"] = a.cell.y;
        j["z"] = a.cell.z;
        j["color"] = color_name(a.color);
    } else {
        j["type"] = "remove";
        j["x"] = a.cell.x;
        j["y"] = a.cell.y;
        j["z"] = a.cell.z;
    }
    return j;
}

} // namespace

std::vector<Episode> load_corpus(const std::filesystem::path& path, Split split, const Dims& dims,
                                 bool lenient) {
    return load_impl(path, &split, dims, lenient);
}

std::vector<Episode> load_corpus_all(const std::filesystem::path& path, const Dims& dims,
                                     bool lenient) {
    return load_impl(path, nullptr, dims, lenient);
}

void save_corpus(const std::vector<Episode>& episodes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write corpus file " + path.string());
    for (const Episode& ep : episodes) {
        json j;
        j["id"] = ep.id;
        j["split"] = split_name(ep.split);
        json dialogue = json::array();
        for (const Utterance& u : ep.dialogue) {
            dialogue.push_back({{"speaker", speaker_name(u.speaker)}, {"text", u.text}});
        }
        j["dialogue"] = std::move(dialogue);
        json blocks = json::array();
        for (const auto& [cell, color] : ep.initial_world.blocks()) {
            blocks.push_back({{"x", cell.x}, {"y", cell.y}, {"z", cell.z}, {"color", color_name(color)}});
        }
        j["initial_blocks"] = std::move(blocks);
        json turns = json::array();
        for (const GoldTurn& gt : ep.gold_turns) {
            json actions = json::array();
            for (const Action& a : gt.actions) actions.push_back(action_json(a));
            turns.push_back({{"turn", gt.turn_index}, {"actions", std::move(actions)}});
        }
        j["gold_turns"] = std::move(turns);
        out << j.dump() << "\n";
    }
}

std::vector<std::string> extract_mlm_texts(const std::vector<Episode>& episodes) {
    std::vector<std::string> out;
    for (const Episode& ep : episodes) {
        for (const Utterance& u : ep.dialogue) out.push_back(u.text);
    }
    return out;
}

} // namespace blockbuild
