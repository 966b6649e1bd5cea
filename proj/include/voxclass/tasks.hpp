#pragma once

// Classification tasks and their label sets.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace voxclass {

enum class Task { scale, gender, choral, joint };

enum class Gender { male = 0, female = 1 };
enum class Choral { singer = 0, non_singer = 1 };

inline constexpr std::size_t kScaleCount = 8;

inline constexpr std::array<std::string_view, kScaleCount> kScaleNames = {"do", "re", "mi", "fa",
                                                                          "so", "la", "ti", "do2"};

inline std::string_view to_string(Task t) {
    switch (t) {
        case Task::scale: return "scale";
        case Task::gender: return "gender";
        case Task::choral: return "choral";
        case Task::joint: return "joint";
    }
    return "?";
}

inline Task parse_task(std::string_view s) {
    if (s == "scale") return Task::scale;
    if (s == "gender") return Task::gender;
    if (s == "choral") return Task::choral;
    if (s == "joint") return Task::joint;
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

inline std::string_view gender_code(Gender g) { return g == Gender::male ? "M" : "F"; }
inline std::string_view choral_code(Choral c) { return c == Choral::singer ? "S" : "N"; }

inline Gender parse_gender(std::string_view s) {
    if (s == "M") return Gender::male;
    if (s == "F") return Gender::female;
    throw FormatError("bad gender code '" + std::string(s) + "'");
}

inline Choral parse_choral(std::string_view s) {
    if (s == "S") return Choral::singer;
    if (s == "N") return Choral::non_singer;
    throw FormatError("bad choral code '" + std::string(s) + "'");
}

inline std::size_t parse_scale(std::string_view s) {
    for (std::size_t i = 0; i < kScaleCount; ++i)
        if (kScaleNames[i] == s)
            return i;
    throw FormatError("bad scale name '" + std::string(s) + "'");
}

/// Joint label index: gender-major, so 0=MS 1=MN 2=FS 3=FN.
inline constexpr int joint_index(Gender g, Choral c) { return static_cast<int>(g) * 2 + static_cast<int>(c); }

inline std::vector<std::string> task_labels(Task t) {
    switch (t) {
        case Task::scale: return {kScaleNames.begin(), kScaleNames.end()};
        case Task::gender: return {"M", "F"};
        case Task::choral: return {"S", "N"};
        case Task::joint: return {"MS", "MN", "FS", "FN"};
    }
    return {};
}

inline std::size_t task_cardinality(Task t) { return task_labels(t).size(); }

struct ClassLabel {
    Task task = Task::gender;
    int value = 0;

    bool operator==(const ClassLabel&) const = default;
};

}  // namespace voxclass
