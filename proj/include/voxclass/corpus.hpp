#pragma once

// Labelled voice corpora and the line-oriented manifest that describes them.
//
// Manifest format, version 1 (UTF-8 text, one record per line):
//
//   # voxclass-manifest 1
//   # config: {...}                       optional, JSON provenance
//   subject_id,gender,choral,scale,path,seed
//   subj001,M,S,do,subj001/do.wav,1234567890
//
// gender is M/F, choral is S (choir singer) or N, scale is one of
// do re mi fa so la ti do2, path is relative to the manifest's directory and
// seed may be empty for real recordings. Other lines starting with '#' are
// comments. A subject may have several takes of the same scale.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "audio.hpp"
#include "error.hpp"
#include "tasks.hpp"

namespace voxclass {

inline constexpr int kManifestVersion = 1;

struct Take {
    std::size_t scale = 0;
    std::string path;  // relative to the manifest directory
    std::optional<std::uint64_t> seed;
    AudioSignal audio;
};

struct Subject {
    std::string id;
    Gender gender = Gender::male;
    Choral choral = Choral::singer;
    std::vector<Take> takes;

    int label(Task task, std::size_t scale) const {
        switch (task) {
            case Task::scale: return static_cast<int>(scale);
            case Task::gender: return static_cast<int>(gender);
            case Task::choral: return static_cast<int>(choral);
            case Task::joint: return joint_index(gender, choral);
        }
        return 0;
    }
};

struct Corpus {
    std::vector<Subject> subjects;
    std::string provenance;  // JSON, echoed into the manifest

    std::size_t take_count() const {
        std::size_t n = 0;
        for (const auto& s : subjects)
            n += s.takes.size();
        return n;
    }
};

struct ManifestRecord {
    std::string subject_id;
    Gender gender = Gender::male;
    Choral choral = Choral::singer;
    std::size_t scale = 0;
    std::string path;
    std::optional<std::uint64_t> seed;
};

struct Manifest {
    std::vector<ManifestRecord> records;
    std::string provenance;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    return s;
}

}  // namespace detail

inline Manifest parse_manifest(std::istream& in) {
    Manifest m;
    std::string line;
    bool saw_version = false, saw_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = detail::trim(line);
        if (text.empty())
            continue;
        if (text.front() == '#') {
            constexpr std::string_view version_tag = "# voxclass-manifest ";
            constexpr std::string_view config_tag = "# config: ";
            if (text.starts_with(version_tag)) {
                const std::string v(text.substr(version_tag.size()));
                if (v != std::to_string(kManifestVersion))
                    throw FormatError("unsupported manifest version " + v);
                saw_version = true;
            } else if (text.starts_with(config_tag)) {
                m.provenance = std::string(text.substr(config_tag.size()));
            }
            continue;
        }
        if (!saw_header) {
            if (text != "subject_id,gender,choral,scale,path,seed")
                throw FormatError("manifest line " + std::to_string(line_no) + ": expected column header");
            saw_header = true;
            continue;
        }
        const auto fields = detail::split_csv_line(text);
        if (fields.size() != 6)
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected 6 fields");
        ManifestRecord r;
        try {
            r.subject_id = fields[0];
            r.gender = parse_gender(fields[1]);
            r.choral = parse_choral(fields[2]);
            r.scale = parse_scale(fields[3]);
            r.path = fields[4];
            if (!fields[5].empty()) {
                std::size_t used = 0;
                r.seed = std::stoull(fields[5], &used);
                if (used != fields[5].size())
                    throw FormatError("bad seed");
            }
        } catch (const FormatError& e) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        } catch (const std::exception&) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": bad seed");
        }
        if (r.subject_id.empty() || r.path.empty())
            throw FormatError("manifest line " + std::to_string(line_no) + ": empty subject or path");
        m.records.push_back(std::move(r));
    }
    if (!saw_version)
        throw FormatError("missing '# voxclass-manifest 1' line");
    if (!saw_header)
        throw FormatError("missing manifest column header");
    return m;
}

inline void write_manifest(std::ostream& out, const Manifest& m) {
    out << "# voxclass-manifest " << kManifestVersion << '\n';
    if (!m.provenance.empty())
        out << "# config: " << m.provenance << '\n';
    out << "subject_id,gender,choral,scale,path,seed\n";
    for (const auto& r : m.records) {
        out << r.subject_id << ',' << gender_code(r.gender) << ',' << choral_code(r.choral) << ','
            << kScaleNames[r.scale] << ',' << r.path << ',';
        if (r.seed)
            out << *r.seed;
        out << '\n';
    }
}

inline Manifest manifest_of(const Corpus& corpus) {
    Manifest m;
    m.provenance = corpus.provenance;
    for (const auto& s : corpus.subjects)
        for (const auto& t : s.takes)
            m.records.push_back({s.id, s.gender, s.choral, t.scale, t.path, t.seed});
    return m;
}

/// Group manifest records into subjects (first-appearance order) and
/// optionally decode every referenced WAV relative to `base_dir`.
inline Corpus corpus_from_manifest(const Manifest& m, const std::filesystem::path& base_dir, bool load_audio = true) {
    Corpus corpus;
    corpus.provenance = m.provenance;
    std::map<std::string, std::size_t> index;
    for (const auto& r : m.records) {
        auto [it, inserted] = index.try_emplace(r.subject_id, corpus.subjects.size());
        if (inserted) {
            Subject s;
            s.id = r.subject_id;
            s.gender = r.gender;
            s.choral = r.choral;
            corpus.subjects.push_back(std::move(s));
        }
        Subject& s = corpus.subjects[it->second];
        if (s.gender != r.gender || s.choral != r.choral)
            throw FormatError("subject " + r.subject_id + " has conflicting labels");
        Take t;
        t.scale = r.scale;
        t.path = r.path;
        t.seed = r.seed;
        if (load_audio)
            t.audio = read_wav(base_dir / r.path);
        s.takes.push_back(std::move(t));
    }
    return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& manifest_path, bool load_audio = true) {
    std::ifstream in(manifest_path);
    if (!in)
        throw IoError("cannot open manifest " + manifest_path.string());
    const Manifest m = parse_manifest(in);
    if (m.records.empty())
        throw FormatError("manifest " + manifest_path.string() + " lists no recordings");
    return corpus_from_manifest(m, manifest_path.parent_path(), load_audio);
}

/// Write every take as a WAV under `dir` and the manifest as dir/manifest.csv.
inline std::filesystem::path write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
    std::error_code ec;
    if (!std::filesystem::exists(dir.parent_path().empty() ? std::filesystem::path(".") : dir.parent_path()))
        throw IoError("parent directory of " + dir.string() + " does not exist");
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& s : corpus.subjects) {
        for (const auto& t : s.takes) {
            const auto path = dir / t.path;
            std::filesystem::create_directories(path.parent_path(), ec);
            if (ec)
                throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
            write_wav(path, t.audio);
        }
    }
    const auto manifest_path = dir / "manifest.csv";
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + manifest_path.string());
    write_manifest(out, manifest_of(corpus));
    if (!out)
        throw IoError("short write to " + manifest_path.string());
    return manifest_path;
}

}  // namespace voxclass
