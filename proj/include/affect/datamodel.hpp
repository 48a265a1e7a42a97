#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "affect/config.hpp"
#include "affect/matrix.hpp"
#include "affect/metrics.hpp"

namespace affect {

constexpr int kOpenfaceDim = 43;  // gaze 2 + AU intensity 17 + AU occurrence 18 + head pose 6
constexpr int kFps = 30;

// One video frame's fused observation.
struct FrameRecord {
    std::string video_id;
    int frame_index = 0;
    bool valid = false;  // all declared feature blocks present
    Vec image_feature;
    Vec openface_feature;
    Vec audio_feature;
    std::optional<int> expression;  // 0..6
    std::optional<double> valence;
    std::optional<double> arousal;
};

// Ordered frames of one video; the unit of standardization and windowing.
struct SubjectSequence {
    std::string video_id;
    int fps = kFps;
    std::vector<FrameRecord> frames;
};

struct DatasetManifest {
    std::string image_features;
    std::string openface_features;
    std::string audio_features;  // optional
    std::string labels_expr;     // optional
    std::string labels_va;       // optional
    std::string image_dir;       // optional
    int d_img = 0;
    int d_aud = 0;
    int fps = kFps;

    void validate() const {
        if (image_features.empty() || openface_features.empty()) {
            throw std::runtime_error("manifest: image_features and openface_features are required");
        }
        if (d_img != 300 && d_img != 512) {
            throw std::runtime_error("manifest: d_img must be 300 or 512, got " +
                                     std::to_string(d_img));
        }
        if (!audio_features.empty() && d_aud <= 0) {
            throw std::runtime_error("manifest: d_aud must be positive when audio is declared");
        }
        if (fps != kFps) {
            throw std::runtime_error("manifest: fps must be 30, got " + std::to_string(fps));
        }
    }

    bool has_audio() const { return !audio_features.empty(); }

    static DatasetManifest load(const std::string& path) {
        IniFile ini = IniFile::parse_file(path);
        DatasetManifest m;
        const auto base = std::filesystem::path(path).parent_path();
        auto resolve = [&](const std::string& p) -> std::string {
            if (p.empty()) {
                return p;
            }
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (base / fp).string();
        };
        m.image_features = resolve(ini.get("data.image_features"));
        m.openface_features = resolve(ini.get("data.openface_features"));
        m.audio_features = resolve(ini.get("data.audio_features"));
        m.labels_expr = resolve(ini.get("data.labels_expr"));
        m.labels_va = resolve(ini.get("data.labels_va"));
        m.image_dir = resolve(ini.get("data.image_dir"));
        m.d_img = static_cast<int>(ini.get_int("data.d_img", 0));
        m.d_aud = static_cast<int>(ini.get_int("data.d_aud", 0));
        m.fps = static_cast<int>(ini.get_int("data.fps", kFps));
        m.validate();
        return m;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) {
            throw std::runtime_error(path + ": cannot open for writing");
        }
        out << "[data]\n";
        out << "image_features = " << image_features << "\n";
        out << "openface_features = " << openface_features << "\n";
        if (!audio_features.empty()) {
            out << "audio_features = " << audio_features << "\n";
        }
        if (!labels_expr.empty()) {
            out << "labels_expr = " << labels_expr << "\n";
        }
        if (!labels_va.empty()) {
            out << "labels_va = " << labels_va << "\n";
        }
        if (!image_dir.empty()) {
            out << "image_dir = " << image_dir << "\n";
        }
        out << "d_img = " << d_img << "\n";
        out << "d_aud = " << d_aud << "\n";
        out << "fps = " << fps << "\n";
    }
};

namespace detail {

inline void split_csv(const std::string& line, std::vector<std::string_view>& out) {
    out.clear();
    const char* begin = line.data();
    const char* end = begin + line.size();
    const char* field = begin;
    for (const char* p = begin; p != end; ++p) {
        if (*p == ',') {
            out.emplace_back(field, p - field);
            field = p + 1;
        }
    }
    std::size_t tail = end - field;
    // tolerate trailing \r from CRLF files
    if (tail > 0 && field[tail - 1] == '\r') {
        --tail;
    }
    out.emplace_back(field, tail);
}

inline double parse_double(std::string_view s, const std::string& path, int line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed number '" + std::string(s) + "'");
    }
    if (!std::isfinite(v)) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": non-finite value '" + std::string(s) + "'");
    }
    return v;
}

inline long parse_int(std::string_view s, const std::string& path, int line_no) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed integer '" + std::string(s) + "'");
    }
    return v;
}

using RecordMap = std::map<std::pair<std::string, int>, FrameRecord>;

inline FrameRecord& record_for(RecordMap& records, const std::string& video_id, int frame) {
    auto key = std::make_pair(video_id, frame);
    auto it = records.find(key);
    if (it == records.end()) {
        FrameRecord rec;
        rec.video_id = video_id;
        rec.frame_index = frame;
        it = records.emplace(std::move(key), std::move(rec)).first;
    }
    return it->second;
}

inline bool is_jsonl(const std::string& path) {
    return path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0;
}

// Stream descriptor: the value columns after the video_id,frame prefix.
struct StreamSchema {
    std::string stream_name;
    std::vector<std::string> columns;
    std::string extra_probe;  // field name that must NOT exist (JSONL dimension check)
};

inline StreamSchema feature_schema(const std::string& stream_name, const std::string& prefix,
                                   int dim) {
    StreamSchema s;
    s.stream_name = stream_name;
    s.columns.reserve(dim);
    for (int i = 0; i < dim; ++i) {
        s.columns.push_back(prefix + std::to_string(i));
    }
    s.extra_probe = prefix + std::to_string(dim);
    return s;
}

inline StreamSchema openface_schema() {
    StreamSchema s;
    s.stream_name = "openface_features";
    for (int i = 0; i < 2; ++i) {
        s.columns.push_back("gaze_" + std::to_string(i));
    }
    for (int i = 0; i < 17; ++i) {
        s.columns.push_back("au_int_" + std::to_string(i));
    }
    for (int i = 0; i < 18; ++i) {
        s.columns.push_back("au_occ_" + std::to_string(i));
    }
    for (int i = 0; i < 6; ++i) {
        s.columns.push_back("pose_" + std::to_string(i));
    }
    return s;
}

// Reads one stream file (CSV or JSONL) and hands each row's values to `sink`.
template <typename Sink>
void read_stream(const std::string& path, const StreamSchema& schema, Sink&& sink) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    const int dim = static_cast<int>(schema.columns.size());
    std::string line;
    int line_no = 0;
    Vec values(dim);
    if (is_jsonl(path)) {
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) {
                continue;
            }
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const std::exception& e) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": malformed JSON row: " + e.what());
            }
            if (!j.contains("video_id") || !j.contains("frame")) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": row lacks video_id/frame");
            }
            for (int c = 0; c < dim; ++c) {
                const auto& name = schema.columns[c];
                if (!j.contains(name)) {
                    throw std::runtime_error(schema.stream_name + " " + path + ":" +
                                             std::to_string(line_no) +
                                             ": dimension mismatch: missing field '" + name + "'");
                }
                double v = j[name].get<double>();
                if (!std::isfinite(v)) {
                    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                             ": non-finite value in '" + name + "'");
                }
                values[c] = v;
            }
            if (!schema.extra_probe.empty() && j.contains(schema.extra_probe)) {
                throw std::runtime_error(schema.stream_name + " " + path + ":" +
                                         std::to_string(line_no) +
                                         ": dimension mismatch: more fields than declared " +
                                         std::to_string(dim));
            }
            sink(j["video_id"].get<std::string>(),
                 static_cast<int>(j["frame"].get<long>()), values, line_no);
        }
        return;
    }
    // CSV: validate exact header first
    if (!std::getline(in, line)) {
        throw std::runtime_error(path + ": empty file");
    }
    ++line_no;
    {
        std::string expected = "video_id,frame";
        for (const auto& c : schema.columns) {
            expected += "," + c;
        }
        std::string got = line;
        if (!got.empty() && got.back() == '\r') {
            got.pop_back();
        }
        if (got != expected) {
            std::vector<std::string_view> fields;
            split_csv(got, fields);
            const int got_dim = static_cast<int>(fields.size()) - 2;
            if (got_dim != dim) {
                throw std::runtime_error(schema.stream_name + " " + path +
                                         ": dimension mismatch: expected " + std::to_string(dim) +
                                         " value columns, found " + std::to_string(got_dim));
            }
            throw std::runtime_error(path + ":1: unexpected header");
        }
    }
    std::vector<std::string_view> fields;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        split_csv(line, fields);
        if (static_cast<int>(fields.size()) != dim + 2) {
            const int got_dim = static_cast<int>(fields.size()) - 2;
            throw std::runtime_error(schema.stream_name + " " + path + ":" +
                                     std::to_string(line_no) +
                                     ": dimension mismatch: expected " + std::to_string(dim) +
                                     " values, found " + std::to_string(got_dim));
        }
        const std::string video_id(fields[0]);
        if (video_id.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty video_id");
        }
        const long frame = parse_int(fields[1], path, line_no);
        if (frame < 0) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": negative frame index");
        }
        for (int c = 0; c < dim; ++c) {
            values[c] = parse_double(fields[c + 2], path, line_no);
        }
        sink(video_id, static_cast<int>(frame), values, line_no);
    }
}

}  // namespace detail

// Ingest all declared streams and join them on (video_id, frame). A frame is
// valid when every declared feature stream has a row for it; frames seen only
// in label streams stay invalid.
inline std::vector<FrameRecord> load_streams(const DatasetManifest& manifest) {
    manifest.validate();
    detail::RecordMap records;

    auto guard_duplicate = [](bool already, const std::string& path, int line_no,
                              const std::string& video_id, int frame) {
        if (already) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": duplicate row for (" + video_id + ", " +
                                     std::to_string(frame) + ")");
        }
    };

    detail::read_stream(manifest.image_features,
                        detail::feature_schema("image_features", "img_", manifest.d_img),
                        [&](const std::string& vid, int frame, const Vec& v, int line_no) {
                            auto& rec = detail::record_for(records, vid, frame);
                            guard_duplicate(!rec.image_feature.empty(), manifest.image_features,
                                            line_no, vid, frame);
                            rec.image_feature = v;
                        });
    detail::read_stream(manifest.openface_features, detail::openface_schema(),
                        [&](const std::string& vid, int frame, const Vec& v, int line_no) {
                            auto& rec = detail::record_for(records, vid, frame);
                            guard_duplicate(!rec.openface_feature.empty(),
                                            manifest.openface_features, line_no, vid, frame);
                            rec.openface_feature = v;
                        });
    if (manifest.has_audio()) {
        detail::read_stream(manifest.audio_features,
                            detail::feature_schema("audio_features", "aud_", manifest.d_aud),
                            [&](const std::string& vid, int frame, const Vec& v, int line_no) {
                                auto& rec = detail::record_for(records, vid, frame);
                                guard_duplicate(!rec.audio_feature.empty(),
                                                manifest.audio_features, line_no, vid, frame);
                                rec.audio_feature = v;
                            });
    }
    if (!manifest.labels_expr.empty()) {
        detail::StreamSchema schema;
        schema.stream_name = "labels_expr";
        schema.columns = {"expression"};
        detail::read_stream(manifest.labels_expr, schema,
                            [&](const std::string& vid, int frame, const Vec& v, int line_no) {
                                auto& rec = detail::record_for(records, vid, frame);
                                guard_duplicate(rec.expression.has_value(), manifest.labels_expr,
                                                line_no, vid, frame);
                                const double e = v[0];
                                if (e != std::floor(e) || e < 0 || e > 6) {
                                    throw std::runtime_error(
                                        manifest.labels_expr + ":" + std::to_string(line_no) +
                                        ": expression label out of range {0..6}");
                                }
                                rec.expression = static_cast<int>(e);
                            });
    }
    if (!manifest.labels_va.empty()) {
        detail::StreamSchema schema;
        schema.stream_name = "labels_va";
        schema.columns = {"valence", "arousal"};
        detail::read_stream(manifest.labels_va, schema,
                            [&](const std::string& vid, int frame, const Vec& v, int line_no) {
                                auto& rec = detail::record_for(records, vid, frame);
                                guard_duplicate(rec.valence.has_value(), manifest.labels_va,
                                                line_no, vid, frame);
                                if (v[0] < -1.0 || v[0] > 1.0 || v[1] < -1.0 || v[1] > 1.0) {
                                    throw std::runtime_error(
                                        manifest.labels_va + ":" + std::to_string(line_no) +
                                        ": valence/arousal outside [-1, 1]");
                                }
                                rec.valence = v[0];
                                rec.arousal = v[1];
                            });
    }

    std::vector<FrameRecord> out;
    out.reserve(records.size());
    for (auto& [key, rec] : records) {
        rec.valid = !rec.image_feature.empty() && !rec.openface_feature.empty() &&
                    (!manifest.has_audio() || !rec.audio_feature.empty());
        out.push_back(std::move(rec));
    }
    return out;
}

// Group records into one sequence per video_id, frames sorted by frame index.
inline std::vector<SubjectSequence> assemble_sequences(std::vector<FrameRecord> records) {
    std::map<std::string, std::vector<FrameRecord>> groups;
    for (auto& rec : records) {
        groups[rec.video_id].push_back(std::move(rec));
    }
    std::vector<SubjectSequence> out;
    out.reserve(groups.size());
    for (auto& [vid, frames] : groups) {
        std::stable_sort(frames.begin(), frames.end(),
                         [](const FrameRecord& a, const FrameRecord& b) {
                             return a.frame_index < b.frame_index;
                         });
        for (std::size_t i = 1; i < frames.size(); ++i) {
            if (frames[i].frame_index == frames[i - 1].frame_index) {
                throw std::runtime_error("assemble_sequences: duplicate frame key (" + vid +
                                         ", " + std::to_string(frames[i].frame_index) + ")");
            }
        }
        SubjectSequence seq;
        seq.video_id = vid;
        seq.frames = std::move(frames);
        out.push_back(std::move(seq));
    }
    return out;
}

struct ValidationReport {
    long total_frames = 0;
    long invalid_frames = 0;
    long expr_labeled = 0;
    long va_labeled = 0;
    std::array<long, kNumCategories> expression_counts{};
    std::map<std::string, long> frames_per_video;
    std::map<int, long> gap_histogram;  // gap length -> occurrences
};

inline ValidationReport validate_dataset(const std::vector<SubjectSequence>& sequences) {
    ValidationReport report;
    for (const auto& seq : sequences) {
        report.frames_per_video[seq.video_id] =
            static_cast<long>(seq.frames.size());
        report.total_frames += static_cast<long>(seq.frames.size());
        int prev_valid_index = -1;
        bool seen_valid = false;
        for (const auto& frame : seq.frames) {
            if (!frame.valid) {
                ++report.invalid_frames;
            }
            if (frame.expression) {
                ++report.expr_labeled;
                ++report.expression_counts[*frame.expression];
            }
            if (frame.valence) {
                ++report.va_labeled;
            }
            if (frame.valid) {
                if (seen_valid) {
                    const int gap = frame.frame_index - prev_valid_index - 1;
                    if (gap > 0) {
                        ++report.gap_histogram[gap];
                    }
                }
                prev_valid_index = frame.frame_index;
                seen_valid = true;
            }
        }
    }
    return report;
}

inline std::string render_validation(const ValidationReport& r) {
    std::ostringstream out;
    out << "frames: " << r.total_frames << " (invalid " << r.invalid_frames << ")\n";
    out << "videos: " << r.frames_per_video.size() << "\n";
    out << "expression labels: " << r.expr_labeled << "  [";
    for (int c = 0; c < kNumCategories; ++c) {
        out << (c ? " " : "") << c << ":" << r.expression_counts[c];
    }
    out << "]\n";
    out << "va labels: " << r.va_labeled << "\n";
    out << "gaps:";
    if (r.gap_histogram.empty()) {
        out << " none";
    }
    for (const auto& [len, n] : r.gap_histogram) {
        out << " " << len << "x" << n;
    }
    out << "\n";
    return out.str();
}

// Canonical text form, used for determinism checks and debugging.
inline std::string serialize_sequences(const std::vector<SubjectSequence>& sequences) {
    std::ostringstream out;
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (const auto& seq : sequences) {
        out << seq.video_id << " fps=" << seq.fps << "\n";
        for (const auto& f : seq.frames) {
            out << f.frame_index << " v=" << (f.valid ? 1 : 0);
            if (f.expression) {
                out << " e=" << *f.expression;
            }
            if (f.valence) {
                out << " va=";
                put(*f.valence);
                out << ",";
                put(*f.arousal);
            }
            for (const Vec* block : {&f.image_feature, &f.openface_feature, &f.audio_feature}) {
                out << " |";
                for (double v : *block) {
                    out << " ";
                    put(v);
                }
            }
            out << "\n";
        }
    }
    return out.str();
}

}  // namespace affect
