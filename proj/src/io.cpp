#include "tcmot/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

namespace tcmot {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

[[noreturn]] void row_error(int lineno, const std::string& field, const std::string& why) {
    throw InputError("line " + std::to_string(lineno) + ", field " + field + ": " + why);
}

double parse_real(const std::string& text, int lineno, const char* field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        row_error(lineno, field, "not a number '" + text + "'");
    }
    while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
    if (used != text.size() || !std::isfinite(v)) row_error(lineno, field, "not a finite number '" + text + "'");
    return v;
}

int parse_int(const std::string& text, int lineno, const char* field) {
    const double v = parse_real(text, lineno, field);
    if (v != std::floor(v)) row_error(lineno, field, "not an integer '" + text + "'");
    return static_cast<int>(v);
}

std::string default_feature_path(const std::string& path, const std::string& feature_path) {
    return feature_path.empty() ? path + ".feat" : feature_path;
}

}  // namespace

std::vector<Detection> read_detections(std::istream& csv, std::istream* features) {
    std::vector<Detection> out;
    std::string line;
    int lineno = 0;
    int feature_line = 0;
    while (std::getline(csv, line)) {
        ++lineno;
        if (blank(line)) continue;
        const auto cells = split_csv(line);
        if (cells.size() < 7) row_error(lineno, "row", "expected at least 7 columns");
        const int frame = parse_int(cells[0], lineno, "frame");
        const int id = parse_int(cells[1], lineno, "id");
        Box box{parse_real(cells[2], lineno, "left"), parse_real(cells[3], lineno, "top"),
                parse_real(cells[4], lineno, "width"), parse_real(cells[5], lineno, "height")};
        const double conf = parse_real(cells[6], lineno, "conf");
        if (frame < 1) row_error(lineno, "frame", "must be >= 1");
        if (!(box.width > 0.0)) row_error(lineno, "width", "must be > 0");
        if (!(box.height > 0.0)) row_error(lineno, "height", "must be > 0");

        Eigen::VectorXd feat;
        if (features) {
            std::string fline;
            do {
                if (!std::getline(*features, fline)) {
                    throw InputError("feature file has fewer rows than the detection file (line " +
                                     std::to_string(lineno) + ")");
                }
                ++feature_line;
            } while (blank(fline));
            std::istringstream fs(fline);
            std::vector<double> vals;
            std::string tok;
            while (fs >> tok) vals.push_back(parse_real(tok, feature_line, "feature"));
            feat = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
            if (!out.empty() && feat.size() != out.front().feature.size()) {
                throw InputError("feature line " + std::to_string(feature_line) + ": dimension " +
                                 std::to_string(feat.size()) + " differs from " +
                                 std::to_string(out.front().feature.size()));
            }
        }
        Detection d(frame, box, conf, std::move(feat));
        if (id >= 0) set_truth_identity(d, id);
        out.push_back(std::move(d));
    }
    if (features) {
        std::string rest;
        while (std::getline(*features, rest)) {
            if (!blank(rest)) throw InputError("feature file has more rows than the detection file");
        }
    }
    return out;
}

std::vector<Detection> load_detections(const std::string& path, const std::string& feature_path) {
    std::ifstream csv(path);
    if (!csv) throw InputError("cannot open " + path);
    const std::string fpath = default_feature_path(path, feature_path);
    if (!feature_path.empty() || std::filesystem::exists(fpath)) {
        std::ifstream feat(fpath);
        if (!feat) throw InputError("cannot open " + fpath);
        return read_detections(csv, &feat);
    }
    return read_detections(csv, nullptr);
}

void write_detections(std::ostream& csv, std::ostream& features, std::span<const Detection> dets) {
    csv << std::setprecision(17);
    features << std::setprecision(17);
    for (const auto& d : dets) {
        csv << d.frame << ',' << truth_identity(d).value_or(-1) << ',' << d.box.left << ',' << d.box.top << ','
            << d.box.width << ',' << d.box.height << ',' << d.confidence << '\n';
        for (Eigen::Index k = 0; k < d.feature.size(); ++k) features << (k ? " " : "") << d.feature(k);
        features << '\n';
    }
}

void save_detections(const std::string& path, std::span<const Detection> dets, const std::string& feature_path) {
    std::ofstream csv(path);
    std::ofstream feat(default_feature_path(path, feature_path));
    if (!csv || !feat) throw InputError("cannot write " + path);
    write_detections(csv, feat, dets);
}

void write_trajectories(std::ostream& os, std::span<const Trajectory> trajs) {
    struct Row {
        int frame;
        int id;
        const Box* box;
    };
    std::vector<Row> rows;
    for (const auto& t : trajs) {
        for (const auto& e : t.entries) rows.push_back({e.frame, t.track_id, &e.box});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.frame, a.id) < std::tie(b.frame, b.id);
    });
    os << std::fixed << std::setprecision(2);
    for (const auto& r : rows) {
        os << r.frame << ',' << r.id << ',' << r.box->left << ',' << r.box->top << ',' << r.box->width << ','
           << r.box->height << ",1,-1,-1,-1\n";
    }
}

void emit_trajectories(std::span<const Trajectory> trajs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_trajectories(out, trajs);
    if (!out) throw InputError("write failed for " + path);
}

std::vector<Trajectory> read_trajectories(std::istream& is) {
    std::map<int, Trajectory> by_id;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (blank(line)) continue;
        const auto cells = split_csv(line);
        if (cells.size() < 6) row_error(lineno, "row", "expected at least 6 columns");
        const int frame = parse_int(cells[0], lineno, "frame");
        const int id = parse_int(cells[1], lineno, "id");
        Box box{parse_real(cells[2], lineno, "left"), parse_real(cells[3], lineno, "top"),
                parse_real(cells[4], lineno, "width"), parse_real(cells[5], lineno, "height")};
        if (!(box.width > 0.0)) row_error(lineno, "width", "must be > 0");
        if (!(box.height > 0.0)) row_error(lineno, "height", "must be > 0");
        auto& t = by_id[id];
        t.track_id = id;
        t.entries.push_back({frame, box});
    }
    std::vector<Trajectory> out;
    for (auto& [id, t] : by_id) {
        std::stable_sort(t.entries.begin(), t.entries.end(),
                         [](const TrajectoryEntry& a, const TrajectoryEntry& b) { return a.frame < b.frame; });
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_trajectories(in);
}

void write_tracklets(std::ostream& os, std::span<const Tracklet> tracklets) {
    os << std::fixed << std::setprecision(2);
    for (const auto& t : tracklets) {
        for (const auto& d : t.detections) {
            os << d.frame << ',' << t.tid << ',' << d.box.left << ',' << d.box.top << ',' << d.box.width << ','
               << d.box.height << ',' << d.confidence << '\n';
        }
    }
    os.unsetf(std::ios::fixed);
}

}  // namespace tcmot
