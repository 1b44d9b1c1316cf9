#include "bcr/io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bcr/image.hpp"

namespace bcr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// pts / visibility / roles

Shape load_pts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_pts: cannot open " + path);
    std::string line;
    int lineno = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line))
            throw ParseError("load_pts: " + path + ": unexpected end of file at line " +
                             std::to_string(lineno + 1));
        ++lineno;
    };

    next_line();
    if (line.rfind("version:", 0) != 0)
        throw ParseError("load_pts: " + path + ": line 1: expected 'version:' header");
    next_line();
    if (line.rfind("n_points:", 0) != 0)
        throw ParseError("load_pts: " + path + ": line 2: expected 'n_points:' header");
    int npoints = 0;
    try {
        npoints = std::stoi(line.substr(9));
    } catch (const std::exception&) {
        throw ParseError("load_pts: " + path + ": line 2: non-numeric point count");
    }
    if (npoints < 3)
        throw ParseError("load_pts: " + path + ": line 2: need at least 3 points");
    next_line();
    if (line.find('{') == std::string::npos)
        throw ParseError("load_pts: " + path + ": line " + std::to_string(lineno) +
                         ": expected '{'");

    Shape shape(2 * npoints);
    for (int i = 0; i < npoints; ++i) {
        next_line();
        if (line.find('}') != std::string::npos)
            throw ParseError("load_pts: " + path + ": line " + std::to_string(lineno) +
                             ": only " + std::to_string(i) + " of " + std::to_string(npoints) +
                             " coordinate lines present");
        std::istringstream ls(line);
        double x, y;
        if (!(ls >> x >> y))
            throw ParseError("load_pts: " + path + ": line " + std::to_string(lineno) +
                             ": non-numeric coordinate token");
        // 1-origin on disk.
        shape[i] = x - 1.0;
        shape[npoints + i] = y - 1.0;
    }
    next_line();
    if (line.find('}') == std::string::npos)
        throw ParseError("load_pts: " + path + ": line " + std::to_string(lineno) +
                         ": expected '}'");
    return shape;
}

void save_pts(const Shape& shape, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_pts: cannot write " + path);
    const int nl = landmark_count(shape);
    out << "version: 1\n";
    out << "n_points: " << nl << "\n{\n";
    char buf[80];
    for (int i = 0; i < nl; ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f\n", shape[i] + 1.0, shape[nl + i] + 1.0);
        out << buf;
    }
    out << "}\n";
}

Visibility load_visibility(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_visibility: cannot open " + path);
    std::vector<double> values;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string token;
        std::istringstream(line) >> token;
        if (token.empty()) continue;
        if (token == "0")
            values.push_back(0.0);
        else if (token == "1")
            values.push_back(1.0);
        else
            throw ParseError("load_visibility: " + path + ": line " + std::to_string(lineno) +
                             ": token '" + token + "' is not 0 or 1");
    }
    if (values.empty()) throw ParseError("load_visibility: " + path + ": empty file");
    Visibility v(values.size());
    for (size_t i = 0; i < values.size(); ++i) v[i] = values[i];
    return v;
}

void save_visibility(const Visibility& vis, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_visibility: cannot write " + path);
    for (int i = 0; i < vis.size(); ++i) out << (vis[i] >= 0.5 ? 1 : 0) << "\n";
}

RoleMap load_roles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_roles: cannot open " + path);
    RoleMap roles;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string role;
        int index;
        if (!(ls >> role >> index))
            throw ParseError("load_roles: " + path + ": line " + std::to_string(lineno) +
                             ": expected '<role> <index>'");
        roles[role] = index;
    }
    return roles;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::optional<Box> parse_box(const std::string& text) {
    Box box;
    char c1, c2, c3;
    std::istringstream bs(text);
    if (!(bs >> box.x >> c1 >> box.y >> c2 >> box.w >> c3 >> box.h) || c1 != ',' ||
        c2 != ',' || c3 != ',')
        return std::nullopt;
    return box;
}

std::string resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    return path.is_absolute() ? path.string() : (base / path).string();
}

}  // namespace

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot open " + path);
    const fs::path base = fs::path(path).parent_path();
    Manifest manifest;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_tabs(line);
        if (fields.size() < 2)
            throw ParseError("load_manifest: " + path + ": line " + std::to_string(lineno) +
                             ": expected at least image and pts fields");
        ManifestEntry entry;
        entry.image_path = resolve(base, fields[0]);
        entry.pts_path = resolve(base, fields[1]);
        if (fields.size() > 2) entry.vis_path = resolve(base, fields[2]);
        if (fields.size() > 3 && !fields[3].empty()) {
            entry.box = parse_box(fields[3]);
            if (!entry.box)
                throw ParseError("load_manifest: " + path + ": line " + std::to_string(lineno) +
                                 ": malformed box '" + fields[3] + "'");
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_manifest: cannot write " + path);
    for (const auto& e : manifest.entries) {
        out << e.image_path << '\t' << e.pts_path << '\t' << e.vis_path;
        if (e.box)
            out << '\t' << e.box->x << ',' << e.box->y << ',' << e.box->w << ',' << e.box->h;
        out << '\n';
    }
}

LoadReport load_dataset(const Manifest& manifest) {
    LoadReport report;
    int expected_landmarks = -1;
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const ManifestEntry& entry = manifest.entries[i];
        try {
            LoadedSample sample;
            if (!fs::exists(entry.image_path))
                throw IoError("image file missing: " + entry.image_path);
            sample.image_path = entry.image_path;
            sample.gt_shape = load_pts(entry.pts_path);
            const int nl = landmark_count(sample.gt_shape);
            if (!entry.vis_path.empty() && fs::exists(entry.vis_path))
                sample.gt_visibility = load_visibility(entry.vis_path);
            else
                sample.gt_visibility = all_visible(nl);
            if (sample.gt_visibility.size() != nl)
                throw ParseError("visibility length " + std::to_string(sample.gt_visibility.size()) +
                                 " does not match " + std::to_string(nl) + " landmarks");
            if (expected_landmarks < 0) expected_landmarks = nl;
            if (nl != expected_landmarks)
                throw ParseError("landmark count " + std::to_string(nl) +
                                 " differs from dataset count " +
                                 std::to_string(expected_landmarks));
            sample.box = entry.box;
            report.samples.push_back(std::move(sample));
        } catch (const std::exception& e) {
            report.skipped.push_back("entry " + std::to_string(i + 1) + " (" + entry.pts_path +
                                     "): " + e.what());
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// PGM

ImageSample load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ParseError("load_pgm: " + path + ": not a binary PGM (P5)");
    int width, height, maxval;
    if (!(in >> width >> height >> maxval) || width <= 0 || height <= 0 || maxval <= 0 ||
        maxval > 255)
        throw ParseError("load_pgm: " + path + ": malformed header");
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(static_cast<size_t>(width) * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError("load_pgm: " + path + ": truncated pixel data");
    ImageSample img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.set(x, y, raw[static_cast<size_t>(y) * width + x] / static_cast<double>(maxval));
    return img;
}

void save_pgm(const ImageSample& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_pgm: cannot write " + path);
    out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
    std::vector<unsigned char> raw(static_cast<size_t>(image.width()) * image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) {
            const double v = std::clamp(image.at(x, y), 0.0, 1.0);
            raw[static_cast<size_t>(y) * image.width() + x] =
                static_cast<unsigned char>(std::lround(v * 255.0));
        }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

// ---------------------------------------------------------------------------
// Model container: magic "BCR1", version, section table, little-endian 64-bit
// floats and 32-bit integers.

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr size_t kSectionNameLen = 16;

struct Writer {
    std::string buffer;

    void raw(const void* data, size_t size) {
        buffer.append(static_cast<const char*>(data), size);
    }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void vec(const Eigen::VectorXd& v) {
        i32(static_cast<std::int32_t>(v.size()));
        for (int i = 0; i < v.size(); ++i) f64(v[i]);
    }
    void mat(const Eigen::MatrixXd& m) {
        i32(static_cast<std::int32_t>(m.rows()));
        i32(static_cast<std::int32_t>(m.cols()));
        for (int c = 0; c < m.cols(); ++c)
            for (int r = 0; r < m.rows(); ++r) f64(m(r, c));
    }
};

struct Reader {
    const char* data;
    size_t size;
    size_t pos = 0;
    std::string section;

    void need(size_t n) {
        if (pos + n > size)
            throw ModelFormatError("load_model: truncated section " + section);
    }
    void raw(void* out, size_t n) {
        need(n);
        std::memcpy(out, data + pos, n);
        pos += n;
    }
    std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
    std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    Eigen::VectorXd vec() {
        const std::int32_t n = i32();
        if (n < 0 || static_cast<size_t>(n) * 8 > size - pos)
            throw ModelFormatError("load_model: truncated section " + section);
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
    Eigen::MatrixXd mat() {
        const std::int32_t rows = i32();
        const std::int32_t cols = i32();
        if (rows < 0 || cols < 0 ||
            static_cast<size_t>(rows) * cols * 8 > size - pos)
            throw ModelFormatError("load_model: truncated section " + section);
        Eigen::MatrixXd m(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r) m(r, c) = f64();
        return m;
    }
};

void write_spdm(Writer& w, const SpdmModel& m) {
    w.vec(m.mean_shape);
    w.mat(m.shape_basis);
    w.vec(m.mean_visibility);
    w.mat(m.vis_basis);
    w.mat(m.combined);
    w.vec(m.param_shift);
    w.vec(m.param_scale);
    w.i32(m.similarity_columns);
}

SpdmModel read_spdm(Reader& r) {
    SpdmModel m;
    m.mean_shape = r.vec();
    m.shape_basis = r.mat();
    m.mean_visibility = r.vec();
    m.vis_basis = r.mat();
    m.combined = r.mat();
    m.param_shift = r.vec();
    m.param_scale = r.vec();
    m.similarity_columns = r.i32();
    return m;
}

void write_forest(Writer& w, const FeatureForest& f) {
    w.i32(f.tree_count());
    w.i32(f.descriptor_dim);
    for (int lm : f.tree_landmarks) w.i32(lm);
    for (int off : f.leaf_offsets) w.i32(off);
    for (const RegressionTree& tree : f.trees) {
        w.i32(static_cast<std::int32_t>(tree.nodes.size()));
        w.i32(tree.leaf_count);
        for (const TreeNode& node : tree.nodes) {
            w.i32(node.feature.landmark_index);
            w.f64(node.feature.offset_a.x());
            w.f64(node.feature.offset_a.y());
            w.f64(node.feature.offset_b.x());
            w.f64(node.feature.offset_b.y());
            w.f64(node.threshold);
            w.i32(node.left);
            w.i32(node.right);
            w.i32(node.leaf_id);
        }
    }
}

FeatureForest read_forest(Reader& r) {
    FeatureForest f;
    const std::int32_t ntrees = r.i32();
    f.descriptor_dim = r.i32();
    if (ntrees < 0) throw ModelFormatError("load_model: truncated section " + r.section);
    f.tree_landmarks.resize(ntrees);
    for (auto& lm : f.tree_landmarks) lm = r.i32();
    f.leaf_offsets.resize(ntrees);
    for (auto& off : f.leaf_offsets) off = r.i32();
    f.trees.resize(ntrees);
    for (RegressionTree& tree : f.trees) {
        const std::int32_t nnodes = r.i32();
        tree.leaf_count = r.i32();
        if (nnodes < 0) throw ModelFormatError("load_model: truncated section " + r.section);
        tree.nodes.resize(nnodes);
        for (TreeNode& node : tree.nodes) {
            node.feature.landmark_index = r.i32();
            node.feature.offset_a.x() = r.f64();
            node.feature.offset_a.y() = r.f64();
            node.feature.offset_b.x() = r.f64();
            node.feature.offset_b.y() = r.f64();
            node.threshold = r.f64();
            node.left = r.i32();
            node.right = r.i32();
            node.leaf_id = r.i32();
        }
    }
    return f;
}

std::string section_name(const std::string& name) {
    std::string padded = name;
    padded.resize(kSectionNameLen, '\0');
    return padded;
}

}  // namespace

void save_model(const BcrModel& model, const std::string& path) {
    std::vector<std::pair<std::string, std::string>> sections;  // (name, payload)

    Writer meta;
    meta.i32(model.levels);
    meta.i32(model.landmarks);
    meta.i32(model.target_mode == TargetMode::kRawLandmarks ? 1 : 0);
    meta.i32(model.branching ? 1 : 0);
    meta.f64(model.visibility_threshold);
    meta.i32(static_cast<std::int32_t>(model.nodes.size()));
    sections.emplace_back("META", std::move(meta.buffer));

    for (size_t i = 0; i < model.nodes.size(); ++i) {
        const BcrNode& node = model.nodes[i];
        Writer w;
        w.i32(node.level);
        w.i32(node.raw_targets ? 1 : 0);
        w.i32(node.left);
        w.i32(node.right);
        w.i32(node.gate ? 1 : 0);
        write_spdm(w, node.spdm);
        write_forest(w, node.forest);
        w.mat(node.regressor.weights);
        w.f64(node.regressor.lambda);
        if (node.gate) {
            w.vec(node.gate->weights);
            w.f64(node.gate->bias);
            w.f64(node.gate->cost);
        }
        char name[32];
        std::snprintf(name, sizeof(name), "NODE%04zu", i);
        sections.emplace_back(name, std::move(w.buffer));
    }

    const size_t header_size = 4 + 4 + 4 + sections.size() * (kSectionNameLen + 16);
    Writer out;
    out.raw("BCR1", 4);
    out.u32(kModelVersion);
    out.u32(static_cast<std::uint32_t>(sections.size()));
    std::uint64_t offset = header_size;
    for (const auto& [name, payload] : sections) {
        out.raw(section_name(name).data(), kSectionNameLen);
        out.u64(offset);
        out.u64(payload.size());
        offset += payload.size();
    }
    for (const auto& [name, payload] : sections) out.buffer += payload;

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("save_model: cannot write " + path);
    file.write(out.buffer.data(), static_cast<std::streamsize>(out.buffer.size()));
}

BcrModel load_model(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("load_model: cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    if (blob.size() < 12 || blob.compare(0, 4, "BCR1") != 0)
        throw ModelFormatError("load_model: bad magic, not a BCR model file");
    Reader header{blob.data(), blob.size(), 4, "header"};
    const std::uint32_t version = header.u32();
    if (version != kModelVersion)
        throw ModelFormatError("load_model: unsupported format version " +
                               std::to_string(version));
    const std::uint32_t nsections = header.u32();

    struct Section {
        std::string name;
        std::uint64_t offset;
        std::uint64_t size;
    };
    std::vector<Section> table;
    for (std::uint32_t i = 0; i < nsections; ++i) {
        char name[kSectionNameLen + 1] = {};
        header.raw(name, kSectionNameLen);
        Section s;
        s.name = name;
        s.offset = header.u64();
        s.size = header.u64();
        if (s.offset + s.size > blob.size())
            throw ModelFormatError("load_model: truncated section " + s.name);
        table.push_back(std::move(s));
    }
    auto open_section = [&](const std::string& name) -> Reader {
        for (const auto& s : table)
            if (s.name == name) return Reader{blob.data() + s.offset, s.size, 0, name};
        throw ModelFormatError("load_model: missing section " + name);
    };

    Reader meta = open_section("META");
    BcrModel model;
    model.levels = meta.i32();
    model.landmarks = meta.i32();
    model.target_mode = meta.i32() == 1 ? TargetMode::kRawLandmarks : TargetMode::kSpdmParams;
    model.branching = meta.i32() == 1;
    model.visibility_threshold = meta.f64();
    const std::int32_t node_count = meta.i32();
    if (node_count < 0) throw ModelFormatError("load_model: truncated section META");

    model.nodes.resize(node_count);
    for (std::int32_t i = 0; i < node_count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "NODE%04d", i);
        Reader r = open_section(name);
        BcrNode& node = model.nodes[i];
        node.level = r.i32();
        node.raw_targets = r.i32() == 1;
        node.left = r.i32();
        node.right = r.i32();
        const bool has_gate = r.i32() == 1;
        node.spdm = read_spdm(r);
        node.forest = read_forest(r);
        node.regressor.weights = r.mat();
        node.regressor.lambda = r.f64();
        if (has_gate) {
            LinearSvm gate;
            gate.weights = r.vec();
            gate.bias = r.f64();
            gate.cost = r.f64();
            node.gate = std::move(gate);
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// CED outputs

void write_ced_csv(const std::vector<std::pair<double, double>>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_ced_csv: cannot write " + path);
    out << "threshold,fraction\n";
    char buf[64];
    for (const auto& [t, f] : curve) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", t, f);
        out << buf;
    }
}

void write_ced_svg(const std::vector<std::pair<double, double>>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_ced_svg: cannot write " + path);
    const int w = 640, h = 480, margin = 50;
    double tmax = 1e-12;
    for (const auto& [t, f] : curve) tmax = std::max(tmax, t);
    auto px = [&](double t) { return margin + t / tmax * (w - 2 * margin); };
    auto py = [&](double f) { return h - margin - f * (h - 2 * margin); };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
        << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << h - margin << "\" stroke=\"black\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& [t, f] : curve) out << px(t) << "," << py(f) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\">normalized error threshold</text>\n";
    out << "<text x=\"14\" y=\"" << h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << h / 2 << ")\">fraction of faces</text>\n";
    out << "</svg>\n";
}

}  // namespace bcr
