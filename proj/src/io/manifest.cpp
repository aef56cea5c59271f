#include "dseno/io/manifest.hpp"

#include <sstream>

#include "dseno/io/text.hpp"

namespace dseno::io {

namespace {

[[noreturn]] void bad_manifest(const std::string& source, const std::string& what) {
    throw DataError(Errc::corrupt_file, source + ": " + what);
}

Shape parse_mesh(const std::string& value, const std::string& source) {
    Shape mesh;
    for (const std::string& part : split(value, 'x')) {
        std::size_t d = 0;
        try {
            d = parse_size(part, "mesh");
        } catch (const ConfigError&) {
            bad_manifest(source, "mesh must look like 85x85 or 64x64x20, got '" + value + "'");
        }
        if (d == 0) bad_manifest(source, "mesh extents must be positive, got '" + value + "'");
        mesh.push_back(d);
    }
    return mesh;
}

std::vector<std::string> parse_labels(const std::string& value) {
    std::vector<std::string> out;
    if (value.empty()) return out;
    for (std::string& label : split(value, ',')) out.push_back(std::move(label));
    return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
    return out;
}

std::string relative_if_inside(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty()) return {};
    const auto rel = p.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
}

}  // namespace

std::string to_string(Normalization n) {
    return n == Normalization::zscore ? "zscore" : "none";
}

void Manifest::validate() const {
    const std::string src = "manifest '" + name + "'";
    if (inputs.empty()) bad_manifest(src, "'inputs' path is empty");
    if (!trajectories() && targets.empty()) bad_manifest(src, "'targets' path is empty");
    if (n_train == 0) bad_manifest(src, "n_train must be positive");
    if (trajectories()) {
        if (mesh.size() != 3) bad_manifest(src, "trajectory data needs mesh H x W x T");
        if (ns_horizon == 0) bad_manifest(src, "ns_horizon must be positive when ns_history is set");
        if (mesh[2] < ns_history + ns_horizon) {
            bad_manifest(src, "mesh T = " + std::to_string(mesh[2]) + " is shorter than ns_history + ns_horizon = " +
                                  std::to_string(ns_history + ns_horizon));
        }
    } else {
        if (mesh.size() != 2) bad_manifest(src, "field data needs mesh H x W");
        if (ns_horizon != 0) bad_manifest(src, "ns_horizon is set without ns_history");
    }
}

Manifest parse_manifest_text(std::string_view text, const std::filesystem::path& base_dir, const std::string& source) {
    std::vector<KeyValue> entries;
    try {
        entries = parse_key_values(text, source);
    } catch (const ConfigError& e) {
        throw DataError(Errc::corrupt_file, e.what());
    }
    Manifest m;
    bool has_mesh = false;
    const auto resolve = [&](const std::string& value) -> std::filesystem::path {
        if (value.empty()) return {};
        std::filesystem::path p(value);
        return p.is_absolute() ? p : (base_dir / p).lexically_normal();
    };
    for (const KeyValue& kv : entries) {
        const std::string where = source + ":" + std::to_string(kv.line);
        try {
            if (kv.key == "name") {
                m.name = kv.value;
            } else if (kv.key == "n_train") {
                m.n_train = parse_size(kv.value, kv.key);
            } else if (kv.key == "n_test") {
                m.n_test = parse_size(kv.value, kv.key);
            } else if (kv.key == "inputs") {
                m.inputs = resolve(kv.value);
            } else if (kv.key == "targets") {
                m.targets = resolve(kv.value);
            } else if (kv.key == "mesh") {
                m.mesh = parse_mesh(kv.value, where);
                has_mesh = true;
            } else if (kv.key == "channels") {
                // "a_x, a_y -> p": input labels, then target labels.
                const auto arrow = kv.value.find("->");
                if (arrow == std::string::npos) bad_manifest(where, "channels must read 'inputs -> targets'");
                m.input_channels = parse_labels(trim(kv.value.substr(0, arrow)));
                m.target_channels = parse_labels(trim(kv.value.substr(arrow + 2)));
            } else if (kv.key == "normalize") {
                if (kv.value == "zscore") m.normalize = Normalization::zscore;
                else if (kv.value == "none") m.normalize = Normalization::none;
                else bad_manifest(where, "normalize must be zscore or none, got '" + kv.value + "'");
            } else if (kv.key == "append_coords") {
                m.append_coords = parse_bool(kv.value, kv.key);
            } else if (kv.key == "ns_history") {
                m.ns_history = parse_size(kv.value, kv.key);
            } else if (kv.key == "ns_horizon") {
                m.ns_horizon = parse_size(kv.value, kv.key);
            } else {
                bad_manifest(where, "unknown key '" + kv.key + "'");
            }
        } catch (const ConfigError& e) {
            bad_manifest(where, e.what());
        }
    }
    if (!has_mesh) bad_manifest(source, "missing key 'mesh'");
    if (m.name.empty()) m.name = source;
    m.validate();
    return m;
}

Manifest parse_manifest(const std::filesystem::path& path) {
    return parse_manifest_text(read_text_file(path), path.parent_path(), path.string());
}

std::string format_manifest(const Manifest& m, const std::filesystem::path& base_dir) {
    std::ostringstream out;
    std::vector<std::string> mesh;
    for (std::size_t d : m.mesh) mesh.push_back(std::to_string(d));
    out << "name = " << m.name << '\n'
        << "n_train = " << m.n_train << '\n'
        << "n_test = " << m.n_test << '\n'
        << "inputs = " << relative_if_inside(m.inputs, base_dir) << '\n'
        << "targets = " << relative_if_inside(m.targets, base_dir) << '\n'
        << "mesh = " << join(mesh, "x") << '\n';
    if (!m.input_channels.empty() || !m.target_channels.empty()) {
        out << "channels = " << join(m.input_channels, ", ") << " -> " << join(m.target_channels, ", ") << '\n';
    }
    out << "normalize = " << to_string(m.normalize) << '\n'
        << "append_coords = " << (m.append_coords ? "true" : "false") << '\n';
    if (m.trajectories()) out << "ns_history = " << m.ns_history << "\nns_horizon = " << m.ns_horizon << '\n';
    return out.str();
}

}  // namespace dseno::io
