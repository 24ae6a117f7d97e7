#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfchange/error.hpp"
#include "surfchange/height_matrix.hpp"
#include "surfchange/numeric.hpp"

namespace surfchange {

namespace fs = std::filesystem;

inline constexpr const char* kManifestName = "manifest.json";

/// Rows of a plain-text matrix. Lines that are blank or start with '#' are
/// skipped. A line containing a comma is split on commas (an empty field is a
/// missing pixel, read as NaN); otherwise it is split on whitespace.
struct ParsedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline double parse_number(std::string_view tok, std::size_t line, const std::string& source)
{
    if (tok.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc::result_out_of_range) return std::numeric_limits<double>::quiet_NaN();
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw Error(ErrorCode::MalformedInput,
                    source + ":" + std::to_string(line) + ": non-numeric value '" + std::string(tok) + "'");
    return v;
}

} // namespace detail

inline ParsedMatrix parse_matrix(std::istream& in, const std::string& source = "<matrix>")
{
    ParsedMatrix out;
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> row;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        row.clear();
        if (text.find(',') != std::string_view::npos) {
            std::size_t start = 0;
            while (true) {
                const auto comma = text.find(',', start);
                const auto field = detail::trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
                row.push_back(detail::parse_number(field, lineno, source));
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
        } else {
            std::size_t pos = 0;
            while (pos < text.size()) {
                const auto first = text.find_first_not_of(" \t", pos);
                if (first == std::string_view::npos) break;
                auto last = text.find_first_of(" \t", first);
                if (last == std::string_view::npos) last = text.size();
                row.push_back(detail::parse_number(text.substr(first, last - first), lineno, source));
                pos = last;
            }
        }
        if (out.rows == 0) {
            out.cols = row.size();
        } else if (row.size() != out.cols) {
            throw Error(ErrorCode::MalformedInput, source + ":" + std::to_string(lineno) +
                                                       ": non-rectangular matrix (expected " +
                                                       std::to_string(out.cols) + " columns, found " +
                                                       std::to_string(row.size()) + ")");
        }
        out.values.insert(out.values.end(), row.begin(), row.end());
        ++out.rows;
    }
    SURFCHANGE_REQUIRE(out.rows > 0 && out.cols > 0, ErrorCode::MalformedInput, source + ": empty matrix");
    return out;
}

/// Wrap parsed values as a scan, replacing non-finite pixels by NaN and
/// failing when more than 1% of them are lost.
inline HeightMatrix make_height_matrix(ParsedMatrix parsed, double dx_um, double dy_um, std::string location_id,
                                       std::string stage_id)
{
    HeightMatrix m;
    m.rows = parsed.rows;
    m.cols = parsed.cols;
    m.dx_um = dx_um;
    m.dy_um = dy_um;
    m.z = std::move(parsed.values);
    m.location_id = std::move(location_id);
    m.stage_id = std::move(stage_id);
    for (double& v : m.z) {
        if (!std::isfinite(v)) {
            v = std::numeric_limits<double>::quiet_NaN();
            ++m.dropped;
        }
    }
    SURFCHANGE_REQUIRE(static_cast<double>(m.dropped) <= kMaxDroppedFraction * static_cast<double>(m.size()),
                       ErrorCode::MalformedInput,
                       "location '" + m.location_id + "': " + std::to_string(m.dropped) + " of " +
                           std::to_string(m.size()) + " pixels are non-finite (limit 1%)");
    m.validate();
    return m;
}

inline HeightMatrix load_matrix_file(const fs::path& path, double dx_um, double dy_um, std::string stage_id)
{
    std::ifstream in(path);
    SURFCHANGE_REQUIRE(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "'");
    return make_height_matrix(parse_matrix(in, path.string()), dx_um, dy_um, path.stem().string(),
                              std::move(stage_id));
}

struct StageManifest {
    std::string stage_label;
    std::string stage_id;
    std::vector<std::string> files;
    double dx_um = kDefaultDxUm;
    double dy_um = kDefaultDyUm;
    std::optional<std::string> timestamp;
};

inline StageManifest read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    SURFCHANGE_REQUIRE(in.good(), ErrorCode::Io, "cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedInput, "manifest '" + path.string() + "': " + e.what());
    }
    StageManifest m;
    try {
        m.stage_label = j.value("stage_label", std::string{});
        m.stage_id = j.value("stage_id", m.stage_label);
        m.files = j.at("files").get<std::vector<std::string>>();
        m.dx_um = j.value("dx_um", kDefaultDxUm);
        m.dy_um = j.value("dy_um", kDefaultDyUm);
        if (j.contains("timestamp")) m.timestamp = j.at("timestamp").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedInput, "manifest '" + path.string() + "': " + e.what());
    }
    return m;
}

inline bool is_matrix_file(const fs::path& p)
{
    const auto ext = p.extension().string();
    return ext == ".csv" || ext == ".txt" || ext == ".dat" || ext == ".asc";
}

/// Load a stage from a directory (with or without manifest.json) or from a
/// manifest file. Locations are ordered by location_id. A non-empty
/// `stage_label` overrides the manifest's.
inline StageRecord load_stage(const fs::path& path, const std::string& stage_label = {})
{
    SURFCHANGE_REQUIRE(fs::exists(path), ErrorCode::Io, "stage path '" + path.string() + "' does not exist");
    StageManifest manifest;
    fs::path base;
    if (fs::is_directory(path)) {
        base = path;
        if (fs::exists(path / kManifestName)) {
            manifest = read_manifest(path / kManifestName);
        } else {
            for (const auto& entry : fs::directory_iterator(path))
                if (entry.is_regular_file() && is_matrix_file(entry.path()))
                    manifest.files.push_back(entry.path().filename().string());
        }
    } else {
        base = path.parent_path();
        manifest = read_manifest(path);
    }
    if (!stage_label.empty()) manifest.stage_label = stage_label;
    if (manifest.stage_label.empty()) manifest.stage_label = fs::absolute(base).lexically_normal().filename().string();
    if (manifest.stage_id.empty()) manifest.stage_id = manifest.stage_label;

    StageRecord rec;
    rec.stage_label = manifest.stage_label;
    rec.stage_id = manifest.stage_id;
    rec.timestamp = manifest.timestamp;
    for (const auto& f : manifest.files)
        rec.locations.push_back(load_matrix_file(base / f, manifest.dx_um, manifest.dy_um, rec.stage_id));
    std::sort(rec.locations.begin(), rec.locations.end(),
              [](const HeightMatrix& a, const HeightMatrix& b) { return a.location_id < b.location_id; });
    rec.validate();
    return rec;
}

inline void write_matrix(std::ostream& out, const HeightMatrix& m)
{
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c) out << ',';
            out << format_roundtrip(m.at(r, c));
        }
        out << '\n';
    }
}

/// Write one CSV per location plus manifest.json; load_stage reads it back exactly.
inline void save_stage(const StageRecord& rec, const fs::path& dir)
{
    SURFCHANGE_REQUIRE(!rec.locations.empty(), ErrorCode::InsufficientData, "cannot save an empty stage");
    std::error_code ec;
    fs::create_directories(dir, ec);
    SURFCHANGE_REQUIRE(!ec && fs::is_directory(dir), ErrorCode::Io, "cannot create directory '" + dir.string() + "'");
    nlohmann::ordered_json j;
    j["stage_label"] = rec.stage_label;
    j["stage_id"] = rec.stage_id;
    j["dx_um"] = rec.locations.front().dx_um;
    j["dy_um"] = rec.locations.front().dy_um;
    if (rec.timestamp) j["timestamp"] = *rec.timestamp;
    auto files = nlohmann::ordered_json::array();
    for (const auto& m : rec.locations) {
        SURFCHANGE_REQUIRE(m.dx_um == rec.locations.front().dx_um && m.dy_um == rec.locations.front().dy_um,
                           ErrorCode::InvalidArgument, "locations of one stage must share the pixel pitch");
        const std::string name = m.location_id + ".csv";
        std::ofstream out(dir / name);
        SURFCHANGE_REQUIRE(out.good(), ErrorCode::Io, "cannot write '" + (dir / name).string() + "'");
        write_matrix(out, m);
        SURFCHANGE_REQUIRE(out.good(), ErrorCode::Io, "write failed for '" + (dir / name).string() + "'");
        files.push_back(name);
    }
    j["files"] = files;
    std::ofstream out(dir / kManifestName);
    SURFCHANGE_REQUIRE(out.good(), ErrorCode::Io, "cannot write manifest in '" + dir.string() + "'");
    out << j.dump(2) << '\n';
}

} // namespace surfchange
