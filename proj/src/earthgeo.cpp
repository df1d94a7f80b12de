#include "diffconst/earthgeo.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace diffconst {

GroundTargetSet::GroundTargetSet(std::vector<GroundTarget> targets) : targets_(std::move(targets)) {
    for (const GroundTarget& t : targets_) {
        if (!(t.weight > 0.0) || !std::isfinite(t.weight)) throw GeoError("target weights must be positive and finite");
        total_weight_ += t.weight;
    }
}

GroundTarget GroundTargetSet::make_target(double lat_rad, double lon_rad, double weight) {
    GroundTarget t;
    t.lat = lat_rad;
    t.lon = lon_rad;
    const double cl = std::cos(lat_rad);
    t.up = {cl * std::cos(lon_rad), cl * std::sin(lon_rad), std::sin(lat_rad)};
    t.ecef = {kEarthRadius * t.up[0], kEarthRadius * t.up[1], kEarthRadius * t.up[2]};
    t.weight = weight;
    return t;
}

std::vector<double> GroundTargetSet::weights() const {
    std::vector<double> w;
    w.reserve(targets_.size());
    for (const GroundTarget& t : targets_) w.push_back(t.weight);
    return w;
}

void SimWindow::validate() const {
    if (steps < 2) throw GeoError("SimWindow: at least two time steps are required");
    if (!(horizon_s > 0.0)) throw GeoError("SimWindow: horizon must be positive");
}

std::vector<double> SimWindow::times() const {
    std::vector<double> t(static_cast<std::size_t>(steps));
    const double dt = step_s();
    for (int k = 0; k < steps; ++k) t[static_cast<std::size_t>(k)] = k * dt;
    return t;
}

double gmst_at_epoch(const UtcInstant& epoch) {
    // Julian centuries of UT1 from J2000; split date keeps the fraction exact.
    const double tut1 = ((epoch.jd_day - kJ2000) + epoch.jd_fraction) / 36525.0;
    double seconds = -6.2e-6 * tut1 * tut1 * tut1 + 0.093104 * tut1 * tut1 +
                     (876600.0 * 3600.0 + 8640184.812866) * tut1 + 67310.54841;
    seconds = std::fmod(seconds, 86400.0);
    return wrap_two_pi(seconds * (kTwoPi / 86400.0));
}

double gmst(const UtcInstant& epoch, double dt, double offset) {
    return wrap_two_pi(gmst_at_epoch(epoch) + kEarthRotationRate * dt + offset);
}

GroundTargetSet latlon_grid(int n_lat, int n_lon, double lat_max_deg) {
    if (n_lat < 1 || n_lon < 1) throw GeoError("latlon_grid: grid dimensions must be at least 1");
    if (!(lat_max_deg > 0.0 && lat_max_deg <= 90.0)) throw GeoError("latlon_grid: lat_max must be in (0, 90]");
    const double lat_band = 2.0 * lat_max_deg / n_lat;
    const double lon_band = 360.0 / n_lon;
    std::vector<GroundTarget> targets;
    targets.reserve(static_cast<std::size_t>(n_lat) * static_cast<std::size_t>(n_lon));
    for (int b = 0; b < n_lat; ++b) {
        const double lat = (-lat_max_deg + (b + 0.5) * lat_band) * kDeg;
        const double w = std::cos(lat);
        for (int l = 0; l < n_lon; ++l) {
            const double lon = (l + 0.5) * lon_band * kDeg;
            targets.push_back(GroundTargetSet::make_target(lat, lon, w));
        }
    }
    return GroundTargetSet(std::move(targets));
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto first = cell.find_first_not_of(" \t\r");
        const auto last = cell.find_last_not_of(" \t\r");
        cells.push_back(first == std::string::npos ? std::string() : cell.substr(first, last - first + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_number(const std::string& cell, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw GeoError(where + ": not a number: '" + cell + "'");
    }
    if (used != cell.size() || !std::isfinite(v)) throw GeoError(where + ": not a number: '" + cell + "'");
    return v;
}

}  // namespace

GroundTargetSet parse_targets(std::istream& in, const std::string& source_name) {
    std::string line;
    int line_no = 0;
    int lat_col = -1, lon_col = -1, weight_col = -1;
    std::size_t ncols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto header = split_csv(line);
        ncols = header.size();
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == "lat_deg") lat_col = static_cast<int>(c);
            if (header[c] == "lon_deg") lon_col = static_cast<int>(c);
            if (header[c] == "weight") weight_col = static_cast<int>(c);
        }
        break;
    }
    if (ncols == 0) throw GeoError(source_name + ": empty target file");
    if (lat_col < 0 || lon_col < 0) {
        throw GeoError(source_name + ":" + std::to_string(line_no) + ": header must contain lat_deg and lon_deg");
    }

    std::vector<GroundTarget> targets;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        const auto cells = split_csv(line);
        if (cells.size() != ncols) {
            throw GeoError(where + ": expected " + std::to_string(ncols) + " columns, found " +
                           std::to_string(cells.size()));
        }
        const double lat = parse_number(cells[static_cast<std::size_t>(lat_col)], where);
        const double lon = parse_number(cells[static_cast<std::size_t>(lon_col)], where);
        if (lat < -90.0 || lat > 90.0) throw GeoError(where + ": latitude out of range");
        double weight = std::cos(lat * kDeg);
        if (weight_col >= 0) weight = parse_number(cells[static_cast<std::size_t>(weight_col)], where);
        if (!(weight > 0.0)) throw GeoError(where + ": weight must be positive");
        targets.push_back(GroundTargetSet::make_target(lat * kDeg, lon * kDeg, weight));
    }
    if (targets.empty()) throw GeoError(source_name + ": no targets");
    return GroundTargetSet(std::move(targets));
}

GroundTargetSet load_targets(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw GeoError("cannot open target file " + path.string());
    return parse_targets(in, path.string());
}

}  // namespace diffconst
