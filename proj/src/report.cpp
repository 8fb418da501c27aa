#include "ms/report.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ms {

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace

void ExperimentReport::sort_rows() {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ReportRow& a, const ReportRow& b) {
                         if (a.method != b.method) return false;
                         return a.dof < b.dof;
                     });
}

void ExperimentReport::save_csv(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_csv: cannot open " + path);
    os << "method,dof,energy_pct,l2_pct,lambda_star,iterations\n";
    for (const ReportRow& r : rows)
        os << r.method << "," << r.dof << "," << fmt(r.energy_pct) << ","
           << fmt(r.l2_pct) << "," << fmt(r.lambda_star) << "," << r.iterations
           << "\n";
}

void ExperimentReport::save_json(const std::string& path) const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["version"] = version;
    j["rows"] = nlohmann::json::array();
    for (const ReportRow& r : rows) {
        nlohmann::json row;
        row["method"] = r.method;
        row["dof"] = r.dof;
        row["energy_pct"] = r.energy_pct;
        row["l2_pct"] = r.l2_pct;
        if (std::isnan(r.lambda_star))
            row["lambda_star"] = nullptr;
        else
            row["lambda_star"] = r.lambda_star;
        row["iterations"] = r.iterations;
        j["rows"].push_back(row);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_json: cannot open " + path);
    os << j.dump(2) << "\n";
}

ExperimentReport ExperimentReport::load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_json: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    ExperimentReport rep;
    rep.config_hash = j.at("config_hash").get<std::string>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.version = j.at("version").get<std::string>();
    for (const auto& row : j.at("rows")) {
        ReportRow r;
        r.method = row.at("method").get<std::string>();
        r.dof = row.at("dof").get<int>();
        r.energy_pct = row.at("energy_pct").get<double>();
        r.l2_pct = row.at("l2_pct").get<double>();
        if (!row.at("lambda_star").is_null())
            r.lambda_star = row.at("lambda_star").get<double>();
        r.iterations = row.at("iterations").get<int>();
        rep.rows.push_back(r);
    }
    return rep;
}

std::string stable_hash(const std::string& canonical) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

} // namespace ms
