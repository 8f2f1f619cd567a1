#include "vaedyn/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vaedyn {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    if (first < last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw ConfigError(what + ": not a number: '" + s + "'");
    return v;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw ConfigError("write failed: " + path.string());
}

namespace {
std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}
}  // namespace

std::string trajectory_header(int M, int M_star) {
    std::string h = "t,beta,eps_g";
    for (const auto& l : flat_labels(M, M_star)) h += "," + l;
    return h;
}

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) buf_ += (i ? "," : "") + header[i];
    buf_ += '\n';
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(long v) { return cell(std::to_string(v)); }

CsvWriter& CsvWriter::cell(const std::string& v) {
    if (in_row_ == columns_) throw ConfigError("csv " + path_.string() + ": too many cells in row");
    if (in_row_) buf_ += ',';
    buf_ += v;
    ++in_row_;
    return *this;
}

void CsvWriter::end_row() {
    if (in_row_ != columns_) throw ConfigError("csv " + path_.string() + ": short row");
    buf_ += '\n';
    in_row_ = 0;
}

void CsvWriter::close() { write_text(path_, buf_); }

void write_trajectory_csv(const fs::path& path, const Trajectory& tr) {
    tr.validate();
    const int M = tr.empty() ? 0 : tr.states.front().M();
    const int K = tr.empty() ? 0 : tr.states.front().M_star();
    std::string buf = trajectory_header(M, K) + "\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        buf += format_double(tr.times[i]) + "," + format_double(tr.beta[i]) + "," + format_double(tr.eps_g[i]);
        const VectorXd v = flatten(tr.states[i]);
        for (Eigen::Index j = 0; j < v.size(); ++j) buf += "," + format_double(v[j]);
        buf += '\n';
    }
    write_text(path, buf);
}

CsvTable read_csv(const fs::path& path) {
    std::istringstream in(slurp(path));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty csv");
    t.header = split(line, ',');
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split(line, ',');
        if (row.size() != t.header.size())
            throw ConfigError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                              std::to_string(row.size()) + " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return int(i);
    throw ConfigError("csv: missing column '" + name + "'");
}

Trajectory read_trajectory_csv(const fs::path& path, int M, int M_star) {
    const CsvTable t = read_csv(path);
    if (t.header != split(trajectory_header(M, M_star), ','))
        throw ConfigError(path.string() + ": header does not match the trajectory schema");
    Trajectory tr;
    const int n = flat_size(M, M_star);
    for (const auto& row : t.rows) {
        tr.times.push_back(parse_double(row[0], "t"));
        tr.beta.push_back(parse_double(row[1], "beta"));
        tr.eps_g.push_back(parse_double(row[2], "eps_g"));
        VectorXd v(n);
        for (int j = 0; j < n; ++j) v[j] = parse_double(row[3 + j], t.header[3 + j]);
        tr.states.push_back(unflatten<double>(v, M, M_star));
    }
    tr.validate();
    return tr;
}

std::string fixed_points_json(const std::vector<FixedPointReport>& reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["kind"] = to_string(r.kind);
        j["branch"] = r.branch_label();
        j["beta"] = r.beta;
        j["rho"] = r.rho;
        j["eta"] = r.eta;
        j["M"] = r.point.M();
        j["M_star"] = r.point.M_star();
        j["eps_g"] = generalization_error(r.point, r.rho);
        const VectorXd v = flatten(r.point);
        j["labels"] = flat_labels(r.point.M(), r.point.M_star());
        j["point"] = std::vector<double>(v.data(), v.data() + v.size());
        nlohmann::ordered_json eig = nlohmann::ordered_json::array();
        for (Eigen::Index k = 0; k < r.eigenvalues.size(); ++k)
            eig.push_back({r.eigenvalues[k].real(), r.eigenvalues[k].imag()});
        j["eigenvalues"] = eig;
        j["max_re_eig"] = r.max_real();
        j["verdict"] = to_string(r.verdict);
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

void write_fixed_points_json(const fs::path& path, const std::vector<FixedPointReport>& reports) {
    write_text(path, fixed_points_json(reports));
}

LoadedPoint read_fixed_point_json(const fs::path& path, std::size_t index) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(slurp(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!arr.is_array() || index >= arr.size())
        throw ConfigError(path.string() + ": no fixed point at index " + std::to_string(index));
    try {
        const auto& j = arr[index];
        const int M = j.at("M"), K = j.at("M_star");
        const auto pt = j.at("point").get<std::vector<double>>();
        const Eigen::Map<const VectorXd> v(pt.data(), Eigen::Index(pt.size()));
        return {unflatten<double>(v, M, K), j.at("beta"), j.at("rho"), j.at("eta")};
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
    CsvWriter w(path, {"beta", "kind", "max_re_eig", "verdict"});
    for (const auto& r : rows) {
        w.cell(r.beta).cell(to_string(r.kind)).cell(r.max_re_eig).cell(to_string(r.verdict));
        w.end_row();
    }
    w.close();
}

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const fs::path& path) { return parse_key_values(slurp(path), path.string()); }

void write_key_values(const fs::path& path, const KeyValues& kv) {
    std::string buf;
    for (const auto& [k, v] : kv) {
        if (v.find('\n') != std::string::npos) throw ConfigError("manifest value for '" + k + "' contains a newline");
        buf += k + "=" + v + "\n";
    }
    write_text(path, buf);
}

}  // namespace vaedyn
