#pragma once

#include "vaedyn/integrate.hpp"
#include "vaedyn/stability.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vaedyn {

namespace fs = std::filesystem;

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& what);

/// Trajectory CSV: t,beta,eps_g followed by flat_labels(M, M*).
std::string trajectory_header(int M, int M_star);
void write_trajectory_csv(const fs::path& path, const Trajectory& tr);
Trajectory read_trajectory_csv(const fs::path& path, int M, int M_star);

/// Plain table writer: header row then rows of doubles or strings, full precision.
class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header);
    CsvWriter& cell(double v);
    CsvWriter& cell(const std::string& v);
    CsvWriter& cell(long v);
    void end_row();
    void close();

private:
    fs::path path_;
    std::string buf_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;
};
CsvTable read_csv(const fs::path& path);

/// JSON report of fixed points: one object per point with kind, branch, beta, rho,
/// eta, eps_g, point (flat order), eigenvalues ([re, im] pairs) and verdict.
std::string fixed_points_json(const std::vector<FixedPointReport>& reports);
void write_fixed_points_json(const fs::path& path, const std::vector<FixedPointReport>& reports);

/// Loads point `index` of a report written by write_fixed_points_json, together with its beta.
struct LoadedPoint {
    Macro point;
    double beta = 0.0;
    double rho = 0.0;
    double eta = 0.0;
};
LoadedPoint read_fixed_point_json(const fs::path& path, std::size_t index);

/// Sweep CSV: beta,kind,max_re_eig,verdict.
void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows);

/// key=value lines, sorted by key. Values may not contain newlines.
using KeyValues = std::map<std::string, std::string>;
void write_key_values(const fs::path& path, const KeyValues& kv);
KeyValues read_key_values(const fs::path& path);
KeyValues parse_key_values(const std::string& text, const std::string& origin);

void write_text(const fs::path& path, const std::string& text);

}  // namespace vaedyn
