#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "meancurve/errors.hpp"
#include "meancurve/grid.hpp"
#include "meancurve/population.hpp"
#include "meancurve/types.hpp"

namespace meancurve {

//! Shortest text form that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

//! Parsed curve CSV: header row carries the instants, each data row is
//! "id,stratum,cell,...,cell" and an empty cell marks an unobserved value.
struct CurveTable {
    TimeGrid grid = TimeGrid::uniform(1.0, 2);
    std::vector<long long> ids;
    std::vector<int> raw_strata;
    MatrixRd values; // NaN where missing
    MaskMatrix mask;
    bool has_missing = false;

    int rows() const { return static_cast<int>(values.rows()); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& cell, const std::string& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw IoError(path + " line " + std::to_string(line) + ": cannot parse number '" + cell + "'");
    }
}

inline long long parse_int(const std::string& cell, const std::string& path, std::size_t line) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw IoError(path + " line " + std::to_string(line) + ": cannot parse integer '" + cell + "'");
    }
}

} // namespace detail

inline CurveTable read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> instants;
    std::vector<long long> ids;
    std::vector<int> strata;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<std::uint8_t>> mask_rows;
    bool header_done = false;
    bool any_missing = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const auto cells = detail::split_csv_line(trimmed);
        if (!header_done) {
            if (cells.size() < 4)
                throw IoError(path + " line " + std::to_string(line_no) +
                              ": header needs id, stratum and at least 2 instants");
            for (std::size_t c = 2; c < cells.size(); ++c)
                instants.push_back(detail::parse_double(detail::trim(cells[c]), path, line_no));
            header_done = true;
            continue;
        }
        if (cells.size() != instants.size() + 2)
            throw IoError(path + " line " + std::to_string(line_no) + ": expected " +
                          std::to_string(instants.size() + 2) + " cells, got " +
                          std::to_string(cells.size()));
        ids.push_back(detail::parse_int(detail::trim(cells[0]), path, line_no));
        const long long lab = detail::parse_int(detail::trim(cells[1]), path, line_no);
        if (lab < 0)
            throw IoError(path + " line " + std::to_string(line_no) + ": negative stratum label");
        strata.push_back(static_cast<int>(lab));
        std::vector<double> row(instants.size(), 0.0);
        std::vector<std::uint8_t> mrow(instants.size(), 1);
        for (std::size_t c = 0; c < instants.size(); ++c) {
            const std::string cell = detail::trim(cells[c + 2]);
            if (cell.empty()) {
                row[c] = std::numeric_limits<double>::quiet_NaN();
                mrow[c] = 0;
                any_missing = true;
            } else {
                row[c] = detail::parse_double(cell, path, line_no);
            }
        }
        rows.push_back(std::move(row));
        mask_rows.push_back(std::move(mrow));
    }
    if (!header_done) throw IoError(path + ": no header row found");
    if (rows.empty()) throw IoError(path + ": no data rows found");

    CurveTable table;
    table.grid = TimeGrid::from_instants(std::move(instants));
    table.ids = std::move(ids);
    table.raw_strata = std::move(strata);
    table.has_missing = any_missing;
    const int n = static_cast<int>(rows.size());
    const int d = table.grid.size();
    table.values.resize(n, d);
    table.mask.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            table.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            table.mask(i, j) = mask_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    return table;
}

namespace detail {

inline void write_header_block(std::ofstream& out, const std::vector<std::string>& header_lines) {
    for (const auto& h : header_lines) out << "# " << h << "\n";
}

inline void write_instants_row(std::ofstream& out, const TimeGrid& grid) {
    out << "id,stratum";
    for (int j = 0; j < grid.size(); ++j) out << ',' << format_double(grid[j]);
    out << "\n";
}

} // namespace detail

//! Write a full population (no missing cells) in the curve CSV format.
inline void write_population_csv(const std::string& path, const CurvePopulation& pop,
                                 const std::vector<std::string>& header_lines) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    detail::write_header_block(out, header_lines);
    detail::write_instants_row(out, pop.grid);
    for (int k = 0; k < pop.size(); ++k) {
        out << (k + 1) << ',' << (pop.strata[static_cast<std::size_t>(k)] + 1);
        for (int j = 0; j < pop.grid.size(); ++j) out << ',' << format_double(pop.values(k, j));
        out << "\n";
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

//! Write sampled rows with their observation mask; unobserved cells are empty.
inline void write_sample_csv(const std::string& path, const TimeGrid& grid,
                             const std::vector<long long>& ids, const std::vector<int>& raw_strata,
                             const MatrixRd& values, const MaskMatrix& mask,
                             const std::vector<std::string>& header_lines) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    detail::write_header_block(out, header_lines);
    detail::write_instants_row(out, grid);
    for (int i = 0; i < static_cast<int>(values.rows()); ++i) {
        out << ids[static_cast<std::size_t>(i)] << ',' << raw_strata[static_cast<std::size_t>(i)];
        for (int j = 0; j < grid.size(); ++j) {
            out << ',';
            if (mask(i, j)) out << format_double(values(i, j));
        }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

//! One long-format row per (t, series): plot-ready output.
struct LongRow {
    double t = 0.0;
    std::string series;
    double value = 0.0;
    double variance = std::numeric_limits<double>::quiet_NaN();
};

inline void write_long_csv(const std::string& path, const std::vector<LongRow>& rows,
                           const std::vector<std::string>& header_lines) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    detail::write_header_block(out, header_lines);
    out << "t,estimator,value,variance,sd\n";
    for (const auto& r : rows) {
        out << format_double(r.t) << ',' << r.series << ',' << format_double(r.value) << ',';
        if (!std::isnan(r.variance)) {
            out << format_double(r.variance) << ',';
            out << format_double(r.variance >= 0.0 ? std::sqrt(r.variance) : std::numeric_limits<double>::quiet_NaN());
        } else {
            out << ',';
        }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

} // namespace meancurve
