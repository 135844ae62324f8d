#pragma once

// Serialization: iterate logs as CSV, grid summaries and theorem reports as JSON.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aar/errors.hpp"
#include "aar/harness.hpp"
#include "aar/theorem_lab.hpp"

namespace aar {

inline constexpr const char* kCsvHeader = "k,oracle_calls,f,grad_norm,step_kind,accepted,rho_k";

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw InputError("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline void write_csv(const RunLog& log, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const IterateRecord& r : log.rows) {
        out << r.k << ',' << r.oracle_calls << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ','
            << to_string(r.step_kind) << ',' << (r.accepted ? "true" : "false") << ',';
        if (r.rho && r.step_kind != StepKind::picard_restart) out << format_double(*r.rho);
        out << '\n';
    }
}

inline void write_csv(const RunLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    write_csv(log, out);
    out.flush();
    if (!out) throw InputError("write to '" + path + "' failed");
}

/// Row of a CSV written by write_csv; rho is empty when the cell was.
struct CsvRow {
    std::uint64_t k = 0;
    std::uint64_t oracle_calls = 0;
    double f = 0.0;
    double grad_norm = 0.0;
    StepKind step_kind = StepKind::picard_restart;
    bool accepted = true;
    std::optional<double> rho;
};

inline std::vector<CsvRow> read_csv_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != kCsvHeader) {
        throw ParseError(1, std::string("expected header '") + kCsvHeader + "'");
    }
    std::vector<CsvRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view content = detail::trim(line);
        if (content.empty()) continue;
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = content.find(',', start);
            cells.push_back(content.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 7) throw ParseError(line_no, "expected 7 columns, got " + std::to_string(cells.size()));
        auto integer = [&](std::string_view s, const char* col) {
            std::uint64_t v = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line_no, std::string("bad ") + col);
            return v;
        };
        auto real = [&](std::string_view s, const char* col) {
            const auto v = detail::parse_double(s);
            if (!v) throw ParseError(line_no, std::string("bad ") + col);
            return *v;
        };
        CsvRow row;
        row.k = integer(cells[0], "k");
        row.oracle_calls = integer(cells[1], "oracle_calls");
        row.f = real(cells[2], "f");
        row.grad_norm = real(cells[3], "grad_norm");
        try {
            row.step_kind = parse_step_kind(cells[4]);
        } catch (const InputError& e) {
            throw ParseError(line_no, e.what());
        }
        if (cells[5] == "true") {
            row.accepted = true;
        } else if (cells[5] == "false") {
            row.accepted = false;
        } else {
            throw ParseError(line_no, "bad accepted");
        }
        if (!cells[6].empty()) row.rho = real(cells[6], "rho_k");
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["problem"] = std::string(to_string(c.problem));
    j["solver"] = std::string(to_string(c.solver));
    j["m"] = c.m;
    if (c.dataset.csv_path) {
        j["dataset"] = *c.dataset.csv_path;
    } else {
        j["dataset"] = {{"n_samples", c.dataset.n_samples}, {"dim", c.dataset.dim}, {"seed", c.dataset.seed}};
    }
    nlohmann::json params = nlohmann::json::object();
    if (c.params.gamma) params["gamma"] = *c.params.gamma;
    if (c.params.nu) params["nu"] = *c.params.nu;
    if (c.params.c1) params["c1"] = *c.params.c1;
    if (c.params.c2) params["c2"] = *c.params.c2;
    if (c.params.c3) params["c3"] = *c.params.c3;
    j["params"] = params;
    j["grad_tol"] = c.grad_tol;
    j["budget"] = c.oracle_budget;
    j["seed"] = c.seed;
    j["lambda"] = c.lambda;
    j["mu_st"] = c.mu_st;
    if (c.problem == Problem::quadratic) j["kappa"] = c.kappa;
    if (c.safeguard_cond_bound) j["cond_bound"] = *c.safeguard_cond_bound;
    return j;
}

/// Non-finite doubles become null in JSON.
inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json summary_entry(const RunLog& log) {
    nlohmann::json j;
    j["config"] = config_to_json(log.config);
    if (log.error) {
        j["final_status"] = "error";
        j["error"] = *log.error;
        j["final_grad_norm"] = nullptr;
        j["total_oracle_calls"] = 0;
        return j;
    }
    j["final_status"] = std::string(to_string(log.final_status));
    j["final_grad_norm"] = json_number(log.final_grad_norm());
    j["total_oracle_calls"] = log.total_oracle_calls();
    j["f_star_estimate"] = json_number(log.f_star_estimate);
    return j;
}

inline nlohmann::json grid_summary(const std::vector<RunLog>& logs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const RunLog& log : logs) arr.push_back(summary_entry(log));
    return arr;
}

inline nlohmann::json report_to_json(const TheoremReport& r) {
    return {{"name", r.name},
            {"instances_checked", r.instances_checked},
            {"max_violation", json_number(r.max_violation)},
            {"pass", r.pass}};
}

inline nlohmann::json reports_to_json(const std::vector<TheoremReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const TheoremReport& r : reports) arr.push_back(report_to_json(r));
    return arr;
}

}  // namespace aar
