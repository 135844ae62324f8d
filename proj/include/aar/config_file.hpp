#pragma once

// Key/value run descriptions. One `key = value` per line, `#` starts a
// comment, strings may be quoted. A comma-separated value turns the key into
// a grid axis; the grid is the Cartesian product of all axes, first key
// outermost.
//
//   problem = nls
//   solver  = gd, aa_r, globalized_aa_r
//   m       = 5, 10

#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aar/errors.hpp"
#include "aar/harness.hpp"
#include "aar/objectives.hpp"

namespace aar {

using Setting = std::pair<std::string, std::vector<std::string>>;

namespace detail {

inline std::string unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        s = s.substr(1, s.size() - 2);
    }
    return std::string(s);
}

inline double to_real(const std::string& key, const std::string& v) {
    const auto d = parse_double(v);
    if (!d) throw InputError("config: '" + key + "' expects a number, got '" + v + "'");
    return *d;
}

inline std::uint64_t to_count(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw InputError("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InputError("config: '" + key + "' expects true or false, got '" + v + "'");
}

}  // namespace detail

/// Applies one scalar setting. Unknown keys are input errors.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "problem") c.problem = parse_problem(value);
    else if (key == "solver") c.solver = parse_solver(value);
    else if (key == "m") c.m = static_cast<int>(to_count(key, value));
    else if (key == "gamma") c.params.gamma = to_real(key, value);
    else if (key == "nu") c.params.nu = to_real(key, value);
    else if (key == "c1") c.params.c1 = to_real(key, value);
    else if (key == "c2") c.params.c2 = to_real(key, value);
    else if (key == "c3") c.params.c3 = to_real(key, value);
    else if (key == "grad_tol") c.grad_tol = to_real(key, value);
    else if (key == "budget") c.oracle_budget = to_count(key, value);
    else if (key == "seed") c.seed = to_count(key, value);
    else if (key == "dataset") c.dataset.csv_path = value;
    else if (key == "n_samples") c.dataset.n_samples = static_cast<Eigen::Index>(to_count(key, value));
    else if (key == "dim") c.dataset.dim = static_cast<Eigen::Index>(to_count(key, value));
    else if (key == "data_seed") c.dataset.seed = to_count(key, value);
    else if (key == "lambda") c.lambda = to_real(key, value);
    else if (key == "mu_st") c.mu_st = to_real(key, value);
    else if (key == "kappa") c.kappa = to_real(key, value);
    else if (key == "cond_bound") c.safeguard_cond_bound = to_real(key, value);
    else if (key == "rho") c.instrument_rho = to_bool(key, value);
    else if (key == "ls_method") {
        if (value == "qr") c.ls_method = LeastSquaresMethod::qr;
        else if (value == "lsqr") c.ls_method = LeastSquaresMethod::lsqr;
        else throw InputError("config: ls_method must be qr or lsqr");
    } else {
        throw InputError("config: unknown key '" + key + "'");
    }
}

inline std::vector<Setting> parse_settings(std::istream& in) {
    std::vector<Setting> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view content(line);
        if (const auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
        content = detail::trim(content);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
        const std::string key(detail::trim(content.substr(0, eq)));
        if (key.empty()) throw ParseError(line_no, "empty key");
        for (const auto& s : out) {
            if (s.first == key) throw ParseError(line_no, "duplicate key '" + key + "'");
        }
        std::vector<std::string> values;
        std::string_view rest = content.substr(eq + 1);
        while (true) {
            const auto comma = rest.find(',');
            std::string v = detail::unquote(rest.substr(0, comma));
            if (v.empty()) throw ParseError(line_no, "empty value for '" + key + "'");
            values.push_back(std::move(v));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        out.emplace_back(key, std::move(values));
    }
    return out;
}

inline std::vector<Setting> parse_settings(const std::string& text) {
    std::istringstream in(text);
    return parse_settings(in);
}

/// Replaces (or appends) settings; used for command-line overrides.
inline void override_settings(std::vector<Setting>& base, const std::vector<Setting>& overrides) {
    for (const auto& o : overrides) {
        auto it = std::find_if(base.begin(), base.end(), [&](const Setting& s) { return s.first == o.first; });
        if (it != base.end()) it->second = o.second;
        else base.push_back(o);
    }
}

/// Cartesian product of the settings applied on top of `base`.
inline std::vector<RunConfig> expand_grid(const std::vector<Setting>& settings, const RunConfig& base = {}) {
    std::vector<RunConfig> out{base};
    for (const auto& [key, values] : settings) {
        std::vector<RunConfig> next;
        next.reserve(out.size() * values.size());
        for (const RunConfig& c : out) {
            for (const std::string& v : values) {
                RunConfig copy = c;
                apply_setting(copy, key, v);
                next.push_back(std::move(copy));
            }
        }
        out = std::move(next);
    }
    for (const RunConfig& c : out) c.validate();
    return out;
}

}  // namespace aar
