#include "hybridtarget/outputs.hpp"

#include "hybridtarget/csv.hpp"
#include "hybridtarget/error.hpp"

#include <sstream>

namespace ht {

namespace {

constexpr std::string_view kIntercept = "(intercept)";

std::string num(double v) { return csv::format_double(v); }

double parse_cell(const std::string& cell, const std::string& source, std::size_t line) {
    auto v = csv::parse_double(cell);
    if (!v) throw Error(ErrorCode::InvalidArgument, source + ":" + std::to_string(line) + ": '" + cell + "' is not a number");
    return *v;
}

std::map<std::string, std::string> comment_fields(const csv::Table& table) {
    std::map<std::string, std::string> out;
    for (const auto& line : table.comments) {
        const auto start = line.find_first_not_of("# ");
        if (start == std::string::npos) continue;
        const auto body = line.substr(start);
        const auto eq = body.find('=');
        if (eq != std::string::npos) out[body.substr(0, eq)] = body.substr(eq + 1);
    }
    return out;
}

std::vector<std::string> split_semicolons(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) out.push_back(item);
    return out;
}

} // namespace

std::string coefficients_to_csv(const std::string& method, const PosteriorSamples& samples) {
    std::ostringstream out;
    out << "method,name,posterior_mean,posterior_sd,q2.5,q97.5\n";
    for (const auto& s : samples.summarize()) {
        out << csv::escape(method) << ',' << csv::escape(s.name) << ',' << num(s.mean) << ',' << num(s.sd) << ','
            << num(s.q025) << ',' << num(s.q975) << '\n';
    }
    return out.str();
}

CoefficientTable load_coefficients(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const std::string source = path.string();
    const auto name_col = table.require_column("name", source);
    const auto mean_col = table.require_column("posterior_mean", source);
    CoefficientTable out;
    out.mean.resize(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out.names.push_back(table.rows[r][name_col]);
        out.mean[static_cast<Eigen::Index>(r)] = parse_cell(table.rows[r][mean_col], source, table.line_numbers[r]);
    }
    return out;
}

std::string standardized_to_csv(const std::string& method, const std::vector<std::string>& names,
                                const Eigen::VectorXd& coefs) {
    if (names.size() != static_cast<std::size_t>(coefs.size())) throw Error(ErrorCode::DimensionMismatch, "name count");
    const double mean_abs = coefs.cwiseAbs().mean();
    if (!(mean_abs > 0.0)) throw Error(ErrorCode::AllZero, "all coefficients are zero");
    std::ostringstream out;
    out << "method,name,coefficient,standardized\n";
    for (std::size_t p = 0; p < names.size(); ++p) {
        const double c = coefs[static_cast<Eigen::Index>(p)];
        out << csv::escape(method) << ',' << csv::escape(names[p]) << ',' << num(c) << ',' << num(c / mean_abs) << '\n';
    }
    return out.str();
}

std::string correlations_to_csv(const std::vector<CorrelationRow>& rows) {
    std::ostringstream out;
    out << "community_id,ranker_id,correlation\n";
    for (const auto& r : rows) out << csv::escape(r.community_id) << ',' << csv::escape(r.ranker_id) << ',' << num(r.correlation) << '\n';
    return out.str();
}

std::string samples_to_csv(const PosteriorSamples& s) {
    std::ostringstream out;
    out << "# omega_support=" << num(s.spec.omega_support[0]) << ';' << num(s.spec.omega_support[1]) << ';'
        << num(s.spec.omega_support[2]) << '\n';
    out << "# period=" << s.spec.period << '\n';
    out << "# prior_source=" << s.spec.prior_source << '\n';
    out << "# multi_ranker=" << (s.spec.multi_ranker ? 1 : 0) << '\n';
    out << "# auxiliary=" << (s.spec.auxiliary ? 1 : 0) << '\n';
    out << "# elite_columns=";
    for (std::size_t i = 0; i < s.elite_columns.size(); ++i) out << (i ? ";" : "") << s.elite_columns[i];
    out << '\n';

    out << "draw";
    for (const auto& n : s.covariate_names) out << ',' << csv::escape("delta:" + n);
    if (s.spec.multi_ranker) {
        for (const auto& r : s.ranker_ids) out << ',' << csv::escape("omega:" + r);
    }
    const bool aux = s.spec.auxiliary && s.gamma.size() > 0;
    if (aux) {
        for (const auto& n : s.covariate_names) out << ',' << csv::escape("gamma:" + n);
        out << ",gamma:" << kIntercept << ",sigma_psi_sq";
        for (const auto& n : s.covariate_names) out << ',' << csv::escape("mu:" + n);
        out << ",mu:" << kIntercept << ",sigma_hyper";
    }
    out << '\n';
    for (std::size_t b = 0; b < s.draws(); ++b) {
        const auto i = static_cast<Eigen::Index>(b);
        out << b;
        for (Eigen::Index p = 0; p < s.delta.cols(); ++p) out << ',' << num(s.delta(i, p));
        if (s.spec.multi_ranker) {
            for (Eigen::Index r = 0; r < s.omega.cols(); ++r) out << ',' << num(s.omega(i, r));
        }
        if (aux) {
            for (Eigen::Index p = 0; p < s.gamma.cols(); ++p) out << ',' << num(s.gamma(i, p));
            out << ',' << num(s.sigma_psi_sq[i]);
            for (Eigen::Index p = 0; p < s.mu.cols(); ++p) out << ',' << num(s.mu(i, p));
            out << ',' << num(s.sigma_hyper[i]);
        }
        out << '\n';
    }
    return out.str();
}

PosteriorSamples load_samples(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const std::string source = path.string();
    const auto fields = comment_fields(table);
    PosteriorSamples s;
    if (auto it = fields.find("omega_support"); it != fields.end()) {
        const auto parts = split_semicolons(it->second);
        if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, source + ": omega_support needs 3 values");
        for (std::size_t l = 0; l < 3; ++l) s.spec.omega_support[l] = parse_cell(parts[l], source, 1);
    }
    if (auto it = fields.find("period"); it != fields.end()) s.spec.period = static_cast<int>(parse_cell(it->second, source, 1));
    if (auto it = fields.find("prior_source"); it != fields.end()) s.spec.prior_source = it->second;
    if (auto it = fields.find("elite_columns"); it != fields.end()) {
        for (const auto& part : split_semicolons(it->second)) s.elite_columns.push_back(static_cast<std::size_t>(parse_cell(part, source, 1)));
    }
    s.spec.auxiliary = fields.contains("auxiliary") && fields.at("auxiliary") == "1";

    std::vector<std::size_t> delta_cols, omega_cols, gamma_cols, mu_cols;
    std::optional<std::size_t> psi_col, hyper_col;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        const auto& h = table.header[j];
        if (h.starts_with("delta:")) {
            delta_cols.push_back(j);
            s.covariate_names.push_back(h.substr(6));
        } else if (h.starts_with("omega:")) {
            omega_cols.push_back(j);
            s.ranker_ids.push_back(h.substr(6));
        } else if (h.starts_with("gamma:")) {
            gamma_cols.push_back(j);
        } else if (h.starts_with("mu:")) {
            mu_cols.push_back(j);
        } else if (h == "sigma_psi_sq") {
            psi_col = j;
        } else if (h == "sigma_hyper") {
            hyper_col = j;
        }
    }
    if (delta_cols.empty()) throw Error(ErrorCode::MissingColumn, source + ": no delta:* columns");
    s.spec.multi_ranker = !omega_cols.empty();
    if (fields.contains("multi_ranker")) s.spec.multi_ranker = fields.at("multi_ranker") == "1";

    const auto b = static_cast<Eigen::Index>(table.rows.size());
    auto fill = [&](const std::vector<std::size_t>& cols, Eigen::MatrixXd& m) {
        m.resize(b, static_cast<Eigen::Index>(cols.size()));
        for (Eigen::Index r = 0; r < b; ++r) {
            const auto& row = table.rows[static_cast<std::size_t>(r)];
            for (std::size_t c = 0; c < cols.size(); ++c) {
                m(r, static_cast<Eigen::Index>(c)) = parse_cell(row[cols[c]], source, table.line_numbers[static_cast<std::size_t>(r)]);
            }
        }
    };
    fill(delta_cols, s.delta);
    fill(omega_cols, s.omega);
    if (!gamma_cols.empty()) fill(gamma_cols, s.gamma);
    if (!mu_cols.empty()) fill(mu_cols, s.mu);
    if (psi_col) {
        Eigen::MatrixXd m;
        fill({*psi_col}, m);
        s.sigma_psi_sq = m.col(0);
    }
    if (hyper_col) {
        Eigen::MatrixXd m;
        fill({*hyper_col}, m);
        s.sigma_hyper = m.col(0);
    }
    s.config.total_iterations = static_cast<int>(b);
    s.config.burn_in = 0;
    return s;
}

std::string scaling_to_csv(const ScalingInfo& scaling) {
    std::ostringstream out;
    out << "name,kind,divisor\n";
    for (const auto& c : scaling.columns) {
        out << csv::escape(c.name) << ',' << (c.kind == ColumnKind::Binary ? "binary" : "continuous") << ','
            << num(c.divisor) << '\n';
    }
    return out.str();
}

ScalingInfo load_scaling(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const std::string source = path.string();
    const auto name_col = table.require_column("name", source);
    const auto kind_col = table.require_column("kind", source);
    const auto div_col = table.require_column("divisor", source);
    ScalingInfo info;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        ColumnScaling c;
        c.name = row[name_col];
        c.kind = row[kind_col] == "binary" ? ColumnKind::Binary : ColumnKind::Continuous;
        c.divisor = parse_cell(row[div_col], source, table.line_numbers[r]);
        if (!(c.divisor > 0.0)) throw Error(ErrorCode::InvalidArgument, source + ": divisor must be positive");
        info.columns.push_back(std::move(c));
    }
    return info;
}

std::string scores_to_csv(const std::vector<Household>& households, const Eigen::VectorXd& scores,
                          const std::map<std::string, std::set<std::string>>& selected) {
    std::ostringstream out;
    out << "household_id,community_id,score,selected\n";
    for (std::size_t i = 0; i < households.size(); ++i) {
        const auto& h = households[i];
        auto it = selected.find(h.community_id);
        const bool chosen = it != selected.end() && it->second.contains(h.id);
        out << csv::escape(h.id) << ',' << csv::escape(h.community_id) << ',' << num(scores[static_cast<Eigen::Index>(i)]) << ','
            << (chosen ? 1 : 0) << '\n';
    }
    return out.str();
}

} // namespace ht
