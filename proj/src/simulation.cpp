#include "grpnorm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace grpnorm {

using nlohmann::json;

BinStrategy bin_strategy_from_name(const std::string& name) {
    if (name == "fixed-range" || name == "fixed") return BinStrategy::FixedRange;
    if (name == "sample-range" || name == "sample") return BinStrategy::SampleRange;
    throw DomainError("unknown bin strategy '" + name + "' (valid: fixed-range, sample-range)");
}

std::string bin_strategy_name(BinStrategy s) {
    return s == BinStrategy::FixedRange ? "fixed-range" : "sample-range";
}

std::vector<std::string> param_names(Eigen::Index d) {
    std::vector<std::string> out;
    if (d == 1) return {"mu", "var"};
    for (Eigen::Index i = 0; i < d; ++i) out.push_back("mu" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < d; ++i) out.push_back("var" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (d == 2)
                out.push_back("rho");
            else
                out.push_back("rho" + std::to_string(i + 1) + std::to_string(j + 1));
        }
    return out;
}

std::vector<double> param_vector(const GaussianParams& p) {
    const auto d = p.dim();
    std::vector<double> v;
    for (Eigen::Index i = 0; i < d; ++i) v.push_back(p.mean()[i]);
    for (Eigen::Index i = 0; i < d; ++i) v.push_back(p.cov()(i, i));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) v.push_back(p.rho(i, j));
    return v;
}

GroupedTable simulate_dataset(const Scenario& sc, int rep) {
    if (rep < 0 || rep >= sc.reps) throw IndexOutOfRange("rep outside [0, reps)");
    const auto d = sc.true_params.dim();
    if (sc.bins_per_axis.size() != static_cast<std::size_t>(d))
        throw ShapeMismatch("bins_per_axis length must equal dimension");
    for (int k : sc.bins_per_axis)
        if (k < 2) throw DomainError("bins_per_axis entries must be >= 2");

    Rng gen(RngState{sc.seed, 0}.child(static_cast<std::uint64_t>(rep), 0xD5A7A5E7ULL));
    const auto& L = sc.true_params.chol();
    std::vector<std::vector<double>> data(sc.n, std::vector<double>(d));
    Eigen::VectorXd z(d);
    for (int i = 0; i < sc.n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) z[j] = std_normal_quantile(gen.next_open());
        for (Eigen::Index j = 0; j < d; ++j) {
            double x = sc.true_params.mean()[j];
            for (Eigen::Index k = 0; k <= j; ++k) x += L(j, k) * z[k];
            data[i][j] = x;
        }
    }

    std::vector<Axis> axes;
    for (Eigen::Index j = 0; j < d; ++j) {
        const int k = sc.bins_per_axis[j];
        double lo, hi;
        if (sc.bin_strategy == BinStrategy::FixedRange) {
            const double s = sc.true_params.sigma(j);
            lo = sc.true_params.mean()[j] - 3.0 * s;
            hi = sc.true_params.mean()[j] + 3.0 * s;
        } else {
            lo = hi = data[0][j];
            for (const auto& row : data) {
                lo = std::min(lo, row[j]);
                hi = std::max(hi, row[j]);
            }
        }
        std::vector<double> edges(k + 1);
        for (int e = 0; e <= k; ++e)
            edges[e] = lo + (hi - lo) * static_cast<double>(e) / static_cast<double>(k);
        edges.front() = -std::numeric_limits<double>::infinity();
        edges.back() = std::numeric_limits<double>::infinity();
        axes.emplace_back(std::move(edges));
    }
    return bin_observations(axes, data);
}

namespace {

FitOptions scenario_fit_options(const Scenario& sc, int rep, Method m) {
    FitOptions o;
    o.max_iter = sc.max_iter;
    o.tol = sc.tol;
    o.mcem_samples = sc.mcem_samples;
    o.threads = sc.threads;
    // distinct stream per (rep, method) so methods do not share draws
    o.seed = RngState{sc.seed, 0x51E2D}
                 .child(static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(m))
                 .stream;
    return o;
}

}  // namespace

ScenarioReport run_scenario(const Scenario& sc) {
    const auto d = sc.true_params.dim();
    ScenarioReport rep;
    rep.scenario_name = sc.name;
    rep.dim = d;
    rep.n = sc.n;
    rep.reps = sc.reps;
    rep.seed = sc.seed;
    rep.params = param_names(d);
    rep.true_values = param_vector(sc.true_params);
    const std::size_t np = rep.params.size();

    for (Method m : sc.methods) {
        MethodReport mr;
        mr.method = m;
        std::vector<std::vector<double>> ses;   // per success, per mean param
        std::vector<std::vector<bool>> covers;  // per success, per mean param
        double iter_sum = 0.0;

        for (int r = 0; r < sc.reps; ++r) {
            try {
                const GroupedTable table = simulate_dataset(sc, r);
                const FitOptions opts = scenario_fit_options(sc, r, m);
                FitResult fit;
                switch (m) {
                    case Method::ExactMLE: fit = fit_exact_mle(table, sc.init, opts); break;
                    case Method::EM: fit = fit_em(table, sc.init, opts); break;
                    case Method::MCEM: fit = fit_mcem(table, sc.init, opts); break;
                }
                if (m == Method::ExactMLE && !fit.converged)
                    throw Error("exact MLE did not converge");
                mr.estimates.emplace_back(r, param_vector(fit.params));
                iter_sum += fit.iterations;

                if (m == Method::EM || m == Method::MCEM) {
                    MeanInference mi =
                        m == Method::EM
                            ? empirical_info_em(table, fit.params)
                            : empirical_info_mcem(
                                  table, fit.params,
                                  sc.mcem_samples > 0 ? sc.mcem_samples : default_mcem_samples(d),
                                  RngState{opts.seed, 0xCE});
                    std::vector<double> se(d);
                    std::vector<bool> cov(d);
                    for (Eigen::Index j = 0; j < d; ++j) {
                        se[j] = mi.se[j];
                        cov[j] = mi.ci_lower[j] <= sc.true_params.mean()[j] &&
                                 sc.true_params.mean()[j] <= mi.ci_upper[j];
                    }
                    ses.push_back(std::move(se));
                    covers.push_back(std::move(cov));
                }
            } catch (const Error&) {
                mr.failures++;
            }
        }

        const double ns = static_cast<double>(mr.estimates.size());
        mr.rmse.assign(np, 0.0);
        mr.avg_estimate.assign(np, 0.0);
        mr.sd_estimate.assign(np, 0.0);
        if (ns > 0) {
            for (const auto& [r, est] : mr.estimates)
                for (std::size_t j = 0; j < np; ++j) {
                    const double e = est[j] - rep.true_values[j];
                    mr.rmse[j] += e * e;
                    mr.avg_estimate[j] += est[j];
                }
            for (std::size_t j = 0; j < np; ++j) {
                mr.rmse[j] = std::sqrt(mr.rmse[j] / ns);
                mr.avg_estimate[j] /= ns;
            }
            for (const auto& [r, est] : mr.estimates)
                for (std::size_t j = 0; j < np; ++j) {
                    const double e = est[j] - mr.avg_estimate[j];
                    mr.sd_estimate[j] += e * e;
                }
            for (std::size_t j = 0; j < np; ++j)
                mr.sd_estimate[j] = ns > 1 ? std::sqrt(mr.sd_estimate[j] / (ns - 1)) : 0.0;
            mr.avg_iterations = iter_sum / ns;
        }
        if (!ses.empty()) {
            mr.avg_se.assign(d, 0.0);
            mr.coverage.assign(d, 0.0);
            for (std::size_t i = 0; i < ses.size(); ++i)
                for (Eigen::Index j = 0; j < d; ++j) {
                    mr.avg_se[j] += ses[i][j];
                    mr.coverage[j] += covers[i][j] ? 1.0 : 0.0;
                }
            for (Eigen::Index j = 0; j < d; ++j) {
                mr.avg_se[j] /= static_cast<double>(ses.size());
                mr.coverage[j] /= static_cast<double>(ses.size());
            }
        }
        rep.methods.push_back(std::move(mr));
    }
    return rep;
}

ScenarioReport coverage_report(const Scenario& sc) {
    for (Method m : sc.methods)
        if (m == Method::ExactMLE)
            throw DomainError("coverage_report supports EM and MCEM only");
    return run_scenario(sc);
}

namespace {

json method_report_json(const MethodReport& mr, const ScenarioReport& rep) {
    json j;
    j["method"] = method_name(mr.method);
    j["failures"] = mr.failures;
    j["avg_iterations"] = mr.avg_iterations;
    for (std::size_t p = 0; p < rep.params.size(); ++p) {
        j["rmse"][rep.params[p]] = mr.rmse[p];
        j["avg_estimate"][rep.params[p]] = mr.avg_estimate[p];
        j["sd_estimate"][rep.params[p]] = mr.sd_estimate[p];
    }
    for (std::size_t p = 0; p < mr.avg_se.size(); ++p) {
        j["avg_se"][rep.params[p]] = mr.avg_se[p];
        j["coverage"][rep.params[p]] = mr.coverage[p];
    }
    return j;
}

}  // namespace

void write_report(const std::string& dir, const ScenarioReport& rep) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    json j;
    j["scenario"] = rep.scenario_name;
    j["dim"] = rep.dim;
    j["n"] = rep.n;
    j["reps"] = rep.reps;
    j["seed"] = rep.seed;
    j["parameters"] = rep.params;
    for (std::size_t p = 0; p < rep.params.size(); ++p)
        j["true_values"][rep.params[p]] = rep.true_values[p];
    for (const auto& mr : rep.methods) j["methods"].push_back(method_report_json(mr, rep));
    std::ofstream(fs::path(dir) / "report.json") << j.dump(2) << "\n";

    std::ofstream est(fs::path(dir) / "estimates.csv");
    est << "rep,method,parameter,value\n";
    est.precision(17);
    for (const auto& mr : rep.methods)
        for (const auto& [r, vals] : mr.estimates)
            for (std::size_t p = 0; p < rep.params.size(); ++p)
                est << r << "," << method_name(mr.method) << "," << rep.params[p] << ","
                    << vals[p] << "\n";

    std::ofstream rm(fs::path(dir) / "rmse.csv");
    rm << "method,parameter,rmse,failures\n";
    rm.precision(17);
    for (const auto& mr : rep.methods)
        for (std::size_t p = 0; p < rep.params.size(); ++p)
            rm << method_name(mr.method) << "," << rep.params[p] << "," << mr.rmse[p] << ","
               << mr.failures << "\n";

    std::ofstream cov(fs::path(dir) / "coverage.csv");
    cov << "method,parameter,avg_estimate,sd_estimate,avg_se,coverage\n";
    cov.precision(17);
    for (const auto& mr : rep.methods)
        for (std::size_t p = 0; p < mr.avg_se.size(); ++p)
            cov << method_name(mr.method) << "," << rep.params[p] << "," << mr.avg_estimate[p]
                << "," << mr.sd_estimate[p] << "," << mr.avg_se[p] << "," << mr.coverage[p]
                << "\n";

    std::ofstream box(fs::path(dir) / "boxplot.csv");
    box << "scenario,n,method,parameter,value\n";
    box.precision(17);
    for (const auto& mr : rep.methods)
        for (const auto& [r, vals] : mr.estimates)
            for (std::size_t p = 0; p < rep.params.size(); ++p)
                box << rep.scenario_name << "," << rep.n << "," << method_name(mr.method) << ","
                    << rep.params[p] << "," << vals[p] << "\n";
}

// ---------------------------------------------------------------------------
// Scenario files: flat "key = value" lines; values are numbers, quoted
// strings, or [..] arrays of those. '#' starts a comment.

namespace {

struct TomlValue {
    std::vector<std::string> items;  // scalars are single-item
    bool is_array = false;
};

std::map<std::string, TomlValue> parse_flat_toml(const std::string& text) {
    std::map<std::string, TomlValue> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError("scenario file line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        std::string val = strip(line.substr(eq + 1));
        TomlValue tv;
        if (!val.empty() && val.front() == '[') {
            if (val.back() != ']')
                throw DomainError("scenario file line " + std::to_string(lineno) + ": unterminated array");
            tv.is_array = true;
            std::stringstream ss(val.substr(1, val.size() - 2));
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = strip(item);
                if (item.empty()) continue;
                if (item.front() == '"' && item.back() == '"' && item.size() >= 2)
                    item = item.substr(1, item.size() - 2);
                tv.items.push_back(item);
            }
        } else {
            if (!val.empty() && val.front() == '"' && val.back() == '"' && val.size() >= 2)
                val = val.substr(1, val.size() - 2);
            tv.items.push_back(val);
        }
        kv[key] = std::move(tv);
    }
    return kv;
}

double to_number(const std::string& s, const std::string& key) {
    try {
        std::size_t pos;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw DomainError("scenario key '" + key + "': cannot parse number '" + s + "'");
    }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    auto kv = parse_flat_toml(text);
    auto need = [&](const std::string& key) -> const TomlValue& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DomainError("scenario file missing key '" + key + "'");
        return it->second;
    };
    auto get_num = [&](const std::string& key, double dflt, bool required = false) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            if (required) throw DomainError("scenario file missing key '" + key + "'");
            return dflt;
        }
        return to_number(it->second.items.at(0), key);
    };

    const int dims = static_cast<int>(get_num("dims", 0, true));
    if (dims < 1) throw DomainError("scenario dims must be >= 1");

    auto vec = [&](const std::string& key, int len) {
        const auto& tv = need(key);
        if (static_cast<int>(tv.items.size()) != len)
            throw DomainError("scenario key '" + key + "' must have " + std::to_string(len) +
                              " entries");
        Eigen::VectorXd v(len);
        for (int i = 0; i < len; ++i) v[i] = to_number(tv.items[i], key);
        return v;
    };
    auto mat = [&](const std::string& key, int d) {
        const auto& tv = need(key);
        Eigen::MatrixXd m(d, d);
        if (static_cast<int>(tv.items.size()) == d * d) {
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) m(i, j) = to_number(tv.items[i * d + j], key);
        } else if (static_cast<int>(tv.items.size()) == d && d == 1) {
            m(0, 0) = to_number(tv.items[0], key);
        } else {
            throw DomainError("scenario key '" + key + "' must be a row-major d*d array");
        }
        return m;
    };

    Scenario sc(GaussianParams(vec("true_mean", dims), mat("true_cov", dims)),
                GaussianParams(vec("init_mean", dims), mat("init_cov", dims)));
    if (auto it = kv.find("name"); it != kv.end()) sc.name = it->second.items.at(0);
    sc.n = static_cast<int>(get_num("n", 0, true));
    sc.reps = static_cast<int>(get_num("reps", 1));
    sc.seed = static_cast<std::uint64_t>(get_num("seed", 0));
    sc.mcem_samples = static_cast<int>(get_num("mcem_samples", 0));
    sc.max_iter = static_cast<int>(get_num("max_iter", 500));
    sc.tol = get_num("tol", 1e-8);
    if (sc.n < 1) throw DomainError("scenario n must be positive");
    if (sc.reps < 1) throw DomainError("scenario reps must be >= 1");

    const auto& bins = need("bins_per_axis");
    for (const auto& b : bins.items)
        sc.bins_per_axis.push_back(static_cast<int>(to_number(b, "bins_per_axis")));
    if (static_cast<int>(sc.bins_per_axis.size()) != dims)
        throw DomainError("bins_per_axis length must equal dims");

    const auto& methods = need("methods");
    for (const auto& m : methods.items) sc.methods.push_back(method_from_name(m));
    if (sc.methods.empty()) throw DomainError("scenario needs at least one method");

    if (auto it = kv.find("bin_strategy"); it != kv.end())
        sc.bin_strategy = bin_strategy_from_name(it->second.items.at(0));
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace grpnorm
