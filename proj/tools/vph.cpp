#include "vph/io.hpp"
#include "vph/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using vph::json;

namespace {

struct Cli {
    std::string spec_path;
    std::string out_dir = ".";
    uint64_t seed = 1;
    std::string emit = "json";  // json | csv (csv additionally writes sampled maps)
};

json load_spec(const Cli& cli) {
    if (cli.spec_path.empty()) return json::object();
    return vph::load_json(cli.spec_path);
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open " + p.string());
    os << text;
}

void write_summary(const Cli& cli, const std::string& name, const json& summary) {
    fs::create_directories(cli.out_dir);
    write_text(fs::path(cli.out_dir) / (name + "_summary.json"), summary.dump(2) + "\n");
}

vph::Exponent spec_p(const json& j, double fallback = 0.5) {
    return vph::Exponent(j.value("p", fallback));
}

int cmd_staircase(const Cli& cli) {
    const json j = load_spec(cli);
    vph::reject_unknown_keys(j, {"n", "ns", "a_n", "ramp", "p", "samples"}, "staircase spec");
    const vph::Exponent p = spec_p(j);
    std::vector<int> ns = j.value("ns", std::vector<int>{});
    if (j.contains("n")) ns.push_back(j.at("n").get<int>());
    if (ns.empty()) throw std::runtime_error("staircase spec: need \"n\" or \"ns\"");

    json spec_one = j;
    spec_one.erase("ns");
    spec_one.erase("p");
    spec_one.erase("samples");
    spec_one["n"] = ns.front();
    const vph::StaircaseParams params = vph::parse_staircase_spec(spec_one);
    const vph::Homeo1D f = vph::make_staircase(params);
    if (cli.emit == "csv" || j.contains("samples")) {
        const int samples = j.value("samples", 1024);
        vph::write_sampled_map_csv(vph::sample_map_1d(f, samples),
                                   fs::path(cli.out_dir) / "staircase_samples.csv");
    }

    const bool default_width = !j.contains("a_n");
    const vph::ConvergenceTable table = vph::convergence_table_1d(
        ns, p, params.ramp, default_width, default_width ? 0.0 : params.a_n);
    fs::create_directories(cli.out_dir);
    write_text(fs::path(cli.out_dir) / "staircase_table.txt", table.format());

    json summary;
    summary["command"] = "staircase";
    summary["p"] = p.p;
    summary["pass"] = table.all_pass();
    json rows = json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"n", r.n},
                        {"sup_err", r.sup_err},
                        {"sup_bound", r.sup_bound},
                        {"lp_pp", r.lp_pp},
                        {"lp_pp_bound", r.lp_pp_bound},
                        {"pass", r.pass}});
    summary["rows"] = rows;
    write_summary(cli, "staircase", summary);
    std::cout << table.format();
    return table.all_pass() ? 0 : 1;
}

vph::Homeo1D named_homeo(const std::string& name) {
    const vph::Interval I(0.0, 1.0);
    if (name == "id") return vph::Homeo1D::identity(I);
    if (name == "square")
        return vph::Homeo1D(I, [](double x) { return x * x; }, [](double x) { return 2.0 * x; },
                            {}, vph::Smoothness::C1);
    throw std::runtime_error("unknown map \"" + name + "\" (want \"id\" or \"square\")");
}

vph::ScalarFun named_target(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "id") return [](double x) { return x; };
        throw std::runtime_error("unknown target \"" + s + "\"");
    }
    if (j.is_object()) {
        vph::reject_unknown_keys(j, {"const"}, "target spec");
        const double c = j.at("const").get<double>();
        return [c](double) { return c; };
    }
    if (j.is_number()) {
        const double c = j.get<double>();
        return [c](double) { return c; };
    }
    throw std::runtime_error("target must be \"id\", a number, or {\"const\": v}");
}

int cmd_approx1d(const Cli& cli) {
    const json j = load_spec(cli);
    vph::reject_unknown_keys(j, {"f", "F", "p", "r", "eps", "samples"}, "approx1d spec");
    vph::PairCandidate1D cand{named_homeo(j.value("f", std::string("id"))),
                              named_target(j.value("F", json("id"))), spec_p(j),
                              vph::Exponent(j.value("r", 2.0))};
    const double eps = j.value("eps", 0.02);

    json summary;
    summary["command"] = "approx1d";
    const vph::FeasibilityReport feas = vph::feasible_pair(cand);
    summary["feasible"] = feas.feasible;
    if (!feas.feasible) {
        summary["witness_x"] = feas.witness;
        summary["witness_ratio"] = feas.witness_ratio;
        summary["pass"] = false;
        write_summary(cli, "approx1d", summary);
        std::cout << "infeasible: F/f' = " << feas.witness_ratio << " at x = " << feas.witness
                  << "\n";
        return 1;
    }
    const auto [h, rep] = vph::approximate_pair(cand, eps);
    summary["converged"] = rep.converged;
    summary["sup_error"] = rep.sup_error;
    summary["lp_error"] = rep.lp_error;
    summary["staircase_index"] = rep.staircase_index;
    summary["partition_cells"] = rep.partition_cells;
    summary["pass"] = rep.converged;
    write_summary(cli, "approx1d", summary);
    if (cli.emit == "csv")
        vph::write_sampled_map_csv(vph::sample_map_1d(h, j.value("samples", 1024)),
                                   fs::path(cli.out_dir) / "approx1d_samples.csv");
    std::cout << "sup_error " << rep.sup_error << "  lp_error " << rep.lp_error << "\n";
    return rep.converged ? 0 : 1;
}

int cmd_twist(const Cli& cli) {
    const json j = load_spec(cli);
    vph::reject_unknown_keys(j, {"d", "angles", "r", "s", "points", "profile"}, "twist spec");
    const int d = j.value("d", 2);
    std::vector<double> angles = j.value("angles", std::vector<double>{M_PI / 3.0});
    vph::TwistProfile prof;
    const std::string kind = j.value("profile", std::string("constant"));
    if (kind == "constant")
        prof = vph::TwistProfile::constant(angles);
    else if (kind == "localized")
        prof = vph::TwistProfile::localized(angles, j.value("r", 0.5), j.value("s", 0.25));
    else
        throw std::runtime_error("profile must be \"constant\" or \"localized\"");
    const vph::DiffeoNd F = vph::twist_map(prof, d);

    const int points = j.value("points", 1000);
    vph::Rng rng(cli.seed);
    const vph::BoxDomain om = vph::BoxDomain::cube(d, -1.0, 1.0);
    double norm_dev = 0.0, det_dev = 0.0, jac_dev = 0.0, round_dev = 0.0;
    for (int k = 0; k < points; ++k) {
        const vph::Vec x = rng.point_in(om);
        norm_dev = std::max(norm_dev, std::abs(F.value(x).norm() - x.norm()));
        const vph::Mat J = F.jacobian(x);
        det_dev = std::max(det_dev, std::abs(vph::det(J) - 1.0));
        jac_dev = std::max(jac_dev, (J - vph::fd_jacobian(F.value, x)).cwiseAbs().maxCoeff());
        round_dev = std::max(round_dev, (F.inverse(F.value(x)) - x).norm());
    }
    const bool pass =
        norm_dev <= 1e-12 && det_dev <= 1e-9 && jac_dev <= 1e-5 && round_dev <= 1e-10;
    json summary = {{"command", "twist"},          {"d", d},
                    {"points", points},            {"max_norm_deviation", norm_dev},
                    {"max_det_deviation", det_dev}, {"max_jacobian_fd_gap", jac_dev},
                    {"max_roundtrip_error", round_dev}, {"pass", pass}};
    write_summary(cli, "twist", summary);
    if (cli.emit == "csv")
        vph::write_sampled_map_csv(vph::sample_map_nd(F, om, 8),
                                   fs::path(cli.out_dir) / "twist_samples.csv");
    std::cout << summary.dump(2) << "\n";
    return pass ? 0 : 1;
}

int cmd_localize(const Cli& cli) {
    const json j = load_spec(cli);
    vph::reject_unknown_keys(j, {"p", "theta", "rs", "srs"}, "localize spec");
    const vph::Exponent p = spec_p(j);
    const double theta = j.value("theta", M_PI / 2.0);
    const std::vector<double> rs = j.value("rs", std::vector<double>{0.125, 0.0625});
    const std::vector<double> srs = j.value("srs", std::vector<double>{0.75, 0.9});

    const double C1 = vph::fit_C1(2, p, 0.25, 0.5, theta);
    const vph::Vec a = vph::Vec::Zero(2);
    const vph::Mat H = vph::BlockDecomposition::planar_rotation(theta);
    bool pass = true;
    json points = json::array();
    for (double r : rs)
        for (double sr : srs) {
            const double measured =
                vph::localization_error_measured2(a, H, r, sr * r, p).value;
            const double bound = vph::localization_error_bound(2, p, r, sr * r, C1);
            const bool ok = measured <= bound * (1.0 + 1e-6);
            pass = pass && ok;
            points.push_back(
                {{"r", r}, {"s_over_r", sr}, {"measured", measured}, {"bound", bound}, {"pass", ok}});
        }
    const vph::LocalizationScalingReport scaling = vph::localization_scaling(p, theta, cli.seed);
    pass = pass && scaling.pass();
    json summary = {{"command", "localize"},
                    {"C1", C1},
                    {"points", points},
                    {"radius_slope", scaling.radius_fit.exponent},
                    {"radius_slope_expected", scaling.radius_fit.expected},
                    {"shell_slope", scaling.shell_fit.exponent},
                    {"shell_slope_expected", scaling.shell_fit.expected},
                    {"pass", pass}};
    write_summary(cli, "localize", summary);
    std::cout << summary.dump(2) << "\n";
    return pass ? 0 : 1;
}

vph::RotationField named_field(const json& j) {
    vph::RotationField H;
    H.domain = vph::BoxDomain::unit_square();
    const std::string name = j.value("field", std::string("rotation_x1"));
    if (name == "identity")
        H.eval = [](const vph::Vec&) { return vph::Mat::Identity(2, 2); };
    else if (name == "rotation_x1")
        H.eval = [](const vph::Vec& x) {
            return vph::BlockDecomposition::planar_rotation(M_PI * x[0]);
        };
    else
        throw std::runtime_error("field must be \"identity\" or \"rotation_x1\"");
    return H;
}

int cmd_theoremb(const Cli& cli) {
    const json j = load_spec(cli);
    vph::reject_unknown_keys(j, {"levels", "p", "field", "verify_res", "census_points"},
                             "theoremb spec");
    const vph::Exponent p = spec_p(j);
    const std::vector<int> levels = j.value("levels", std::vector<int>{2, 4, 6});
    vph::TheoremBOptions opt;
    opt.seed = cli.seed;
    opt.verify_res = j.value("verify_res", 512);
    opt.census_points = j.value("census_points", 2000);
    const auto seq = vph::theorem_b_sequence(named_field(j), p, levels, opt);

    bool pass = true;
    double prev = std::numeric_limits<double>::infinity();
    json rows = json::array();
    for (const auto& lr : seq) {
        const auto& r = lr.report;
        const bool decreasing = r.lp_err_vs_field < prev;
        prev = r.lp_err_vs_field;
        const bool ok = r.inequality_ok && r.sup_ok && r.det_ok && decreasing;
        pass = pass && ok;
        rows.push_back({{"level", r.level},
                        {"sup_distance", r.sup_distance},
                        {"lp_err_vs_sample", r.lp_err_vs_sample},
                        {"lp_err_vs_field", r.lp_err_vs_field},
                        {"sample_l1_err", r.sample_l1_err},
                        {"det_max_dev", r.det_max_dev},
                        {"n_balls", r.n_balls},
                        {"inequality_ok", r.inequality_ok},
                        {"runtime_ms", r.runtime_ms},
                        {"pass", ok}});
    }
    json summary = {{"command", "theoremb"}, {"p", p.p}, {"levels", rows}, {"pass", pass}};
    write_summary(cli, "theoremb", summary);
    std::cout << summary.dump(2) << "\n";
    return pass ? 0 : 1;
}

int cmd_verify(const Cli& cli) {
    const json j = load_spec(cli);
    vph::reject_unknown_keys(j, {"suites"}, "verify spec");
    const std::vector<std::string> all = {"staircase", "quasinorm", "twist", "decompose"};
    const std::vector<std::string> suites = j.value("suites", all);
    json results = json::object();
    bool pass = true;

    for (const std::string& s : suites) {
        if (s == "staircase") {
            const auto t = vph::convergence_table_1d({4, 16, 64}, vph::Exponent(0.5));
            results["staircase"] = t.all_pass();
            pass = pass && t.all_pass();
        } else if (s == "quasinorm") {
            vph::Rng rng(cli.seed);
            bool ok = true;
            for (int k = 0; k < 20 && ok; ++k) {
                const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
                const auto rep = vph::check_quasinorm_inequalities(
                    [a](double x) { return a + x; }, [b](double x) { return b - x * x; },
                    vph::Interval(0.0, 1.0), vph::Exponent(rng.uniform(0.3, 0.8)),
                    vph::Exponent(rng.uniform(1.0, 2.0)));
                ok = ok && rep.pass();
            }
            results["quasinorm"] = ok;
            pass = pass && ok;
        } else if (s == "twist") {
            vph::Rng rng(cli.seed + 1);
            bool ok = true;
            for (int d : {2, 3, 4}) {
                const auto F = vph::twist_map(
                    vph::TwistProfile::constant(std::vector<double>(d / 2, 0.7)), d);
                const auto cube = vph::BoxDomain::cube(d, -1.0, 1.0);
                for (int k = 0; k < 100; ++k) {
                    const vph::Vec x = rng.point_in(cube);
                    ok = ok && std::abs(F.value(x).norm() - x.norm()) <= 1e-12 &&
                         std::abs(vph::det(F.jacobian(x)) - 1.0) <= 1e-9;
                }
            }
            results["twist"] = ok;
            pass = pass && ok;
        } else if (s == "decompose") {
            vph::Rng rng(cli.seed + 2);
            bool ok = true;
            for (int k = 0; k < 50; ++k)
                for (int d : {3, 4}) {
                    const vph::Mat H = rng.random_sod(d);
                    const auto bd = vph::sod_block_decompose(H);
                    ok = ok && (bd.reconstruct() - H).cwiseAbs().maxCoeff() <= 1e-8;
                }
            results["decompose"] = ok;
            pass = pass && ok;
        } else {
            throw std::runtime_error("unknown suite \"" + s + "\"");
        }
    }
    json summary = {{"command", "verify"}, {"suites", results}, {"pass", pass}};
    write_summary(cli, "verify", summary);
    std::cout << summary.dump(2) << "\n";
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"construction and verification of volume-preserving approximants"};
    app.require_subcommand(1);
    Cli cli;
    for (const char* name :
         {"staircase", "approx1d", "twist", "localize", "theoremb", "verify"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--spec", cli.spec_path, "JSON run spec");
        sub->add_option("--out", cli.out_dir, "output directory");
        sub->add_option("--seed", cli.seed, "RNG seed");
        sub->add_option("--emit", cli.emit, "summary format: json|csv")
            ->check(CLI::IsMember({"json", "csv"}));
    }
    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "staircase") return cmd_staircase(cli);
        if (cmd == "approx1d") return cmd_approx1d(cli);
        if (cmd == "twist") return cmd_twist(cli);
        if (cmd == "localize") return cmd_localize(cli);
        if (cmd == "theoremb") return cmd_theoremb(cli);
        if (cmd == "verify") return cmd_verify(cli);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        json summary = {{"command", cmd}, {"error", e.what()}, {"pass", false}};
        write_summary(cli, cmd, summary);
        return 2;
    }
    return 2;
}
