// Command-line front end.
//
// Exit codes: 0 ok, 1 domain violation, 2 I/O or parse error, 3 non-convergence.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "scgm/scgm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string command;
    std::string table_path;
    std::string graph_path;
    std::string out_dir;
    std::string criterion = "paper-max-aic";
    double smoothing = 0.5;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int draws = 10;
    bool as_json = false;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

json config_json(const RunConfig& c) {
    return {{"command", c.command},   {"table", c.table_path},   {"graph", c.graph_path},
            {"criterion", c.criterion}, {"smoothing", c.smoothing}, {"alpha", c.alpha},
            {"seed", c.seed},         {"version", scgm::kVersion}, {"aic_formula", scgm::kAicFormula},
            {"bic_formula", scgm::kBicFormula}};
}

scgm::ContingencyTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open table '" + path + "'");
    const auto fmt = fs::path(path).extension() == ".json" ? scgm::TableFormat::Json : scgm::TableFormat::Csv;
    return scgm::load_table(in, fmt);
}

scgm::ChainGraph read_graph(const std::string& path) {
    if (!fs::exists(path)) throw IoError("cannot open graph '" + path + "'");
    return scgm::load_graph(path);
}

void write_file(const RunConfig& c, const std::string& name, const std::string& body) {
    if (c.out_dir.empty()) return;
    fs::create_directories(c.out_dir);
    const auto p = fs::path(c.out_dir) / name;
    std::ofstream out(p);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << body;
}

void write_json(const RunConfig& c, const std::string& name, json body) {
    body["config"] = config_json(c);
    write_file(c, name, body.dump(2) + "\n");
}

// Header lines for CSV outputs.
std::string csv_preamble(const RunConfig& c) {
    std::ostringstream os;
    os << "# scgm " << scgm::kVersion << " command=" << c.command << " seed=" << c.seed << "\n";
    return os.str();
}

std::vector<int> cards_of(const scgm::Layout& l) {
    std::vector<int> out;
    for (int j = 0; j < l.size(); ++j) out.push_back(l.cardinality(j));
    return out;
}

int cmd_validate(const RunConfig& c) {
    auto g = read_graph(c.graph_path);
    std::vector<int> cards;
    if (!c.table_path.empty()) {
        const auto t = read_table(c.table_path);
        g = scgm::align_to(g, t.layout);
        cards = cards_of(t.layout);
    }
    const auto issues = scgm::validate(g, cards.empty() ? nullptr : &cards);
    json j{{"valid", issues.empty()}, {"issues", json::array()}};
    for (const auto& i : issues) {
        j["issues"].push_back({{"kind", i.kind}, {"message", i.message}});
        std::cerr << i.kind << ": " << i.message << "\n";
    }
    if (issues.empty()) std::cout << "valid: " << g.size() << " vertices, " << g.components.size() << " components\n";
    write_json(c, "validate.json", j);
    return issues.empty() ? 0 : 1;
}

int cmd_markov(const RunConfig& c) {
    auto g = read_graph(c.graph_path);
    std::vector<int> cards;
    if (!c.table_path.empty()) {
        const auto t = read_table(c.table_path);
        g = scgm::align_to(g, t.layout);
        cards = cards_of(t.layout);
    }
    const auto stmts = scgm::stratified_markov(g, cards.empty() ? nullptr : &cards);
    const auto ns = g.name_space();
    json j{{"statements", json::array()}, {"marginal_sets", json::array()}};
    for (const auto& s : stmts) {
        j["statements"].push_back(scgm::to_json(ns, s));
        if (!c.as_json) std::cout << scgm::to_string(ns, s) << "\n";
    }
    for (auto m : scgm::marginal_sets(g)) j["marginal_sets"].push_back(ns.set_string(m));
    if (c.as_json) {
        j["config"] = config_json(c);
        std::cout << j.dump(2) << "\n";
    }
    write_json(c, "markov.json", j);
    return 0;
}

int cmd_constraints(const RunConfig& c) {
    const auto t = read_table(c.table_path);
    const auto g = scgm::align_to(read_graph(c.graph_path), t.layout);
    const auto sys = scgm::scgm_constraints(g, t.layout);
    auto j = scgm::to_json(t.layout, sys);
    if (c.as_json) {
        j["config"] = config_json(c);
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& row : sys.constraints) std::cout << scgm::to_string(t.layout, row) << " = 0\n";
    }
    write_json(c, "constraints.json", j);
    return 0;
}

int cmd_fit(const RunConfig& c) {
    const auto t = read_table(c.table_path);
    const auto g = scgm::align_to(read_graph(c.graph_path), t.layout);
    const auto alloc = scgm::allocate_effects(scgm::marginal_sets(g));
    const auto sys = scgm::scgm_constraints(g, t.layout, &alloc);
    scgm::FitOptions opt;
    opt.smoothing = c.smoothing;
    const auto fit = scgm::fit_constrained(t, sys, opt, &alloc);
    auto j = scgm::to_json(fit, t.layout);
    std::printf("G2 = %.4f  df = %d  p = %.4f  AIC = %.3f  BIC = %.3f  converged = %s  iterations = %d\n", fit.g2,
                fit.df, fit.p_value, fit.aic, fit.bic, fit.converged ? "yes" : "no", fit.iterations);
    write_json(c, "fit.json", j);
    if (fit.eta_hat) {
        try {
            const auto reg = scgm::beta_from_eta(*fit.eta_hat, g);
            write_file(c, "regression.csv", csv_preamble(c) + scgm::report_csv(reg));
            write_json(c, "regression.json", scgm::report_json(reg));
        } catch (const scgm::Error& e) {
            std::cerr << "regression report skipped: " << e.what() << "\n";
        }
    }
    return fit.converged ? 0 : 3;
}

int cmd_search(const RunConfig& c) {
    const auto t = read_table(c.table_path);
    const auto g = read_graph(c.graph_path);
    scgm::SearchOptions opt;
    opt.fit.smoothing = c.smoothing;
    opt.criterion = scgm::parse_criterion(c.criterion);
    opt.alpha = c.alpha;
    const auto trace = scgm::model_search(t, g, opt);
    const auto table = scgm::search_table(trace);
    std::cout << table;
    write_json(c, "search.json", scgm::to_json(trace));
    write_file(c, "search.txt", table);
    const bool ok = trace.selected_fit && trace.selected_fit->converged;
    return ok ? 0 : 3;
}

int cmd_selftest(const RunConfig& c) {
    const auto lines = scgm::oracle_selftest(c.seed, c.draws);
    json j = json::array();
    bool all = true;
    for (const auto& l : lines) {
        std::cout << (l.pass ? "PASS " : "FAIL ") << l.name << "  " << l.detail << "\n";
        j.push_back({{"name", l.name}, {"pass", l.pass}, {"detail", l.detail}});
        all = all && l.pass;
    }
    write_json(c, "selftest.json", {{"results", j}});
    return all ? 0 : 1;
}

int exit_code(scgm::ErrorKind k) {
    switch (k) {
        case scgm::ErrorKind::Parse: return 2;
        case scgm::ErrorKind::NonConvergence: return 3;
        default: return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stratified chain graph models: constraints, fitting and model search"};
    app.set_version_flag("--version", std::string(scgm::kVersion));
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_graph = [&](CLI::App* s, bool required) {
        auto* o = s->add_option("--graph", cfg.graph_path, "chain graph file (.json or text)");
        if (required) o->required();
    };
    auto add_table = [&](CLI::App* s, bool required) {
        auto* o = s->add_option("--table", cfg.table_path, "contingency table (.csv or .json)");
        if (required) o->required();
    };
    auto add_out = [&](CLI::App* s) { s->add_option("--out", cfg.out_dir, "output directory"); };

    auto* validate = app.add_subcommand("validate", "check a chain graph");
    add_graph(validate, true);
    add_table(validate, false);
    add_out(validate);

    auto* markov = app.add_subcommand("markov", "list independence statements");
    add_graph(markov, true);
    add_table(markov, false);
    markov->add_flag("--json", cfg.as_json, "print JSON");
    add_out(markov);

    auto* constraints = app.add_subcommand("constraints", "generate parameter constraints");
    add_graph(constraints, true);
    add_table(constraints, true);
    constraints->add_flag("--json", cfg.as_json, "print JSON");
    add_out(constraints);

    auto* fit = app.add_subcommand("fit", "fit a stratified chain graph model");
    add_graph(fit, true);
    add_table(fit, true);
    fit->add_option("--smoothing", cfg.smoothing, "pseudo-count for the starting point")->check(CLI::NonNegativeNumber);
    add_out(fit);

    auto* search = app.add_subcommand("search", "three-step model search");
    add_graph(search, true);
    add_table(search, true);
    search->add_option("--smoothing", cfg.smoothing, "pseudo-count for the starting point")
        ->check(CLI::NonNegativeNumber);
    search->add_option("--criterion", cfg.criterion, "selection criterion")
        ->check(CLI::IsMember({"paper-max-aic", "min-aic"}));
    search->add_option("--alpha", cfg.alpha, "rejection level")->check(CLI::Range(0.0, 1.0));
    add_out(search);

    auto* oracle = app.add_subcommand("oracle", "independent checks");
    oracle->require_subcommand(1);
    auto* selftest = oracle->add_subcommand("selftest", "round-trip the identities and constraint families");
    selftest->add_option("--seed", cfg.seed, "random seed");
    selftest->add_option("--draws", cfg.draws, "distributions per check")->check(CLI::PositiveNumber);
    add_out(selftest);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*validate) return cfg.command = "validate", cmd_validate(cfg);
        if (*markov) return cfg.command = "markov", cmd_markov(cfg);
        if (*constraints) return cfg.command = "constraints", cmd_constraints(cfg);
        if (*fit) return cfg.command = "fit", cmd_fit(cfg);
        if (*search) return cfg.command = "search", cmd_search(cfg);
        if (*selftest) return cfg.command = "oracle selftest", cmd_selftest(cfg);
    } catch (const scgm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
