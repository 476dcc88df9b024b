#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "homophily/corpus.hpp"
#include "homophily/diagnostics.hpp"
#include "homophily/error.hpp"
#include "homophily/flow.hpp"
#include "homophily/gender.hpp"
#include "homophily/inference.hpp"
#include "homophily/metrics.hpp"
#include "homophily/parallel.hpp"
#include "homophily/regression.hpp"
#include "homophily/sampler.hpp"
#include "homophily/sensitivity.hpp"
#include "homophily/validation.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace homophily;
using cli::PipelineConfig;

namespace {

std::ofstream create(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw Error("cli", "cannot write " + path.string());
    return out;
}

void write_json(const fs::path& path, const json& j) { create(path) << j.dump(2) << '\n'; }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("cli", path.string() + ": " + e.what());
    }
}

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::string rational(const Rational& r) {
    return r.denominator() == 1 ? std::to_string(r.numerator())
                                : std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// ---- trace and result directories

fs::path trace_path(const fs::path& dir, std::size_t chain, const char* ext) {
    return dir / "traces" / ("chain_" + std::to_string(chain) + ext);
}

void write_runs(const fs::path& out, std::span<const ChainRun> runs, const Corpus& corpus, bool csv) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
        auto bin = create(trace_path(out, i, ".bin"), std::ios::binary);
        write_trace_binary(runs[i], corpus, bin);
        create(trace_path(out, i, ".checkpoint"), std::ios::binary) << runs[i].checkpoint;
        if (csv) {
            auto c = create(trace_path(out, i, ".csv"));
            write_trace_csv(runs[i], corpus, c);
        }
    }
}

/// Chains from `dir/traces` (or `dir` itself), ordered by chain number.
std::vector<ChainRun> read_runs(const fs::path& dir, const Corpus& corpus) {
    const fs::path traces = fs::is_directory(dir / "traces") ? dir / "traces" : dir;
    std::vector<std::pair<std::size_t, fs::path>> found;
    if (fs::is_directory(traces))
        for (const auto& e : fs::directory_iterator(traces)) {
            const auto name = e.path().filename().string();
            if (name.rfind("chain_", 0) != 0 || e.path().extension() != ".bin") continue;
            std::size_t k = 0;
            const auto digits = name.substr(6, name.size() - 10);
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
            if (ec == std::errc() && ptr == digits.data() + digits.size()) found.emplace_back(k, e.path());
        }
    std::sort(found.begin(), found.end());
    std::vector<ChainRun> runs;
    for (const auto& [k, path] : found) {
        std::ifstream in(path, std::ios::binary);
        runs.push_back(read_trace_binary(in, corpus));
    }
    return runs;
}

std::vector<ChainRun> run_chains(const Corpus& corpus, const SwapMatrix& matrix, const PipelineConfig& cfg) {
    const auto plans = cfg.plans();
    std::vector<ChainRun> runs(plans.size());
    parallel_for(plans.size(), cfg.chain_threads(), [&](std::size_t i) { runs[i] = run_chain(corpus, matrix, plans[i]); });
    return runs;
}

struct LoadedResults {
    Corpus corpus;
    std::vector<ChainRun> runs;
    PooledTraces pooled;
    TestSuiteResult suite;
};

LoadedResults load_results(const fs::path& dir) {
    if (!fs::exists(dir / "test_options.json") || !fs::is_directory(dir / "corpus"))
        throw Error("cli", "no results found in " + dir.string());
    LoadedResults r;
    r.corpus = load_corpus(dir / "corpus");
    r.runs = read_runs(dir, r.corpus);
    if (r.runs.empty()) throw Error("cli", "no results found in " + dir.string());
    r.pooled = pool_traces(r.runs);
    r.suite = evaluate_traces(r.corpus, r.pooled, TestOptions::from_json(read_json(dir / "test_options.json")));
    return r;
}

void write_report(const fs::path& out, const LoadedResults& r, std::size_t bins) {
    auto table = create(out / "results.csv");
    write_results_table(r.suite, r.corpus, table);
    auto fields = create(out / "fields.csv");
    write_field_results(r.suite, fields);
    write_json(out / "histogram.json", histogram_json(r.suite, r.pooled, bins));
    write_json(out / "tree.json", tree_json(r.suite, r.corpus));
    write_json(out / "results.json", r.suite.to_json());
}

void write_matrix(const fs::path& path, const SwapMatrix& matrix, const Corpus& corpus) {
    auto out = create(path);
    matrix.write_tsv(out, terminal_names(corpus));
}

json chain_summary(std::span<const ChainRun> runs) {
    auto a = json::array();
    for (const auto& r : runs)
        a.push_back({{"seed", r.plan.seed},
                     {"samples", r.plan.samples()},
                     {"proposals", r.counters.proposals},
                     {"accepted", r.counters.accepted},
                     {"acceptance_rate", r.counters.acceptance_rate()},
                     {"zero_density", r.counters.zero_density},
                     {"mean_origin_retention", r.counters.mean_origin_retention()}});
    return a;
}

json chain_seeds(const PipelineConfig& cfg) {
    auto s = json::array();
    for (const auto& p : cfg.plans()) s.push_back(p.seed);
    return s;
}

// ---- subcommands; each returns the seeds it consumed

json cmd_ingest(const PipelineConfig& cfg) {
    CorpusFiles files{cfg.papers, cfg.authorships, cfg.hierarchy, std::nullopt};
    if (!cfg.flows.empty()) files.flows = cfg.flows;
    auto r = ingest_corpus(files, cfg.ingest);
    write_corpus(r.corpus, cfg.out / "corpus");
    write_json(cfg.out / "ingest_report.json", r.report.to_json());
    return json::object();
}

json cmd_impute(const PipelineConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus);
    std::vector<NameFrequencyTable> tables;
    for (std::size_t i = 0; i < cfg.name_tables.size(); ++i)
        tables.push_back(NameFrequencyTable::load(cfg.name_tables[i], int(i)));
    std::vector<const GenderProvider*> providers;
    for (const auto& t : tables) providers.push_back(&t);
    auto r = impute_gender(corpus, providers, cfg.imputation_threshold);
    write_corpus(r.corpus, cfg.out / "corpus");
    write_json(cfg.out / "imputation_report.json", r.report.to_json());
    return json::object();
}

json cmd_clean(const PipelineConfig& cfg) {
    auto r = clean_corpus(load_corpus(cfg.corpus));
    if (r.stats.empty_result) throw Error("corpus", "cleaning removed every paper");
    write_corpus(r.corpus, cfg.out / "corpus");
    write_json(cfg.out / "cleaning_report.json", r.stats.to_json());
    return json::object();
}

json cmd_alpha(const PipelineConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus);
    auto out = create(cfg.out / "alpha.csv");
    out << "field,level,papers,n_female,n_male,female_share,p,q,alpha" << (cfg.exact ? ",alpha_exact" : "") << '\n';
    for (Index f : fields_with_papers(corpus)) {
        const auto papers = papers_of_field(corpus, f);
        const auto a = compute_alpha(papers);
        const double share = double(a.n_female) / double(a.n_female + a.n_male);
        out << corpus.fields()[f].id << ',' << level_name(corpus.level_tag(f)) << ',' << papers.size() << ','
            << a.n_female << ',' << a.n_male << ',' << fmt(share) << ',' << (a.n_male ? fmt(a.p) : "NA") << ','
            << (a.n_female ? fmt(a.q) : "NA") << ',' << (a.defined ? fmt(a.alpha) : "NA");
        if (cfg.exact) {
            const auto e = compute_alpha_exact(papers);
            out << ',' << (e.defined ? rational(e.alpha) : "NA");
        }
        out << '\n';
    }
    return json::object();
}

json cmd_sample(const PipelineConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus);
    const auto matrix = build_swap_matrix(corpus, cfg.flow_threshold);
    const auto runs = run_chains(corpus, matrix, cfg);
    write_runs(cfg.out, runs, corpus, cfg.trace_csv);
    write_matrix(cfg.out / "swap_matrix.tsv", matrix, corpus);
    write_json(cfg.out / "chains.json", chain_summary(runs));
    return {{"chains", chain_seeds(cfg)}};
}

json cmd_test(const PipelineConfig& cfg) {
    LoadedResults r;
    r.corpus = load_corpus(cfg.corpus);
    json seeds = json::object();
    if (!cfg.traces.empty()) {
        r.runs = read_runs(cfg.traces, r.corpus);
        if (r.runs.empty()) throw Error("cli", "no traces found in " + cfg.traces.string());
    } else {
        const auto matrix = build_swap_matrix(r.corpus, cfg.flow_threshold);
        r.runs = run_chains(r.corpus, matrix, cfg);
        write_matrix(cfg.out / "swap_matrix.tsv", matrix, r.corpus);
        seeds["chains"] = chain_seeds(cfg);
    }
    r.pooled = pool_traces(r.runs);
    r.suite = evaluate_traces(r.corpus, r.pooled, cfg.test);
    write_corpus(r.corpus, cfg.out / "corpus");
    write_runs(cfg.out, r.runs, r.corpus, cfg.trace_csv);
    write_json(cfg.out / "test_options.json", cfg.test.to_json());
    write_json(cfg.out / "chains.json", chain_summary(r.runs));
    write_report(cfg.out, r, cfg.bins);
    return seeds;
}

json cmd_report(const PipelineConfig& cfg) {
    write_report(cfg.out, load_results(cfg.results), cfg.bins);
    return json::object();
}

json cmd_diagnose(const PipelineConfig& cfg) {
    const auto r = load_results(cfg.results);
    KSOptions ks;
    ks.reps = cfg.ks_reps;
    ks.with_replacement = cfg.ks_with_replacement;
    ks.seed = cfg.ks_seed;
    ks.threads = cfg.threads;
    auto mcse = create(cfg.out / "mcse.csv");
    mcse << "field,chain,samples,mean,mcse\n";
    for (std::size_t c = 0; c < r.runs.size(); ++c)
        for (Index f : r.runs[c].fields) {
            const auto& t = r.runs[c].trace(f);
            mcse << r.corpus.fields()[f].id << ',' << c << ',' << t.size() << ',' << fmt(expected_alpha(t)) << ','
                 << fmt(batch_means_se(t)) << '\n';
        }
    if (r.runs.size() < 2) throw Error("diagnostics", "chain comparison needs at least two chains");
    const auto report = compare_chains(r.runs, r.corpus, {}, ks);
    auto csv = create(cfg.out / "ks.csv");
    report.write_csv(csv);
    write_json(cfg.out / "ks.json", report.to_json());
    write_json(cfg.out / "ks_scatter.json", report.scatter_json());
    return {{"ks", cfg.ks_seed}};
}

json cmd_sensitivity(const PipelineConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus);
    SensitivityPlan plan;
    plan.chain = cfg.chain;
    plan.chains = cfg.chains;
    plan.test = cfg.test;
    plan.flow_threshold = cfg.flow_threshold;
    plan.threads = cfg.threads;
    std::vector<ImputationKind> kinds;
    if (cfg.scenario != "high") kinds.push_back(ImputationKind::LowHomophily);
    if (cfg.scenario != "low") kinds.push_back(ImputationKind::HighHomophily);
    auto summary = json::array();
    for (auto kind : kinds) {
        ImputationScenario sc{kind, cfg.imputations, cfg.imputation_seed};
        const auto rep = run_sensitivity(corpus, sc, plan);
        const std::string name(to_string(kind));
        auto csv = create(cfg.out / ("sensitivity_" + name + ".csv"));
        rep.write_csv(csv);
        summary.push_back(rep.to_json());
    }
    write_json(cfg.out / "sensitivity.json", summary);
    return {{"imputation_base", cfg.imputation_seed}, {"chain_base", cfg.chain.seed}};
}

json cmd_regress(const PipelineConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus);
    const auto r = load_results(cfg.results);
    const auto table = build_covariates(corpus, r.suite);
    auto cov = create(cfg.out / "covariates.csv");
    table.write_csv(cov);
    auto dropped = json::array();
    for (const auto& d : table.dropped) dropped.push_back({{"field", d.field_id}, {"reason", d.reason}});
    write_json(cfg.out / "dropped_fields.json", dropped);
    if (table.rows.empty())
        throw Error("regression", "every terminal field was dropped (reasons in dropped_fields.json)");
    GEEOptions opts;
    opts.small_sample_correction = cfg.small_sample;
    const auto fit = fit_gee_logistic(design_from(table), opts);
    auto csv = create(cfg.out / "gee.csv");
    fit.write_csv(csv);
    write_json(cfg.out / "gee.json", fit.to_json());
    if (fit.separation || !fit.converged) std::cerr << "warning module=regression message=" << fit.diagnostic << '\n';
    return json::object();
}

json cmd_naive(const PipelineConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus);
    const auto naive = build_naive_null(corpus, cfg.naive_level, cfg.flow_threshold);
    const auto plans = cfg.plans();
    const auto full = run_full_test(naive.corpus, naive.matrix, plans, cfg.test, cfg.chain_threads());
    auto fields = create(cfg.out / "naive_fields.csv");
    write_field_results(full.suite, fields);
    auto table = create(cfg.out / "naive_results.csv");
    write_results_table(full.suite, naive.corpus, table);
    write_json(cfg.out / "naive_results.json", full.suite.to_json());
    write_corpus(naive.corpus, cfg.out / "corpus");
    return {{"chains", chain_seeds(cfg)}};
}

json cmd_synth(const PipelineConfig& cfg) {
    SynthSpec spec;
    if (!cfg.spec.empty()) {
        spec = SynthSpec::from_json(read_json(cfg.spec));
    } else {
        spec = tree_spec(cfg.synth_top, cfg.synth_leaves, cfg.synth_papers, cfg.synth_seed);
        spec.homophily = cfg.synth_homophily;
        spec.missing_rate = cfg.synth_missing;
        spec.cross_flow = cfg.synth_cross_flow;
        for (auto& f : spec.fields)
            if (f.parent) f.solo_papers = cfg.synth_solo;
    }
    write_corpus(generate_corpus(spec), cfg.out / "corpus");
    write_json(cfg.out / "spec.json", spec.to_json());
    return {{"synth", spec.seed}};
}

json cmd_oracle(const PipelineConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus);
    const auto matrix = build_swap_matrix(corpus, cfg.flow_threshold);
    const auto exact = enumerate_null_exact(corpus, matrix, cfg.enumeration_cap);
    write_json(cfg.out / "exact_null.json", exact.to_json(corpus));
    auto out = create(cfg.out / "exact_null.csv");
    out << "field,level,obs_alpha,exp_alpha,p,atoms\n";
    for (Index f : exact.fields) {
        const auto a = compute_alpha(corpus, f);
        const std::optional<double> obs = a.defined ? std::optional(a.alpha) : std::nullopt;
        out << corpus.fields()[f].id << ',' << level_name(corpus.level_tag(f)) << ',' << (obs ? fmt(*obs) : "NA")
            << ',' << fmt(exact.expected_alpha(f)) << ',' << fmt(exact.p_value(f, obs)) << ','
            << exact.distribution(f).size() << '\n';
    }
    return json::object();
}

// ---- option binding

void bind_out(CLI::App* sub, PipelineConfig& c) {
    sub->add_option("-o,--out", c.out, "Output directory")->envname("HOMOPHILY_OUT")->capture_default_str();
}

void bind_corpus(CLI::App* sub, PipelineConfig& c, const std::string& what = "Corpus snapshot directory") {
    sub->add_option("--corpus", c.corpus, what)->required()->check(CLI::ExistingDirectory);
}

void bind_results(CLI::App* sub, PipelineConfig& c) {
    sub->add_option("--results", c.results, "Directory written by `test`")->required();
}

void bind_threads(CLI::App* sub, PipelineConfig& c) {
    sub->add_option("-j,--threads", c.threads, "Worker threads")->envname("HOMOPHILY_THREADS")->capture_default_str();
}

void bind_flow(CLI::App* sub, PipelineConfig& c) {
    sub->add_option("--flow-threshold", c.flow_threshold, "Citation proportions below this are dropped")
        ->envname("HOMOPHILY_FLOW_THRESHOLD")
        ->capture_default_str();
}

void bind_chain(CLI::App* sub, PipelineConfig& c) {
    sub->add_option("--chains", c.chains, "Independent chains")->envname("HOMOPHILY_CHAINS")->capture_default_str();
    sub->add_option("--iterations", c.chain.iterations, "Iterations per chain, burn-in included")
        ->envname("HOMOPHILY_ITERATIONS")
        ->capture_default_str();
    sub->add_option("--burn-in", c.chain.burn_in, "Discarded leading iterations")
        ->envname("HOMOPHILY_BURN_IN")
        ->capture_default_str();
    sub->add_option("--thin", c.chain.thin, "Record every k-th post-burn-in iteration")->capture_default_str();
    sub->add_option("--seed", c.chain.seed, "Seed of chain 0; chain i uses seed + i")
        ->envname("HOMOPHILY_SEED")
        ->capture_default_str();
    sub->add_option("--continue-prob", c.chain.continue_prob, "Probability of extending a proposal cycle")
        ->capture_default_str();
    sub->add_option("--length-mode", c.length_mode, "Cycle length law: geometric or clamped")->capture_default_str();
    sub->add_option("--proposals", c.chain.proposals_per_iteration, "Proposals per iteration")
        ->capture_default_str();
    sub->add_flag("--check-invariants", c.chain.check_invariants, "Verify conservation laws after every iteration");
    bind_threads(sub, c);
    bind_flow(sub, c);
}

void bind_fdr(CLI::App* sub, PipelineConfig& c) {
    sub->add_option("--fdr", c.fdr, "FDR procedure: BH or BY")->envname("HOMOPHILY_FDR")->capture_default_str();
    sub->add_option("--fdr-rate", c.test.rate, "FDR level")->envname("HOMOPHILY_FDR_RATE")->capture_default_str();
    sub->add_flag("--exclude-root", c.exclude_root, "Keep the whole-corpus test out of the family");
    sub->add_flag("--per-level", c.test.per_level_families, "One FDR family per level instead of one joint family");
    sub->add_flag("--plus-one", c.test.plus_one, "Count the observed configuration in the null sample");
}

using Handler = json (*)(const PipelineConfig&);

struct Command {
    std::string name;
    std::string help;
    Handler run;
    PipelineConfig config;
    CLI::App* app = nullptr;
    /// Inputs hashed into the manifest.
    std::vector<fs::path> inputs() const {
        const auto& c = config;
        std::vector<fs::path> in{c.papers, c.authorships, c.hierarchy, c.flows, c.corpus, c.traces, c.spec};
        in.insert(in.end(), c.name_tables.begin(), c.name_tables.end());
        if (!c.results.empty()) {
            in.push_back(c.results / "corpus");
            in.push_back(c.results / "traces");
            in.push_back(c.results / "test_options.json");
        }
        return in;
    }
};

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gender homophily in hierarchically clustered co-authorship corpora.\n"
                 "Subcommands compose through directories: a corpus snapshot (papers.tsv, authorships.tsv,\n"
                 "hierarchy.tsv, flows.tsv), trace files (traces/chain_<i>.bin) and a results directory.\n"
                 "Every run writes manifest.json (config hash, input and output SHA-256, seeds, versions)."};
    app.set_version_flag("--version", std::string("homophily ") + HOMOPHILY_VERSION);
    app.set_config("--config", "", "Read options from an INI/TOML file; [subcommand] sections apply per command");
    app.require_subcommand(1, 1);
    app.footer("Environment: HOMOPHILY_OUT, HOMOPHILY_THREADS, HOMOPHILY_SEED, HOMOPHILY_CHAINS,\n"
               "HOMOPHILY_ITERATIONS, HOMOPHILY_BURN_IN, HOMOPHILY_FLOW_THRESHOLD, HOMOPHILY_FDR and\n"
               "HOMOPHILY_FDR_RATE override defaults; explicit flags override the environment.");

    std::vector<std::unique_ptr<Command>> commands;
    auto add = [&](std::string name, std::string help, Handler run) -> Command& {
        auto cmd = std::make_unique<Command>();
        cmd->name = name;
        cmd->help = help;
        cmd->run = run;
        cmd->config.command = name;
        cmd->app = app.add_subcommand(name, help);
        commands.push_back(std::move(cmd));
        return *commands.back();
    };

    {
        auto& c = add("ingest", "Read papers, authorships, hierarchy and flows TSV files into a corpus snapshot",
                      cmd_ingest);
        auto* s = c.app;
        auto& k = c.config;
        s->add_option("--papers", k.papers, "papers.tsv")->required()->check(CLI::ExistingFile);
        s->add_option("--authorships", k.authorships, "authorships.tsv")->required()->check(CLI::ExistingFile);
        s->add_option("--hierarchy", k.hierarchy, "hierarchy.tsv")->required()->check(CLI::ExistingFile);
        s->add_option("--flows", k.flows, "flows.tsv (optional)")->check(CLI::ExistingFile);
        s->add_option("--year-min", k.ingest.year_min, "First publication year kept")->capture_default_str();
        s->add_option("--year-max", k.ingest.year_max, "Last publication year kept")->capture_default_str();
        s->add_option("--max-depth", k.ingest.max_depth, "Deepest hierarchy level")->capture_default_str();
        bind_out(s, k);
    }
    {
        auto& c = add("impute", "Assign genders from first names using frequency tables", cmd_impute);
        bind_corpus(c.app, c.config);
        c.app->add_option("--names", c.config.name_tables, "Name table(s) name,female,male; earlier tables win")
            ->required()
            ->check(CLI::ExistingFile);
        c.app->add_option("--threshold", c.config.imputation_threshold, "Minimum share of the majority gender")
            ->capture_default_str();
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("clean", "Drop Unassigned authorships and papers left with one author", cmd_clean);
        bind_corpus(c.app, c.config);
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("alpha", "Observed alpha per field", cmd_alpha);
        bind_corpus(c.app, c.config, "Cleaned corpus snapshot");
        c.app->add_flag("--exact", c.config.exact, "Add a rational-arithmetic column");
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("sample", "Run null-model chains and write traces", cmd_sample);
        bind_corpus(c.app, c.config, "Cleaned corpus snapshot");
        bind_chain(c.app, c.config);
        c.app->add_flag("--csv", c.config.trace_csv, "Also write long-format CSV traces");
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("test", "Permutation tests with FDR control (runs chains unless --traces is given)", cmd_test);
        bind_corpus(c.app, c.config, "Cleaned corpus snapshot");
        c.app->add_option("--traces", c.config.traces, "Directory written by `sample`")->check(CLI::ExistingDirectory);
        bind_chain(c.app, c.config);
        bind_fdr(c.app, c.config);
        c.app->add_option("--bins", c.config.bins, "Histogram bins")->capture_default_str();
        c.app->add_flag("--csv", c.config.trace_csv, "Also write long-format CSV traces");
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("diagnose", "Chain-pair KS tests and Monte Carlo standard errors", cmd_diagnose);
        bind_results(c.app, c.config);
        c.app->add_option("--reps", c.config.ks_reps, "Resampling replicates per KS test")->capture_default_str();
        c.app->add_flag("--with-replacement", c.config.ks_with_replacement, "Bootstrap instead of permutation");
        c.app->add_option("--seed", c.config.ks_seed, "Resampling seed")->capture_default_str();
        bind_threads(c.app, c.config);
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("sensitivity", "Multiple imputation of missing genders under two scenarios", cmd_sensitivity);
        auto& k = c.config;
        k.chain.iterations = 29000;
        k.chain.burn_in = 20000;
        k.chains = 1;
        bind_corpus(c.app, k, "Corpus snapshot before cleaning");
        c.app->add_option("--scenario", k.scenario, "low, high or both")->capture_default_str();
        c.app->add_option("--imputations", k.imputations, "Imputed data sets per scenario")->capture_default_str();
        c.app->add_option("--imputation-seed", k.imputation_seed, "Imputation m draws from seed + m")
            ->capture_default_str();
        bind_chain(c.app, k);
        bind_fdr(c.app, k);
        bind_out(c.app, k);
    }
    {
        auto& c = add("regress", "Logistic GEE of terminal-field significance", cmd_regress);
        bind_corpus(c.app, c.config, "Corpus snapshot before cleaning");
        bind_results(c.app, c.config);
        c.app->add_flag("--small-sample", c.config.small_sample, "Scale the sandwich by G/(G-1)");
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("naive", "Structural-only null: collapse every subtree at a level into one field", cmd_naive);
        auto& k = c.config;
        k.chain.iterations = 6000;
        k.chain.burn_in = 1000;
        k.chains = 1;
        bind_corpus(c.app, k, "Cleaned corpus snapshot");
        c.app->add_option("--level", k.naive_level, "Hierarchy level whose subtrees become fields")
            ->capture_default_str();
        bind_chain(c.app, k);
        bind_fdr(c.app, k);
        bind_out(c.app, k);
    }
    {
        auto& c = add("synth", "Generate a synthetic corpus from a JSON spec or a balanced tree", cmd_synth);
        auto* s = c.app;
        auto& k = c.config;
        s->add_option("--spec", k.spec, "JSON spec (fields, size_weights, homophily, ...)")
            ->check(CLI::ExistingFile);
        s->add_option("--top-fields", k.synth_top, "Top-level fields")->capture_default_str();
        s->add_option("--leaves", k.synth_leaves, "Leaves per top-level field")->capture_default_str();
        s->add_option("--papers", k.synth_papers, "Papers per leaf")->capture_default_str();
        s->add_option("--solo", k.synth_solo, "Solo papers per leaf")->capture_default_str();
        s->add_option("--homophily", k.synth_homophily, "Planted homophily")->capture_default_str();
        s->add_option("--missing", k.synth_missing, "Share of withheld genders")->capture_default_str();
        s->add_option("--cross-flow", k.synth_cross_flow, "Citation share sent to sibling leaves")
            ->capture_default_str();
        s->add_option("--seed", k.synth_seed, "Generator seed")->envname("HOMOPHILY_SEED")->capture_default_str();
        bind_out(s, k);
    }
    {
        auto& c = add("oracle", "Exact null distribution by enumeration (small corpora)", cmd_oracle);
        bind_corpus(c.app, c.config, "Cleaned corpus snapshot");
        bind_flow(c.app, c.config);
        c.app->add_option("--cap", c.config.enumeration_cap, "Abort beyond this many count tables")
            ->capture_default_str();
        bind_out(c.app, c.config);
    }
    {
        auto& c = add("report", "Render results.csv, histogram.json and tree.json from a results directory",
                      cmd_report);
        bind_results(c.app, c.config);
        c.app->add_option("--bins", c.config.bins, "Histogram bins")->capture_default_str();
        bind_out(c.app, c.config);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error module=cli message=" << one_line(e.what()) << '\n';
        return 2;
    }

    for (auto& cmd : commands) {
        if (!cmd->app->parsed()) continue;
        try {
            auto& cfg = cmd->config;
            cfg.validate();
            fs::create_directories(cfg.out);
            const auto config = cfg.to_json();
            write_json(cfg.out / "config.json", config);
            const auto seeds = cmd->run(cfg);
            cli::write_manifest(cfg.out, config, cmd->inputs(), seeds);
            return 0;
        } catch (const Error& e) {
            std::cerr << "error module=" << e.module() << " message=" << one_line(e.what()) << '\n';
        } catch (const fs::filesystem_error& e) {
            std::cerr << "error module=io message=" << one_line(e.what()) << '\n';
        } catch (const std::exception& e) {
            std::cerr << "error module=internal message=" << one_line(e.what()) << '\n';
        }
        return 1;
    }
    return 2;
}
