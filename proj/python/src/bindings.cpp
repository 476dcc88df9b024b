#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "homophily/corpus.hpp"
#include "homophily/diagnostics.hpp"
#include "homophily/flow.hpp"
#include "homophily/inference.hpp"
#include "homophily/metrics.hpp"
#include "homophily/regression.hpp"
#include "homophily/sampler.hpp"
#include "homophily/sensitivity.hpp"
#include "homophily/validation.hpp"

namespace py = pybind11;
using namespace homophily;
using json = nlohmann::json;

namespace {

py::object to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
        case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list l;
            for (const auto& x : j) l.append(to_py(x));
            return l;
        }
        case json::value_t::object: {
            py::dict d;
            for (const auto& [k, v] : j.items()) d[py::str(k)] = to_py(v);
            return d;
        }
        default: return py::none();
    }
}

json from_py(py::handle h) {
    if (h.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
    if (py::isinstance<py::int_>(h)) return h.cast<std::int64_t>();
    if (py::isinstance<py::float_>(h)) return h.cast<double>();
    if (py::isinstance<py::str>(h)) return h.cast<std::string>();
    if (py::isinstance<py::dict>(h)) {
        json j = json::object();
        for (auto [k, v] : h.cast<py::dict>()) j[py::str(k).cast<std::string>()] = from_py(v);
        return j;
    }
    if (py::isinstance<py::sequence>(h)) {
        json j = json::array();
        for (auto x : h.cast<py::sequence>()) j.push_back(from_py(x));
        return j;
    }
    throw py::type_error("cannot convert " + py::repr(h).cast<std::string>() + " to JSON");
}

Gender gender_of(const std::string& s) {
    auto g = parse_gender(s);
    if (!g) throw py::value_error("unknown gender '" + s + "' (use F, M or U)");
    return *g;
}

std::vector<Gender> genders_of(py::handle seq) {
    std::vector<Gender> out;
    for (auto x : seq) out.push_back(gender_of(py::str(x).cast<std::string>()));
    return out;
}

std::vector<PaperGenders> papers_of(const py::iterable& papers) {
    std::vector<PaperGenders> out;
    for (auto p : papers) out.push_back(genders_of(p));
    return out;
}

py::dict alpha_dict(const AlphaResult& r) {
    py::dict d;
    d["p"] = r.p;
    d["q"] = r.q;
    d["alpha"] = r.defined ? py::object(py::float_(r.alpha)) : py::none();
    d["defined"] = r.defined;
    d["n_female"] = r.n_female;
    d["n_male"] = r.n_male;
    return d;
}

py::object fraction(const Rational& r) {
    return py::module_::import("fractions").attr("Fraction")(r.numerator(), r.denominator());
}

py::array_t<double> array(const std::vector<double>& v) { return py::array_t<double>(py::ssize_t(v.size()), v.data()); }

Index field(const Corpus& c, const std::string& id) { return id == kRootFieldId ? Corpus::root() : c.field_index(id); }

py::dict traces_dict(const Corpus& c, const std::vector<Index>& fields, const std::vector<std::vector<double>>& t) {
    py::dict d;
    for (std::size_t i = 0; i < fields.size(); ++i) d[py::str(c.fields()[fields[i]].id)] = array(t[i]);
    return d;
}

/// Chain results keep a copy of the corpus they were drawn from, so field ids
/// can be resolved without passing it again.
struct PyChainRun {
    ChainRun run;
    std::shared_ptr<const Corpus> corpus;
};

struct PyFullTest {
    FullTestResult result;
    std::shared_ptr<const Corpus> corpus;
};

TestOptions make_options(const std::string& procedure, double rate, bool include_root, bool per_level, bool plus_one) {
    TestOptions o;
    o.procedure = parse_fdr_procedure(procedure);
    o.rate = rate;
    o.include_root = include_root;
    o.per_level_families = per_level;
    o.plus_one = plus_one;
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Gender homophily permutation tests on hierarchically clustered co-authorship corpora";

    static py::exception<Error> error(m, "HomophilyError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (e.module() + ": " + e.what()).c_str());
        }
    });

    // ---- corpus
    py::class_<Corpus, std::shared_ptr<Corpus>>(m, "Corpus")
        .def_property_readonly("field_ids",
                               [](const Corpus& c) {
                                   std::vector<std::string> ids;
                                   for (const auto& f : c.fields()) ids.push_back(f.id);
                                   return ids;
                               })
        .def_property_readonly("terminal_ids",
                               [](const Corpus& c) {
                                   std::vector<std::string> ids;
                                   for (Index f : c.terminal_fields()) ids.push_back(c.fields()[f].id);
                                   return ids;
                               })
        .def_property_readonly("n_papers", [](const Corpus& c) { return c.papers().size(); })
        .def_property_readonly("n_authorships", [](const Corpus& c) { return c.authorships().size(); })
        .def_property_readonly("max_depth", &Corpus::max_depth)
        .def("level", [](const Corpus& c, const std::string& id) { return std::string(level_name(c.level_tag(field(c, id)))); })
        .def("parent",
             [](const Corpus& c, const std::string& id) -> py::object {
                 const auto& p = c.fields()[field(c, id)].parent;
                 return p ? py::object(py::str(c.fields()[*p].id)) : py::none();
             })
        .def("count_gender", [](const Corpus& c, const std::string& g) { return c.count_gender(gender_of(g)); })
        .def("papers",
             [](const Corpus& c) {
                 py::list out;
                 for (const auto& p : c.papers()) {
                     std::string g;
                     for (Index a : p.authorships) g += gender_code(c.authorships()[a].gender);
                     out.append(py::make_tuple(p.id, c.fields()[p.field].id, p.year, g));
                 }
                 return out;
             },
             "(paper_id, terminal_field_id, year, genders) per paper")
        .def("write", [](const Corpus& c, const std::filesystem::path& dir) { write_corpus(c, dir); })
        .def("__eq__", [](const Corpus& a, const Corpus& b) { return a == b; })
        .def("__repr__", [](const Corpus& c) {
            return "<Corpus " + std::to_string(c.fields().size() - 1) + " fields, " +
                   std::to_string(c.papers().size()) + " papers, " + std::to_string(c.authorships().size()) +
                   " authorships>";
        });

    py::class_<CorpusBuilder>(m, "CorpusBuilder")
        .def(py::init<>())
        .def("add_field",
             [](CorpusBuilder& b, std::string id, std::optional<Index> parent) { return b.add_field(std::move(id), parent); },
             py::arg("id"), py::arg("parent") = py::none())
        .def("add_paper",
             [](CorpusBuilder& b, Index f, py::iterable genders, int year, std::string id) {
                 const auto g = genders_of(genders);
                 return b.add_paper(f, std::span<const Gender>(g), year, std::move(id));
             },
             py::arg("field"), py::arg("genders"), py::arg("year") = 2000, py::arg("id") = "")
        .def("add_flow", &CorpusBuilder::add_flow)
        .def("build", [](const CorpusBuilder& b) { return std::make_shared<Corpus>(b.build()); });

    m.def("load_corpus", [](const std::filesystem::path& dir) { return std::make_shared<Corpus>(load_corpus(dir)); });
    m.def(
        "ingest_corpus",
        [](const std::filesystem::path& papers, const std::filesystem::path& authorships,
           const std::filesystem::path& hierarchy, std::optional<std::filesystem::path> flows, int year_min,
           int year_max, int max_depth) {
            IngestConfig cfg{year_min, year_max, max_depth};
            auto r = ingest_corpus(CorpusFiles{papers, authorships, hierarchy, flows}, cfg);
            return py::make_tuple(std::make_shared<Corpus>(std::move(r.corpus)), to_py(r.report.to_json()));
        },
        py::arg("papers"), py::arg("authorships"), py::arg("hierarchy"), py::arg("flows") = py::none(),
        py::arg("year_min") = 1960, py::arg("year_max") = 2011, py::arg("max_depth") = 6);
    m.def("clean_corpus", [](const Corpus& c) {
        auto r = clean_corpus(c);
        return py::make_tuple(std::make_shared<Corpus>(std::move(r.corpus)), to_py(r.stats.to_json()));
    });

    // ---- metrics
    m.def("compute_alpha", [](const py::iterable& papers) { return alpha_dict(compute_alpha(papers_of(papers))); },
          "Alpha of gender lists, one list (or string such as 'MMF') per paper");
    m.def("compute_alpha_exact", [](const py::iterable& papers) -> py::object {
        const auto r = compute_alpha_exact(papers_of(papers));
        return r.defined ? fraction(r.alpha) : py::none();
    });
    m.def("field_alpha", [](const Corpus& c, const std::string& id) { return alpha_dict(compute_alpha(c, field(c, id))); });
    m.def("fm_decomposition", [](double alpha, double pi) {
        const auto d = fm_decomposition(alpha, pi);
        return py::dict(py::arg("fm") = d.fm, py::arg("mm") = d.mm, py::arg("ff") = d.ff);
    });
    m.def("alpha_bounds", &alpha_bounds);

    // ---- flow
    py::class_<SwapMatrix>(m, "SwapMatrix")
        .def_property_readonly("size", &SwapMatrix::size)
        .def("__call__", &SwapMatrix::operator())
        .def("dense", [](const SwapMatrix& s) {
            py::array_t<double> a({py::ssize_t(s.size()), py::ssize_t(s.size())});
            auto v = a.mutable_unchecked<2>();
            for (Index j = 0; j < s.size(); ++j)
                for (Index k = 0; k < s.size(); ++k) v(j, k) = s(j, k);
            return a;
        });
    m.def("build_swap_matrix", [](const Corpus& c, double threshold) { return build_swap_matrix(c, threshold); },
          py::arg("corpus"), py::arg("threshold") = 0.05);

    // ---- sampler
    py::class_<ChainPlan>(m, "ChainPlan")
        .def(py::init([](std::size_t iterations, std::size_t burn_in, std::size_t thin, std::uint64_t seed,
                         double continue_prob, std::size_t proposals, const std::string& length_mode,
                         bool check_invariants, std::size_t threads) {
                 ChainPlan p;
                 p.iterations = iterations;
                 p.burn_in = burn_in;
                 p.thin = thin;
                 p.seed = seed;
                 p.continue_prob = continue_prob;
                 p.proposals_per_iteration = proposals;
                 p.length_mode = parse_cycle_length_mode(length_mode);
                 p.check_invariants = check_invariants;
                 p.threads = threads;
                 return p;
             }),
             py::arg("iterations") = 45000, py::arg("burn_in") = 20000, py::arg("thin") = 1, py::arg("seed") = 1,
             py::arg("continue_prob") = 0.5, py::arg("proposals_per_iteration") = 1,
             py::arg("length_mode") = "geometric", py::arg("check_invariants") = false, py::arg("threads") = 1)
        .def_readwrite("iterations", &ChainPlan::iterations)
        .def_readwrite("burn_in", &ChainPlan::burn_in)
        .def_readwrite("thin", &ChainPlan::thin)
        .def_readwrite("seed", &ChainPlan::seed)
        .def_readwrite("continue_prob", &ChainPlan::continue_prob)
        .def_readwrite("threads", &ChainPlan::threads)
        .def_property_readonly("samples", &ChainPlan::samples)
        .def("to_dict", [](const ChainPlan& p) { return to_py(p.to_json()); });

    py::class_<PyChainRun>(m, "ChainRun")
        .def_property_readonly("field_ids",
                               [](const PyChainRun& r) {
                                   std::vector<std::string> ids;
                                   for (Index f : r.run.fields) ids.push_back(r.corpus->fields()[f].id);
                                   return ids;
                               })
        .def("trace", [](const PyChainRun& r, const std::string& id) { return array(r.run.trace(field(*r.corpus, id))); })
        .def("traces", [](const PyChainRun& r) { return traces_dict(*r.corpus, r.run.fields, r.run.traces); })
        .def_property_readonly("acceptance_rate", [](const PyChainRun& r) { return r.run.counters.acceptance_rate(); })
        .def_property_readonly("plan", [](const PyChainRun& r) { return r.run.plan; })
        .def("write_binary", [](const PyChainRun& r) {
            std::ostringstream os;
            write_trace_binary(r.run, *r.corpus, os);
            return py::bytes(os.str());
        });
    m.def(
        "run_chain",
        [](std::shared_ptr<const Corpus> c, const SwapMatrix& matrix, const ChainPlan& plan) {
            py::gil_scoped_release release;
            return PyChainRun{run_chain(*c, matrix, plan), c};
        },
        py::arg("corpus"), py::arg("matrix"), py::arg("plan"));

    // ---- inference
    m.def("empirical_pvalue",
          [](std::optional<double> observed, const std::vector<double>& trace, bool plus_one) {
              return empirical_pvalue(observed, trace, plus_one);
          },
          py::arg("observed"), py::arg("trace"), py::arg("plus_one") = false);
    m.def(
        "fdr_adjust",
        [](const std::vector<double>& p, const std::string& procedure, double rate) {
            const auto r = fdr_adjust(p, parse_fdr_procedure(procedure), rate);
            return py::make_tuple(array(r.adjusted), std::vector<bool>(r.rejected.begin(), r.rejected.end()));
        },
        py::arg("pvalues"), py::arg("procedure") = "BY", py::arg("rate") = 0.05);
    m.def("chain_plans", &chain_plans, py::arg("base"), py::arg("chains"));

    py::class_<PyFullTest>(m, "TestResult")
        .def("to_dict", [](const PyFullTest& r) { return to_py(r.result.suite.to_json()); })
        .def("field", [](const PyFullTest& r, const std::string& id) {
            const auto& f = r.result.suite.result(field(*r.corpus, id));
            py::dict d;
            d["observed_alpha"] = f.observed_alpha ? py::object(py::float_(*f.observed_alpha)) : py::none();
            d["expected_alpha"] = f.expected_alpha;
            d["p"] = f.raw_p;
            d["adjusted_p"] = f.adjusted_p;
            d["significant"] = f.significant;
            d["level"] = std::string(level_name(f.level));
            return d;
        })
        .def("significant_fraction",
             [](const PyFullTest& r, const std::string& level) {
                 for (auto tag : {LevelTag::Root, LevelTag::Top, LevelTag::Composite, LevelTag::Terminal})
                     if (level_name(tag) == level) return r.result.suite.significant_fraction(tag);
                 throw py::value_error("level must be root, top, composite or terminal");
             })
        .def("pooled", [](const PyFullTest& r) { return traces_dict(*r.corpus, r.result.pooled.fields, r.result.pooled.traces); })
        .def_property_readonly("runs", [](const PyFullTest& r) {
            std::vector<PyChainRun> runs;
            for (const auto& x : r.result.runs) runs.push_back({x, r.corpus});
            return runs;
        })
        .def("results_table", [](const PyFullTest& r) {
            std::ostringstream os;
            write_results_table(r.result.suite, *r.corpus, os);
            return os.str();
        });
    m.def(
        "run_full_test",
        [](std::shared_ptr<const Corpus> c, const SwapMatrix& matrix, const std::vector<ChainPlan>& plans,
           const std::string& procedure, double rate, bool include_root, bool per_level, bool plus_one,
           std::size_t chain_threads) {
            const auto opts = make_options(procedure, rate, include_root, per_level, plus_one);
            py::gil_scoped_release release;
            return PyFullTest{run_full_test(*c, matrix, plans, opts, chain_threads), c};
        },
        py::arg("corpus"), py::arg("matrix"), py::arg("plans"), py::arg("procedure") = "BY", py::arg("rate") = 0.05,
        py::arg("include_root") = true, py::arg("per_level") = false, py::arg("plus_one") = false,
        py::arg("chain_threads") = 1);
    m.def(
        "build_naive_null",
        [](const Corpus& c, int level, double threshold) {
            auto n = build_naive_null(c, level, threshold);
            py::dict map;
            for (Index f = 0; f < n.field_map.size(); ++f)
                if (n.field_map[f]) map[py::str(c.fields()[f].id)] = n.corpus.fields()[*n.field_map[f]].id;
            return py::make_tuple(std::make_shared<Corpus>(std::move(n.corpus)), std::move(n.matrix), map);
        },
        py::arg("corpus"), py::arg("level"), py::arg("threshold") = 0.05);

    // ---- diagnostics
    m.def(
        "ks_two_sample",
        [](const std::vector<double>& a, const std::vector<double>& b, std::size_t reps, bool with_replacement,
           std::uint64_t seed) {
            const auto r = ks_two_sample(a, b, KSOptions{reps, with_replacement, seed, 1});
            return py::dict(py::arg("statistic") = r.statistic, py::arg("p_value") = r.p_value,
                            py::arg("reps") = r.reps);
        },
        py::arg("a"), py::arg("b"), py::arg("reps") = 1000, py::arg("with_replacement") = false,
        py::arg("seed") = 1);
    m.def("ks_uniformity", [](const std::vector<double>& v) {
        const auto r = ks_uniformity(v);
        return py::dict(py::arg("statistic") = r.statistic, py::arg("p_value") = r.p_value);
    });
    m.def("kolmogorov_pvalue", &kolmogorov_pvalue, py::arg("d"), py::arg("n"));
    m.def(
        "compare_chains",
        [](const std::vector<PyChainRun>& runs, std::size_t reps, std::uint64_t seed) {
            if (runs.empty()) throw py::value_error("no chains");
            std::vector<ChainRun> raw;
            for (const auto& r : runs) raw.push_back(r.run);
            return to_py(compare_chains(raw, *runs.front().corpus, {}, KSOptions{reps, false, seed, 1}).to_json());
        },
        py::arg("runs"), py::arg("reps") = 1000, py::arg("seed") = 1);
    m.def("batch_means_se", &batch_means_se, py::arg("trace"), py::arg("batches") = 20);

    // ---- sensitivity
    m.def(
        "impute_missing",
        [](const Corpus& c, const std::string& kind, std::uint64_t seed) {
            Rng rng(seed);
            return std::make_shared<Corpus>(impute_missing(c, parse_imputation_kind(kind), rng));
        },
        py::arg("corpus"), py::arg("scenario"), py::arg("seed"));
    m.def(
        "run_sensitivity",
        [](const Corpus& c, const std::string& kind, std::size_t imputations, std::uint64_t base_seed,
           const ChainPlan& chain, std::size_t threads) {
            SensitivityPlan plan;
            plan.chain = chain;
            plan.threads = threads;
            ImputationScenario sc{parse_imputation_kind(kind), imputations, base_seed};
            py::gil_scoped_release release;
            auto rep = run_sensitivity(c, sc, plan);
            py::gil_scoped_acquire acquire;
            return to_py(rep.to_json());
        },
        py::arg("corpus"), py::arg("scenario"), py::arg("imputations") = 10, py::arg("base_seed") = 1,
        py::arg("chain") = SensitivityPlan{}.chain, py::arg("threads") = 1);

    // ---- regression
    m.def(
        "fit_gee_logistic",
        [](const std::vector<std::vector<double>>& rows, const std::vector<double>& outcome,
           const std::vector<std::int64_t>& clusters, std::vector<std::string> names, bool small_sample) {
            GEEOptions o;
            o.small_sample_correction = small_sample;
            return to_py(fit_gee_logistic(rows, outcome, clusters, std::move(names), o).to_json());
        },
        py::arg("rows"), py::arg("outcome"), py::arg("clusters"), py::arg("names") = std::vector<std::string>{},
        py::arg("small_sample") = false);
    m.def(
        "regress_significance",
        [](const Corpus& uncleaned, const PyFullTest& test, bool small_sample) {
            const auto table = build_covariates(uncleaned, test.result.suite);
            GEEOptions o;
            o.small_sample_correction = small_sample;
            py::list dropped;
            for (const auto& d : table.dropped) dropped.append(py::make_tuple(d.field_id, d.reason));
            auto fit = to_py(fit_gee_logistic(design_from(table), o).to_json());
            fit["dropped"] = dropped;
            return fit;
        },
        py::arg("uncleaned"), py::arg("test"), py::arg("small_sample") = false,
        "Logistic GEE of terminal-field significance on size and gender-share covariates");

    // ---- validation
    m.def("generate_corpus",
          [](const py::dict& spec) { return std::make_shared<Corpus>(generate_corpus(SynthSpec::from_json(from_py(spec)))); });
    m.def("tree_spec",
          [](std::size_t top, std::size_t leaves, std::size_t papers, std::uint64_t seed) {
              return to_py(tree_spec(top, leaves, papers, seed).to_json());
          },
          py::arg("top_fields"), py::arg("leaves_per_top"), py::arg("papers_per_leaf"), py::arg("seed") = 1);
    m.def(
        "enumerate_null_exact",
        [](const Corpus& c, const SwapMatrix& matrix, std::uint64_t cap) {
            return to_py(enumerate_null_exact(c, matrix, cap).to_json(c));
        },
        py::arg("corpus"), py::arg("matrix"), py::arg("cap") = kDefaultEnumerationCap);
}
