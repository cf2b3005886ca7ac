#include "topicforge/embedding.hpp"
#include "topicforge/error.hpp"
#include "topicforge/lda.hpp"
#include "topicforge/pipeline.hpp"
#include "topicforge/stats.hpp"
#include "topicforge/text.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace topicforge;

namespace {

RunConfig config_from(const std::string& path, std::optional<unsigned> threads, std::optional<std::string> out) {
  auto c = load_run_config(path);
  if (threads) c.threads = *threads;
  if (out) c.paths.output_dir = fs::absolute(*out);
  c.validate();
  return c;
}

Facet facet_from(const std::string& name) {
  const auto f = parse_facet(name);
  if (!f) throw ValidationError("facet must be gender, nationality, income or education");
  return *f;
}

py::dict test_dict(const TestResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["df"] = r.df ? py::cast(*r.df) : py::none();
  d["p_value"] = r.p_value;
  d["stars"] = std::string(stars_text(r.stars));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "topicforge native core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  // Batch commands return their JSON summary as a string.
  m.def("preprocess", [](const std::string& config, std::optional<unsigned> threads, std::optional<std::string> out) {
    const auto c = config_from(config, threads, out);
    py::gil_scoped_release release;
    return cmd_preprocess(c);
  }, py::arg("config"), py::arg("threads") = py::none(), py::arg("out") = py::none());

  m.def("sweep", [](const std::string& config, std::optional<unsigned> threads, std::optional<std::string> out) {
    const auto c = config_from(config, threads, out);
    py::gil_scoped_release release;
    return cmd_sweep(c);
  }, py::arg("config"), py::arg("threads") = py::none(), py::arg("out") = py::none());

  m.def("fit", [](const std::string& config, std::size_t k, std::optional<std::string> partition_by,
                  std::optional<unsigned> threads, std::optional<std::string> out) {
    const auto c = config_from(config, threads, out);
    py::gil_scoped_release release;
    return cmd_fit(c, k, partition_by);
  }, py::arg("config"), py::arg("k"), py::arg("partition_by") = py::none(), py::arg("threads") = py::none(),
     py::arg("out") = py::none());

  m.def("assign", [](const std::string& config, std::optional<unsigned> threads, std::optional<std::string> out) {
    const auto c = config_from(config, threads, out);
    py::gil_scoped_release release;
    return cmd_assign(c);
  }, py::arg("config"), py::arg("threads") = py::none(), py::arg("out") = py::none());

  m.def("analyze", [](const std::string& config, const std::string& facet, std::optional<std::string> within,
                      std::optional<unsigned> threads, std::optional<std::string> out) {
    const auto c = config_from(config, threads, out);
    const auto f = facet_from(facet);
    std::optional<Facet> w;
    if (within) w = facet_from(*within);
    py::gil_scoped_release release;
    return cmd_analyze(c, f, w);
  }, py::arg("config"), py::arg("facet"), py::arg("within") = py::none(), py::arg("threads") = py::none(),
     py::arg("out") = py::none());

  m.def("centers2d", [](const std::string& config, std::optional<unsigned> threads, std::optional<std::string> out) {
    const auto c = config_from(config, threads, out);
    py::gil_scoped_release release;
    return cmd_centers2d(c);
  }, py::arg("config"), py::arg("threads") = py::none(), py::arg("out") = py::none());

  m.def("synth", [](const std::string& spec_json, const std::string& out) {
    const auto spec = parse_synth_spec(spec_json);
    py::gil_scoped_release release;
    return cmd_synth(spec, fs::absolute(out));
  }, py::arg("spec_json"), py::arg("out"));

  m.def("normalize_config", [](const std::string& path) { return run_config_json(load_run_config(path)); },
        py::arg("config"));

  // Building blocks.
  m.def("segment_sentences", py::overload_cast<std::string_view>(&segment_sentences), py::arg("text"));
  m.def("tokenize", &tokenize, py::arg("sentence"));
  m.def("cosine_similarity", [](const std::vector<double>& a, const std::vector<double>& b) {
    return cosine_similarity(a, b);
  }, py::arg("a"), py::arg("b"));

  m.def("fit_lda", [](const std::vector<TokenStream>& docs, std::size_t vocab_size, std::size_t k,
                      std::uint64_t seed, std::size_t iterations, std::size_t burn_in, std::size_t sample_lag,
                      std::optional<double> alpha, double beta) {
    LdaConfig cfg;
    cfg.k = k;
    cfg.seed = seed;
    cfg.iterations = iterations;
    cfg.burn_in = burn_in;
    cfg.sample_lag = sample_lag;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.validate();
    LdaModel model;
    {
      py::gil_scoped_release release;
      model = fit_lda(docs, vocab_size, cfg);
    }
    py::dict d;
    d["k"] = k;
    d["vocab_size"] = vocab_size;
    d["phi"] = model.phi;
    d["theta"] = model.theta;
    d["z"] = model.z;
    return d;
  }, py::arg("docs"), py::arg("vocab_size"), py::arg("k"), py::arg("seed") = 0, py::arg("iterations") = 1000,
     py::arg("burn_in") = 500, py::arg("sample_lag") = 10, py::arg("alpha") = py::none(), py::arg("beta") = 0.01);

  m.def("two_proportion_test", [](double x1, double n1, double x2, double n2, bool pooled) {
    return test_dict(two_proportion_test(x1, n1, x2, n2, pooled));
  }, py::arg("x1"), py::arg("n1"), py::arg("x2"), py::arg("n2"), py::arg("pooled") = true);
  m.def("welch_t_test", [](double m1, double s1, double n1, double m2, double s2, double n2) {
    return test_dict(welch_t_test(m1, s1, n1, m2, s2, n2));
  }, py::arg("mean1"), py::arg("sd1"), py::arg("n1"), py::arg("mean2"), py::arg("sd2"), py::arg("n2"));
  m.def("chi_square_independence", [](const std::vector<std::vector<double>>& table) {
    return test_dict(chi_square_independence(table));
  }, py::arg("table"));
}
