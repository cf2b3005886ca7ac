#include "topicforge/error.hpp"
#include "topicforge/io.hpp"
#include "topicforge/log.hpp"
#include "topicforge/pipeline.hpp"
#include "topicforge/service.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>

using namespace topicforge;

namespace {

enum Exit { ok = 0, validation = 1, runtime = 2 };

struct Globals {
  bool json = false;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
};

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int report_error(const Globals& g, int code, std::string_view kind, const std::string& message) {
  if (g.json) {
    nlohmann::ordered_json j;
    j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << "\n";
  } else {
    std::cerr << "topicforge: " << kind << " error: " << message << "\n";
  }
  return code;
}

void print_summary(const Globals& g, const std::string& summary) {
  if (g.json) {
    std::cout << summary << "\n";
    return;
  }
  const auto j = nlohmann::json::parse(summary);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "artifacts") continue;
    std::cout << it.key() << ": " << (it->is_string() ? it->get<std::string>() : it->dump()) << "\n";
  }
  if (j.contains("artifacts"))
    for (const auto& a : j["artifacts"]) std::cout << "wrote " << a.get<std::string>() << "\n";
}

RunConfig load_config(const Globals& g, const std::string& path) {
  auto c = load_run_config(path);
  if (g.threads) c.threads = *g.threads;
  if (g.out) c.paths.output_dir = fs::absolute(*g.out);
  c.validate();
  return c;
}

Facet facet_arg(const std::string& name, const char* flag) {
  auto f = parse_facet(name);
  if (!f) throw ValidationError(std::string(flag) + " must be gender, nationality, income or education");
  return *f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topicforge: hybrid LDA and embedding topic extraction with cohort comparison"};
  app.require_subcommand(1);
  Globals g;
  app.add_flag("--json", g.json, "Machine-readable output; errors as JSON on stderr");
  app.add_option("--threads", g.threads, "Worker thread cap")->check(CLI::Range(1u, 1024u));
  app.add_option("--out", g.out, "Output directory (overrides paths.output_dir)");

  std::string config;
  std::size_t k = 0;
  std::optional<std::string> partition_by;
  std::string facet, within;
  std::string listen = "127.0.0.1:8080";
  std::optional<std::string> data_dir;
  std::string spec_path;

  auto* pre = app.add_subcommand("preprocess", "Segment, tokenize, promote phrases, lemmatize; write the corpus");
  pre->add_option("config", config, "Run config (JSON)")->required();

  auto* sweep = app.add_subcommand("sweep", "Coherence-vs-k curve over the configured k range");
  sweep->add_option("config", config, "Run config (JSON)")->required();

  auto* fit = app.add_subcommand("fit", "Fit LDA at a given k and write the model and top words");
  fit->add_option("config", config, "Run config (JSON)")->required();
  fit->add_option("--k", k, "Number of topics")->required()->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
  fit->add_option("--partition-by", partition_by, "Fit one model per value of this corpus column");

  auto* assign = app.add_subcommand("assign", "Assign sentences to topic centers; write snapshot CSVs");
  assign->add_option("config", config, "Run config (JSON)")->required();

  auto* analyze = app.add_subcommand("analyze", "Cohort difference tables");
  analyze->add_option("config", config, "Run config (JSON)")->required();
  analyze->add_option("--facet", facet, "gender | nationality | income | education")->required();
  analyze->add_option("--within", within, "Outer facet for nested comparisons");

  auto* centers = app.add_subcommand("centers2d", "Project topic centers to 2-D");
  centers->add_option("config", config, "Run config (JSON)")->required();

  auto* serve = app.add_subcommand("serve", "Run the curation API under /v1");
  serve->add_option("config", config, "Project config; its directory's parent becomes the data dir");
  serve->add_option("--listen", listen, "host:port or port")->envname("TOPICFORGE_LISTEN");
  serve->add_option("--data-dir", data_dir, "Project root")->envname("TOPICFORGE_DATA_DIR");

  auto* synth = app.add_subcommand("synth", "Generate planted-topic and planted-cohort test data");
  synth->add_option("spec", spec_path, "Synth spec (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(g, validation, "usage", e.what());
  }

  if (g.json) {
    set_log_sink([](LogLevel level, const std::string& m) {
      nlohmann::json j{{"level", level == LogLevel::warning ? "warning" : "info"}, {"message", m}};
      std::cerr << j.dump() << "\n";
    });
  }

  try {
    std::string summary;
    if (*pre) {
      summary = cmd_preprocess(load_config(g, config));
    } else if (*sweep) {
      summary = cmd_sweep(load_config(g, config));
    } else if (*fit) {
      summary = cmd_fit(load_config(g, config), k, partition_by);
    } else if (*assign) {
      summary = cmd_assign(load_config(g, config));
    } else if (*analyze) {
      const auto f = facet_arg(facet, "--facet");
      std::optional<Facet> w;
      if (!within.empty()) w = facet_arg(within, "--within");
      summary = cmd_analyze(load_config(g, config), f, w);
    } else if (*centers) {
      summary = cmd_centers2d(load_config(g, config));
    } else if (*synth) {
      const auto spec = parse_synth_spec(read_file(spec_path));
      summary = cmd_synth(spec, fs::absolute(g.out ? fs::path(*g.out) : fs::path(".")));
    } else if (*serve) {
      ServiceOptions opts;
      if (data_dir) {
        opts.data_dir = *data_dir;
      } else if (!config.empty()) {
        load_config(g, config);
        opts.data_dir = fs::absolute(config).parent_path().parent_path();
      } else {
        throw ValidationError("serve needs a project config, --data-dir or TOPICFORGE_DATA_DIR");
      }
      if (!fs::is_directory(opts.data_dir)) throw ValidationError("data dir not found: " + opts.data_dir.string());
      opts.threads = g.threads.value_or(1);
      const auto [host, port] = parse_listen_address(listen);
      CurationService service(opts);
      HttpServer server(service);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      nlohmann::ordered_json j{{"command", "serve"}, {"host", host}, {"port", bound}, {"data_dir", opts.data_dir.string()}};
      print_summary(g, j.dump());
      std::cout.flush();
      server.run();
      g_server = nullptr;
      return ok;
    }
    print_summary(g, summary);
    return ok;
  } catch (const ValidationError& e) {
    return report_error(g, validation, "validation", e.what());
  } catch (const ParseError& e) {
    return report_error(g, validation, "validation", e.what());
  } catch (const std::exception& e) {
    return report_error(g, runtime, "runtime", e.what());
  }
}
