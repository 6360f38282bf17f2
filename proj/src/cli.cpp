#include "pdpp/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pdpp/dpp.hpp"
#include "pdpp/eval.hpp"
#include "pdpp/format.hpp"
#include "pdpp/io.hpp"
#include "pdpp/kernel.hpp"
#include "pdpp/personalization.hpp"
#include "pdpp/service.hpp"

namespace pdpp {
namespace {

// Raised for failures inside a subcommand; carries the stage name.
struct StageError {
  std::string stage;
  std::string message;
};

template <typename F>
auto in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw StageError{stage, e.what()};
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path.string());
  return out;
}

void write_comments(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) out << "# " << k << '=' << v << '\n';
}

std::set<std::string> parse_filter(const std::string& text) {
  std::set<std::string> out;
  for (auto part : split(text, ",")) {
    part = trim(part);
    if (!part.empty()) out.emplace(part);
  }
  return out;
}

// "hmin" or a non-negative number.
std::optional<double> parse_l(const std::string& text) {
  if (text == "hmin" || text == "h_min") return std::nullopt;
  double v = 0.0;
  if (!parse_double(text, v) || !(v >= 0.0)) {
    throw ArgumentError("--l must be 'hmin' or a number >= 0, got '" + text + "'");
  }
  return v;
}

struct IngestOptions {
  std::string ratings;
  std::string movies;
  std::string out_dir = "data";
};

int cmd_ingest(const IngestOptions& o, std::ostream& out) {
  auto data = in_stage("load", [&] { return parse_movielens(o.ratings, o.movies); });
  data.ratings.sort_by_user_time();
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"command", "ingest"},
      {"ratings", o.ratings},
      {"movies", o.movies},
      {"records", std::to_string(data.ratings.records.size())},
      {"malformed_ratings", std::to_string(data.ratings_report.malformed)},
      {"items", std::to_string(data.catalog.size())},
      {"malformed_movies", std::to_string(data.catalog_report.malformed)},
      {"dataset_hash", dataset_hash(data.ratings)},
  };
  in_stage("write", [&] {
    const std::filesystem::path dir(o.out_dir);
    auto r = open_out(dir / "ratings.csv");
    write_comments(r, meta);
    write_ratings_csv(r, data.ratings);
    auto c = open_out(dir / "catalog.tsv");
    write_comments(c, meta);
    write_catalog(c, data.catalog);
    return 0;
  });
  out << "ingested " << data.ratings.records.size() << " ratings and " << data.catalog.size()
      << " items into " << o.out_dir << '\n';
  return 0;
}

struct InitAlphaOptions {
  std::string ratings;
  std::string events;
  std::string movies;
  double alpha_0 = 0.6;
  std::string l = "0";
  std::size_t cold_start = kDefaultColdStartMinInteractions;
  std::string event_filter;
  std::string out = "alpha_snapshot.csv";
  std::string histogram;
  std::size_t bins = 20;
};

int cmd_init_alpha(const InitAlphaOptions& o, std::ostream& out) {
  if (o.ratings.empty() == o.events.empty()) {
    throw StageError{"validate", "exactly one of --ratings or --events is required"};
  }
  const auto l = in_stage("validate", [&] { return parse_l(o.l); });
  const ItemCatalog catalog = in_stage("load", [&] { return read_catalog(o.movies); });
  const auto filter = parse_filter(o.event_filter);

  std::vector<std::pair<UserId, ItemId>> interactions;
  in_stage("load", [&] {
    if (!o.ratings.empty()) {
      for (const auto& r : read_ratings(o.ratings).records) interactions.emplace_back(r.user, r.item);
    } else {
      std::ifstream in(o.events);
      if (!in) throw IngestError("cannot open " + o.events);
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        InteractionEvent ev;
        try {
          ev = parse_event(line);
        } catch (const IngestError& e) {
          throw IngestError(o.events + " line " + std::to_string(lineno) + ": " + e.what());
        }
        if (event_type_accepted(ev, filter)) interactions.emplace_back(ev.user_id, ev.item_id);
      }
    }
    return 0;
  });

  std::size_t unknown = 0;
  const auto profiles = build_profiles(interactions, catalog, &unknown);
  if (unknown > 0) spdlog::warn("{} interaction(s) reference items missing from the catalog", unknown);

  PersonalizationParams params;
  params.alpha_0 = o.alpha_0;
  params.cold_start_min_interactions = o.cold_start;
  const auto population = in_stage("stats", [&] {
    return compute_population_stats(profiles, o.cold_start, o.bins);
  });
  params.l = l.value_or(population.stats.h_min);
  AlphaIndex index = in_stage("index", [&] { return build_alpha_index(profiles, params); });
  index.metadata["command"] = "init-alpha";
  index.metadata["source"] = o.ratings.empty() ? o.events : o.ratings;
  index.metadata["movies"] = o.movies;
  index.metadata["l_spec"] = o.l;
  index.metadata["event_filter"] = o.event_filter;

  in_stage("write", [&] {
    auto f = open_out(o.out);
    write_alpha_snapshot(f, index);
    if (!o.histogram.empty()) {
      auto h = open_out(o.histogram);
      for (const auto& [k, v] : index.metadata) h << "# " << k << '=' << v << '\n';
      h << "# h_min=" << format_double(population.stats.h_min) << '\n'
        << "# h_max=" << format_double(population.stats.h_max) << '\n'
        << "bin_lo,bin_hi,count,fraction\n";
      const auto& hist = population.histogram;
      for (std::size_t b = 0; b < hist.counts.size(); ++b) {
        const double lo = hist.lo + hist.width * static_cast<double>(b);
        h << format_double(lo) << ',' << format_double(lo + hist.width) << ',' << hist.counts[b]
          << ',' << format_double(static_cast<double>(hist.counts[b]) /
                                  static_cast<double>(population.stats.population_size))
          << '\n';
      }
    }
    return 0;
  });
  out << "wrote " << index.records.size() << " user record(s) to " << o.out << " (h_min="
      << format_double(index.stats.h_min) << ", h_max=" << format_double(index.stats.h_max)
      << ")\n";
  return 0;
}

struct EvaluateOptions {
  std::string config;
  std::map<std::string, std::string> overrides;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  ExperimentConfig cfg = in_stage("config", [&] {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : read_config(o.config);
    for (const auto& [k, v] : o.overrides) c.set(k, v);
    c.validate();
    return c;
  });
  const EvalReport report = in_stage("experiment", [&] { return run_experiment(cfg); });
  in_stage("write", [&] {
    write_report_files(cfg.output_dir, report);
    return 0;
  });
  print_report_table(out, report);
  out << "reports written to " << cfg.output_dir << '\n';
  return 0;
}

struct RerankFileOptions {
  std::string input;
  std::string output = "reranked.csv";
  std::string movies;
  std::optional<double> alpha;
  std::string snapshot;
  double alpha_0 = 0.6;
  std::size_t k = 5;
};

int cmd_rerank_file(const RerankFileOptions& o, std::ostream& out) {
  if (o.alpha.has_value() == !o.snapshot.empty()) {
    throw StageError{"validate", "exactly one of --alpha or --snapshot is required"};
  }
  auto genres = in_stage("load", [&] {
    return std::make_shared<const GenreIndex>(read_catalog(o.movies));
  });
  std::optional<AlphaIndex> index;
  if (!o.snapshot.empty()) {
    index = in_stage("load", [&] {
      std::ifstream in(o.snapshot);
      if (!in) throw IngestError("cannot open " + o.snapshot);
      PersonalizationParams defaults;
      defaults.alpha_0 = o.alpha_0;
      return read_alpha_snapshot(in, defaults);
    });
  }

  // user -> (item, score) in file order; users in first-seen order.
  std::vector<UserId> users;
  std::map<UserId, std::vector<std::pair<ItemId, double>>> batches;
  in_stage("load", [&] {
    std::ifstream in(o.input);
    if (!in) throw IngestError("cannot open " + o.input);
    std::string line;
    std::size_t lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
      ++lineno;
      const auto view = trim(line);
      if (view.empty() || view.front() == '#') continue;
      if (header) {
        header = false;
        continue;
      }
      const auto f = split(view, ",");
      double score = 0.0;
      if (f.size() < 3 || trim(f[0]).empty() || trim(f[1]).empty() || !parse_double(f[2], score)) {
        throw IngestError(o.input + " line " + std::to_string(lineno) +
                          ": expected user_id,item_id,score");
      }
      const UserId user(trim(f[0]));
      auto [it, inserted] = batches.try_emplace(user);
      if (inserted) users.push_back(user);
      it->second.emplace_back(std::string(trim(f[1])), score);
    }
    return 0;
  });

  auto file = in_stage("write", [&] { return open_out(o.output); });
  write_comments(file, {{"command", "rerank-file"},
                        {"input", o.input},
                        {"movies", o.movies},
                        {"alpha", o.alpha ? format_double(*o.alpha) : std::string()},
                        {"snapshot", o.snapshot},
                        {"k", std::to_string(o.k)}});
  file << "user_id,rank,item_id,score,alpha\n";
  std::size_t fallback = 0;
  in_stage("rerank", [&] {
    for (const auto& user : users) {
      const auto& batch = batches[user];
      std::vector<ItemId> ids;
      std::vector<double> q;
      std::map<ItemId, std::size_t> pos;
      for (const auto& [item, score] : batch) {
        auto [it, inserted] = pos.emplace(item, ids.size());
        if (inserted) {
          ids.push_back(item);
          q.push_back(score);
        } else {
          q[it->second] = std::max(q[it->second], score);
        }
      }
      const double alpha = index ? index->lookup(user).alpha : *o.alpha;
      auto scores = std::make_shared<const RelevanceScores>(make_relevance(ids, q));
      auto sim = std::make_shared<const GenreSimilarity>(genres, scores->ids);
      const Selection sel = fast_greedy_map(KernelSpec(scores, sim, alpha), o.k);
      fallback += sel.fallback_fill;
      for (std::size_t r = 0; r < sel.indices.size(); ++r) {
        const std::size_t i = sel.indices[r];
        file << user << ',' << (r + 1) << ',' << scores->ids[i] << ','
             << format_double(q[i]) << ',' << format_double(alpha) << '\n';
      }
    }
    return 0;
  });
  out << "re-ranked " << users.size() << " user(s) into " << o.output;
  if (fallback > 0) out << " (" << fallback << " slot(s) filled by relevance)";
  out << '\n';
  return 0;
}

struct ServeOptions {
  HttpConfig http;
  double alpha_0 = 0.6;
  double l = 0.0;
  std::size_t cold_start = kDefaultColdStartMinInteractions;
  std::string movies;
  std::string snapshot;
  std::string history;
  std::string event_filter;
};

int cmd_serve(const ServeOptions& o, std::ostream& out) {
  auto genres = in_stage("load", [&] {
    return std::make_shared<const GenreIndex>(read_catalog(o.movies));
  });
  PersonalizationParams params;
  params.alpha_0 = o.alpha_0;
  params.l = o.l;
  params.cold_start_min_interactions = o.cold_start;
  RerankService service(genres, params, parse_filter(o.event_filter));
  in_stage("load", [&] {
    if (!o.history.empty()) {
      std::ifstream in(o.history);
      if (!in) throw IngestError("cannot open " + o.history);
      const auto n = service.load_history(in);
      spdlog::info("replayed {} historical event(s)", n);
    }
    if (!o.snapshot.empty()) {
      service.rebuild_index(std::filesystem::path(o.snapshot));
    } else if (!o.history.empty()) {
      service.publish_from_profiles();
    }
    return 0;
  });
  out << "alpha index holds " << service.snapshot()->records.size() << " user(s)\n";
  out.flush();
  HttpFrontend http(service, o.http);
  in_stage("serve", [&] {
    http.run();
    return 0;
  });
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalized DPP re-ranking toolkit", "pdpp"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Normalize MovieLens ratings and movies files");
  c_ingest->add_option("--ratings", ingest.ratings, "ratings.dat or ratings CSV")->required();
  c_ingest->add_option("--movies", ingest.movies, "movies.dat or tab-separated catalog")->required();
  c_ingest->add_option("--out-dir", ingest.out_dir, "Directory for ratings.csv and catalog.tsv");

  InitAlphaOptions init;
  auto* c_init = app.add_subcommand("init-alpha", "Compute entropy stats and the per-user alpha snapshot");
  c_init->add_option("--ratings", init.ratings, "Interactions as a ratings file");
  c_init->add_option("--events", init.events, "Interactions as a JSON-lines event file");
  c_init->add_option("--movies", init.movies, "Catalog with item genres")->required();
  c_init->add_option("--alpha0", init.alpha_0, "Shared trade-off alpha_0 in [0,1]");
  c_init->add_option("--l", init.l, "Normalization offset in nats, or 'hmin'");
  c_init->add_option("--cold-start", init.cold_start, "Minimum interactions for a personalized alpha");
  c_init->add_option("--event-filter", init.event_filter, "Comma-separated event types to count (empty: all)");
  c_init->add_option("--out", init.out, "Snapshot CSV path");
  c_init->add_option("--histogram", init.histogram, "Optional entropy histogram CSV path");
  c_init->add_option("--bins", init.bins, "Histogram bin count");

  EvaluateOptions eval;
  auto* c_eval = app.add_subcommand("evaluate", "Run the offline experiment and write reports");
  c_eval->add_option("--config", eval.config, "Flat key = value config file");
  struct Override {
    const char* flag;
    const char* key;
    const char* help;
    std::string value;
  };
  const ExperimentConfig defaults;
  std::map<std::string, std::string> default_values;
  for (const auto& [k, v] : defaults.to_key_values()) default_values[k] = v;
  std::vector<Override> overrides = {
      {"--ratings", "ratings", "Ratings file", {}},
      {"--movies", "movies", "Movies/catalog file", {}},
      {"--out-dir", "output_dir", "Report directory", {}},
      {"--split", "split_ratio", "Train fraction", {}},
      {"--threshold", "positivity_threshold", "Rating treated as positive", {}},
      {"--k", "k", "List length", {}},
      {"--grid", "grid", "Models separated by ';'", {}},
      {"--seed", "seed", "Split seed", {}},
      {"--runs", "runs", "Repeated runs with seeds seed..seed+runs-1", {}},
      {"--neighborhood", "neighborhood", "Item-CF neighbors per item", {}},
      {"--min-item-raters", "min_item_raters", "Drop items with fewer raters", {}},
      {"--min-user-ratings", "min_user_ratings", "Drop users with fewer ratings", {}},
      {"--cold-start", "cold_start_min_interactions", "Minimum interactions for pDPP personalization", {}},
      {"--workers", "workers", "Worker threads", {}},
      {"--impressions-log", "impressions_log", "Impression log CSV for DR/AD", {}},
      {"--downloads-log", "downloads_log", "Download log CSV for DR/AD", {}},
      {"--logs-model", "logs_model", "Row label that the logs belong to", {}},
  };
  for (auto& ov : overrides) {
    c_eval->add_option(ov.flag, ov.value, ov.help)->default_str(default_values[ov.key]);
  }

  RerankFileOptions rr;
  auto* c_rr = app.add_subcommand("rerank-file", "Re-rank a scored candidate CSV (user_id,item_id,score)");
  c_rr->add_option("--input", rr.input, "Scored candidates CSV")->required();
  c_rr->add_option("--output", rr.output, "Output CSV");
  c_rr->add_option("--movies", rr.movies, "Catalog with item genres")->required();
  c_rr->add_option("--alpha", rr.alpha, "Shared alpha in [0,1]");
  c_rr->add_option("--snapshot", rr.snapshot, "Alpha snapshot for per-user alpha");
  c_rr->add_option("--alpha0", rr.alpha_0, "alpha_0 for users missing from the snapshot");
  c_rr->add_option("--k", rr.k, "List length")->check(CLI::PositiveNumber);

  ServeOptions serve;
  auto* c_serve = app.add_subcommand("serve", "Start the re-ranking HTTP service");
  c_serve->add_option("--host", serve.http.host, "Bind address")->envname("PDPP_HOST");
  c_serve->add_option("--port", serve.http.port, "Port")->envname("PDPP_PORT");
  c_serve->add_option("--threads", serve.http.threads, "HTTP worker threads")->envname("PDPP_THREADS");
  c_serve->add_option("--alpha0", serve.alpha_0, "Shared trade-off alpha_0")->envname("PDPP_ALPHA0");
  c_serve->add_option("--l", serve.l, "Normalization offset in nats")->envname("PDPP_L");
  c_serve->add_option("--cold-start", serve.cold_start, "Minimum interactions for a personalized alpha")
      ->envname("PDPP_COLD_START");
  c_serve->add_option("--movies", serve.movies, "Catalog with item genres")
      ->envname("PDPP_CATALOG")
      ->required();
  c_serve->add_option("--snapshot", serve.snapshot, "Alpha snapshot CSV")->envname("PDPP_SNAPSHOT");
  c_serve->add_option("--history", serve.history, "JSON-lines events replayed at startup")
      ->envname("PDPP_HISTORY");
  c_serve->add_option("--event-filter", serve.event_filter, "Comma-separated event types to count")
      ->envname("PDPP_EVENT_FILTER");

  std::vector<std::string> argv_store;
  argv_store.emplace_back("pdpp");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest, out);
    if (c_init->parsed()) return cmd_init_alpha(init, out);
    if (c_eval->parsed()) {
      for (const auto& ov : overrides) {
        if (!ov.value.empty()) eval.overrides[ov.key] = ov.value;
      }
      return cmd_evaluate(eval, out);
    }
    if (c_rr->parsed()) return cmd_rerank_file(rr, out);
    if (c_serve->parsed()) return cmd_serve(serve, out);
  } catch (const StageError& e) {
    err << "error [" << e.stage << "]: " << e.message << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace pdpp
