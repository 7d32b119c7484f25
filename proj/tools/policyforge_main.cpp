#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "policyforge/classify.hpp"
#include "policyforge/corpus.hpp"
#include "policyforge/csv.hpp"
#include "policyforge/fileio.hpp"
#include "policyforge/moderate.hpp"
#include "policyforge/pipeline.hpp"
#include "policyforge/service.hpp"
#include "policyforge/sweep.hpp"
#include "policyforge/topics.hpp"

namespace pf = policyforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kEnvironment = 2;

std::string read_input(const std::string& path) {
  if (path == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  return pf::read_file(path);
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_input(path));
  } catch (const json::parse_error& e) {
    throw pf::ConfigError(path + ": " + e.what());
  }
}

void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
  } else {
    pf::write_file_atomic(path, content);
  }
}

pf::classify::Values values_from(const json& j) {
  const json& v = j.contains("values") ? j.at("values") : j;
  try {
    return v.get<pf::classify::Values>();
  } catch (const json::exception& e) {
    throw pf::ConfigError(std::string("values must map category keys to labels: ") + e.what());
  }
}

// ---- subcommands ------------------------------------------------------------

struct IngestArgs {
  std::string corpus, add, text, timestamp;
};

int run_ingest(const IngestArgs& a) {
  pf::corpus::FileCorpusStore store(a.corpus);
  pf::corpus::PolicyCorpus c;
  if (!a.add.empty()) {
    if (a.text.empty()) throw pf::ConfigError("--add needs --text");
    pf::corpus::PolicyText policy;
    policy.text = read_input(a.text);
    if (a.timestamp.empty()) {
      policy.timestamp = pf::Timestamp::now();
    } else {
      auto t = pf::Timestamp::parse(a.timestamp);
      if (!t) throw pf::ConfigError("--timestamp must be 'YYYY-MM-DD HH:MM:SS'");
      policy.timestamp = *t;
    }
    c = store.upsert(a.add, policy);
  } else {
    c = store.load();
  }
  std::cout << "corpus " << a.corpus << " version=" << c.version << " nodes=" << c.node_count()
            << " segments=" << c.segments.size() << "\n";
  return kOk;
}

struct DiscoverArgs {
  std::string corpus, config, out = "topic_model.json";
};

int run_discover(const DiscoverArgs& a) {
  pf::pipeline::DiscoverConfig config;
  if (!a.config.empty()) config = pf::pipeline::discover_config_from_json(read_json_file(a.config));
  const auto corpus = pf::corpus::load_corpus(a.corpus);
  const auto model = pf::pipeline::discover(corpus, config);
  pf::topics::save_topic_model(model, a.out);
  for (const auto& t : model.representations) {
    std::cout << "topic " << t.topic_id << " (" << t.doc_count << " docs):";
    for (const auto& [term, w] : t.top_words) std::cout << " " << term;
    std::cout << "\n";
  }
  if (model.coherence) {
    std::printf("coherence %.6f\n", *model.coherence);
  } else {
    std::printf("coherence undefined\n");
  }
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

struct SweepArgs {
  std::string plan, corpus, out;
  std::size_t max_new_rows = 0;
};

int run_sweep_cmd(const SweepArgs& a) {
  const auto plan = pf::sweep::load_plan(a.plan);
  const auto corpus = pf::corpus::load_corpus(a.corpus);
  fs::create_directories(a.out);
  pf::sweep::SweepOptions options;
  options.journal = fs::path(a.out) / pf::sweep::kJournalName;
  if (a.max_new_rows > 0) options.max_new_rows = a.max_new_rows;
  const auto result = pf::sweep::run_sweep(plan, corpus, options);
  pf::sweep::emit_report(result, a.out);
  std::cout << "rows " << result.rows.size() << (result.complete ? "" : " (incomplete, rerun to resume)") << "\n";
  if (const auto* best = result.find(result.best)) {
    std::printf("best %s coherence %.6f\n", best->fingerprint.c_str(), best->coherence);
  }
  return kOk;
}

struct ProviderArgs {
  std::string provider = "rule", endpoint, model;

  pf::classify::ProviderConfig config() const {
    pf::classify::ProviderConfig c;
    c.name = provider;
    if (!endpoint.empty()) c.endpoint = endpoint;
    if (!model.empty()) c.model = model;
    return c;
  }
};

int run_classify(const ProviderArgs& p, const std::string& text) {
  auto provider = pf::classify::make_provider(p.config());
  const auto c = pf::classify::classify_statement(read_input(text), *provider);
  std::cout << pf::classify::to_json(c).dump(2) << "\n";
  return kOk;
}

int run_evaluate(const ProviderArgs& p, const std::string& dataset_path, const std::string& out) {
  const auto dataset = pf::classify::load_labeled_dataset(dataset_path);
  auto provider = pf::classify::make_provider(p.config(), &dataset);
  const auto report = pf::classify::evaluate(*provider, dataset);
  write_output(out, pf::classify::report_csv(report));
  auto show = [](const char* name, const pf::classify::Averages& avg) {
    std::printf("%-18s precision %s recall %s\n", name,
                avg.precision ? std::to_string(*avg.precision).c_str() : "n/a",
                avg.recall ? std::to_string(*avg.recall).c_str() : "n/a");
  };
  std::cout << "provider " << report.provider << " statements " << report.n_statements << " dataset "
            << report.dataset_fingerprint << "\n";
  show("macro (all)", report.macro_overall);
  show("macro (mentioned)", report.macro_mentioned);
  if (out != "-") std::cout << "wrote " << out << "\n";
  return kOk;
}

struct ModerateArgs {
  std::string config, data_dir, class_id;
  // settings
  std::string values, overrides;
  bool confirm = false;
  long long version = -1;
  double threshold = -1.0;
  // references
  std::string kind = "learning", texts, question;
};

struct ModerateContext {
  fs::path data_dir = "policyforge-data";
  pf::moderate::ModerationPolicy policy;
  pf::embed::EmbeddingConfig embedding;
};

ModerateContext moderate_context(const ModerateArgs& a) {
  ModerateContext ctx;
  if (!a.config.empty()) {
    const auto sc = pf::service::load_server_config(a.config);
    ctx.data_dir = sc.data_dir;
    ctx.policy = sc.moderation;
    ctx.embedding = sc.similarity_embedding;
  }
  if (!a.data_dir.empty()) ctx.data_dir = a.data_dir;
  return ctx;
}

int run_moderate_settings(const ModerateArgs& a) {
  const auto ctx = moderate_context(a);
  pf::moderate::SettingsStore store(ctx.data_dir / "classes");
  const auto values = values_from(read_json_file(a.values));
  pf::classify::Values overrides;
  if (!a.overrides.empty()) overrides = values_from(read_json_file(a.overrides));
  std::optional<long long> version;
  if (a.version >= 0) {
    version = a.version;
  } else if (auto existing = store.find(a.class_id)) {
    version = existing->version;  // CLI edits are sequential; take the latest
  }
  std::optional<double> threshold;
  if (a.threshold >= 0.0) threshold = a.threshold;
  const auto s = store.put(a.class_id, values, overrides, a.confirm, version, threshold);
  std::cout << pf::moderate::to_json(s).dump(2) << "\n";
  return kOk;
}

int run_moderate_show(const ModerateArgs& a) {
  const auto ctx = moderate_context(a);
  pf::moderate::SettingsStore store(ctx.data_dir / "classes");
  std::cout << pf::moderate::to_json(store.get(a.class_id)).dump(2) << "\n";
  return kOk;
}

int run_moderate_references(const ModerateArgs& a) {
  const auto ctx = moderate_context(a);
  pf::moderate::SettingsStore store(ctx.data_dir / "classes");
  store.get(a.class_id);
  const auto j = read_json_file(a.texts);
  if (!j.is_array()) throw pf::ConfigError("--texts must hold a JSON array of strings");
  const auto texts = j.get<std::vector<std::string>>();
  store.put_references(a.class_id, pf::moderate::kind_from_string(a.kind), texts);
  std::cout << "stored " << texts.size() << " " << a.kind << " texts for " << a.class_id << "\n";
  return kOk;
}

int run_moderate_decide(const ModerateArgs& a) {
  const auto ctx = moderate_context(a);
  pf::moderate::SettingsStore store(ctx.data_dir / "classes");
  const auto settings = store.get(a.class_id);
  pf::moderate::TutorRequest req{a.class_id, pf::moderate::kind_from_string(a.kind), read_input(a.question)};
  pf::moderate::Similarity sim;
  if (req.kind == pf::moderate::RequestKind::Learning) {
    auto embedder = pf::embed::make_embedder(ctx.embedding);
    for (auto kind : {pf::moderate::RequestKind::Assignment, pf::moderate::RequestKind::Assessment}) {
      const auto refs = store.references(a.class_id, kind);
      if (refs.empty()) continue;
      const double v = pf::moderate::assignment_similarity(req.question, refs, *embedder);
      (kind == pf::moderate::RequestKind::Assignment ? sim.assignment : sim.assessment) = v;
    }
  }
  const auto d = pf::moderate::decide(settings, req, sim, ctx.policy);
  std::cout << pf::moderate::to_json(d).dump(2) << "\n";
  return kOk;
}

struct ServeArgs {
  std::string config, host, data_dir, ui_dir, corpus_dir;
  int port = -1;
};

int run_serve(const ServeArgs& a) {
  auto config = a.config.empty() ? pf::service::ServerConfig{} : pf::service::load_server_config(a.config);
  if (!a.host.empty()) config.host = a.host;
  if (a.port >= 0) config.port = a.port;
  if (!a.data_dir.empty()) config.data_dir = a.data_dir;
  if (!a.ui_dir.empty()) config.ui_dir = a.ui_dir;
  if (!a.corpus_dir.empty()) config.corpus_dir = a.corpus_dir;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  pf::service::Server server(config);
  const int port = server.bind();
  std::cout << "listening on http://" << config.host << ":" << port << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

struct ReduceArgs {
  std::string corpus, config, dump;
};

int run_reduce(const ReduceArgs& a) {
  pf::pipeline::DiscoverConfig config;
  if (!a.config.empty()) config = pf::pipeline::discover_config_from_json(read_json_file(a.config));
  if (!config.umap) throw pf::ConfigError("the config disables reduction (\"umap\": null)");
  const auto corpus = pf::corpus::load_corpus(a.corpus);
  const auto prepared = pf::pipeline::prepare(corpus, config.include_history);
  const auto vocab = pf::topics::build_vocabulary(prepared.docs, config.min_df);
  const auto inputs = pf::pipeline::embedding_inputs(prepared, vocab, config.phase);
  pf::pipeline::FeatureMemo memo;
  const auto reduced = memo.features(config.embedding, config.umap, prepared.segment_ids, inputs);

  std::ostringstream out;
  pf::csv::Row header = {"segment_id"};
  for (std::size_t c = 0; c < reduced->cols(); ++c) header.push_back("x" + std::to_string(c));
  pf::csv::write_row(out, header);
  char buf[32];
  for (std::size_t r = 0; r < reduced->rows(); ++r) {
    pf::csv::Row row = {prepared.segment_ids[r]};
    for (double v : reduced->row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      row.emplace_back(buf);
    }
    pf::csv::write_row(out, row);
  }
  write_output(a.dump, out.str());
  if (a.dump != "-") std::cerr << "wrote " << reduced->rows() << " x " << reduced->cols() << " to " << a.dump << "\n";
  return kOk;
}

int exit_code(const pf::Error& e) {
  switch (e.error_class()) {
    case pf::ErrorClass::Provider:
    case pf::ErrorClass::Io:
      return kEnvironment;
    default:
      return kValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"policyforge: topic discovery, classification and moderation for GenAI academic policies"};
  app.require_subcommand(1);
  std::function<int()> action;

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "validate a corpus file, or add a policy text to a node");
  c_ingest->add_option("--corpus", ingest.corpus, "corpus JSON file")->required();
  auto* add_opt = c_ingest->add_option("--add", ingest.add, "node id to receive a new policy text");
  c_ingest->add_option("--text", ingest.text, "policy text file, or - for stdin")->needs(add_opt);
  c_ingest->add_option("--timestamp", ingest.timestamp, "'YYYY-MM-DD HH:MM:SS' (default: now)")->needs(add_opt);
  c_ingest->callback([&] { action = [&] { return run_ingest(ingest); }; });

  DiscoverArgs discover;
  auto* c_discover = app.add_subcommand("discover", "fit one topic model and report its coherence");
  c_discover->add_option("--corpus", discover.corpus)->required();
  c_discover->add_option("--config", discover.config, "discover config JSON");
  c_discover->add_option("--out", discover.out, "topic model output path")->capture_default_str();
  c_discover->callback([&] { action = [&] { return run_discover(discover); }; });

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "run a hyperparameter sweep; rerunning resumes from the journal");
  c_sweep->add_option("--plan", sweep.plan)->required();
  c_sweep->add_option("--corpus", sweep.corpus)->required();
  c_sweep->add_option("--out", sweep.out, "report directory")->required();
  c_sweep->add_option("--max-new-rows", sweep.max_new_rows, "stop after this many new rows");
  c_sweep->callback([&] { action = [&] { return run_sweep_cmd(sweep); }; });

  ProviderArgs classify_provider;
  std::string classify_text;
  auto* c_classify = app.add_subcommand("classify", "classify one policy statement");
  c_classify->add_option("--provider", classify_provider.provider, "rule or llm")->capture_default_str();
  c_classify->add_option("--endpoint", classify_provider.endpoint, "chat completions URL (llm)");
  c_classify->add_option("--model", classify_provider.model, "model name (llm)");
  c_classify->add_option("--text", classify_text, "text file, or - for stdin")->required();
  c_classify->callback([&] { action = [&] { return run_classify(classify_provider, classify_text); }; });

  ProviderArgs eval_provider;
  std::string eval_dataset, eval_out = "report.csv";
  auto* c_eval = app.add_subcommand("evaluate", "per-category precision and recall on a labeled CSV");
  c_eval->add_option("--provider", eval_provider.provider, "rule, llm or gold")->capture_default_str();
  c_eval->add_option("--endpoint", eval_provider.endpoint);
  c_eval->add_option("--model", eval_provider.model);
  c_eval->add_option("--dataset", eval_dataset)->required();
  c_eval->add_option("--out", eval_out, "report CSV, or -")->capture_default_str();
  c_eval->callback([&] { action = [&] { return run_evaluate(eval_provider, eval_dataset, eval_out); }; });

  ModerateArgs mod;
  auto* c_mod = app.add_subcommand("moderate", "manage class settings and moderate tutoring requests");
  c_mod->require_subcommand(1);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", mod.config, "server config JSON (data_dir, moderation policy)");
    sub->add_option("--data-dir", mod.data_dir, "data directory (default policyforge-data)");
    sub->add_option("--class", mod.class_id, "class id")->required();
  };
  auto* m_set = c_mod->add_subcommand("settings", "store classified values, overrides and confirmation");
  add_common(m_set);
  m_set->add_option("--values", mod.values, "classification JSON or {category: label}")->required();
  m_set->add_option("--overrides", mod.overrides, "{category: label} JSON file");
  m_set->add_flag("--confirm", mod.confirm, "mark the settings confirmed");
  m_set->add_option("--version", mod.version, "expected current version (default: latest)");
  m_set->add_option("--similarity-threshold", mod.threshold, "per-class escalation threshold");
  m_set->callback([&] { action = [&] { return run_moderate_settings(mod); }; });
  auto* m_show = c_mod->add_subcommand("show", "print effective settings with provenance");
  add_common(m_show);
  m_show->callback([&] { action = [&] { return run_moderate_show(mod); }; });
  auto* m_refs = c_mod->add_subcommand("references", "store assignment or assessment texts");
  add_common(m_refs);
  m_refs->add_option("--kind", mod.kind, "assignment or assessment")->required();
  m_refs->add_option("--texts", mod.texts, "JSON array of strings")->required();
  m_refs->callback([&] { action = [&] { return run_moderate_references(mod); }; });
  auto* m_decide = c_mod->add_subcommand("decide", "decide how a tutoring request may be served");
  add_common(m_decide);
  m_decide->add_option("--kind", mod.kind, "learning, assignment, assessment or research")->capture_default_str();
  m_decide->add_option("--question", mod.question, "question file, or - for stdin")->required();
  m_decide->callback([&] { action = [&] { return run_moderate_decide(mod); }; });

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "run the HTTP API");
  c_serve->add_option("--config", serve.config, "server config JSON");
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--port", serve.port, "0 picks a free port");
  c_serve->add_option("--data-dir", serve.data_dir);
  c_serve->add_option("--corpus-dir", serve.corpus_dir, "directory holding corpus files named by corpus_ref");
  c_serve->add_option("--ui-dir", serve.ui_dir, "static files served under /ui");
  c_serve->callback([&] { action = [&] { return run_serve(serve); }; });

  ReduceArgs reduce;
  auto* c_reduce = app.add_subcommand("reduce", "embed and reduce a corpus, dumping the low-dim matrix");
  c_reduce->add_option("--corpus", reduce.corpus)->required();
  c_reduce->add_option("--config", reduce.config, "discover config JSON (embedding and umap)");
  c_reduce->add_option("--dump", reduce.dump, "CSV output path, or -")->required();
  c_reduce->callback([&] { action = [&] { return run_reduce(reduce); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    return action();
  } catch (const pf::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEnvironment;
  }
}
