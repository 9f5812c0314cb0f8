// segcbir command-line tool: index, query, eval, serve, synth.
//
// Exit codes: 0 success, 1 domain / runtime error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segcbir/evaluation.hpp"
#include "segcbir/index_store.hpp"
#include "segcbir/retrieval_engine.hpp"
#include "segcbir/service_api.hpp"
#include "segcbir/synthetic.hpp"

namespace fs = std::filesystem;
using namespace segcbir;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct CommonFlags {
  std::string index;
  std::size_t scope = kDefaultScope;
  std::size_t rmax = kMaxMatchedSegments;
  std::uint64_t seed = 0;
  double eps = 1e-6;
  std::size_t iterations = kDefaultIterations;
  std::string reweight = "rw-ibcd";

  SessionConfig session_config() const {
    SessionConfig c;
    c.scope = scope;
    c.r_max = rmax;
    c.seed = seed;
    c.total_iterations = iterations;
    try {
      c.eps = Epsilon(eps);
      c.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    const auto rw = parse_reweighting(reweight);
    if (!rw) throw UsageError("--reweight must be rw or rw-ibcd");
    c.reweighting = *rw;
    return c;
  }
};

void add_session_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--index", f.index, "Index file")->required();
  cmd->add_option("--scope", f.scope, "Images retrieved per iteration (S)");
  cmd->add_option("--rmax", f.rmax, "Maximum matched segments r (1-4)");
  cmd->add_option("--seed", f.seed, "Seed for query sampling");
  cmd->add_option("--eps", f.eps, "Epsilon replacing a zero relevant-set deviation");
  cmd->add_option("--iterations", f.iterations, "Iterations per session, initial display included");
}

int cmd_index(const std::string& root, const std::string& out, const IndexBuildConfig& config) {
  if (!fs::is_directory(root)) {
    std::cerr << "error: image root not found: " << root << '\n';
    return kExitDomain;
  }
  auto result = build_index(root, config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  save_index(result.index, out);
  write_manifest(result.index, manifest_path(out));
  std::cout << "indexed " << result.index.size() << " images in "
            << result.index.categories.size() << " categories -> " << out << '\n';
  return kExitOk;
}

int cmd_query(const CommonFlags& flags, std::optional<ImageId> id, const std::string& image,
              const std::string& scheme_text) {
  if (id.has_value() == !image.empty()) throw UsageError("give exactly one of --id or --image");
  const bool plain_ws = scheme_text == "ws";
  const auto scheme = parse_scheme(scheme_text);
  if (!plain_ws && !scheme) {
    throw UsageError("--scheme must be wos, ws, ws-inter, ws-union or ws-comb");
  }
  const SessionConfig config = flags.session_config();

  const FeatureIndex index = load_index(flags.index);
  const SearchIndex search(index);
  Query query;
  if (id) {
    query = Query::from_index(search, *id);
  } else {
    IndexBuildConfig bc;
    bc.block_h = index.meta.block_h;
    bc.block_w = index.meta.block_w;
    bc.k = index.meta.k;
    const auto features = analyze_image(read_image(image).to_hsv(), bc,
                                        image_seed(index.meta.seed, index.size()));
    query = Query::from_features(index, features);
  }

  const auto wos = initial_wos(query, search, config);
  std::vector<ImageId> ids;
  std::map<ImageId, double> score;
  auto take = [&](const RetrievalPage& page) {
    for (std::size_t i = 0; i < page.size(); ++i) score.emplace(page.images[i], page.scores[i]);
  };
  if (!plain_ws && *scheme == Scheme::Wos) {
    ids = wos.images;
    take(wos);
  } else {
    const auto ws = initial_ws(query, search, config);
    take(ws);
    take(wos);
    if (plain_ws) {
      ids = ws.images;
    } else if (*scheme == Scheme::WsInter) {
      ids = init_intersection(wos, ws, config.scope);
    } else {
      // Union and combination both display D_WS and D_WOS; without feedback
      // the combination shows them as two consecutive pages.
      ids = *scheme == Scheme::WsUnion ? init_union(wos, ws) : ws.images;
      if (*scheme == Scheme::WsComb) {
        for (ImageId w : init_union(wos, ws)) {
          if (std::find(ids.begin(), ids.end(), w) == ids.end()) ids.push_back(w);
        }
      }
    }
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::printf("%zu\t%u\t%s\t%.10g\n", i + 1, ids[i], index.images[ids[i]].path.c_str(),
                score.at(ids[i]));
  }
  return kExitOk;
}

int cmd_eval(const CommonFlags& flags, const std::string& schemes_text,
             const std::string& reweights_text, const std::string& queries_text,
             const std::string& out_dir, bool r_sweep) {
  std::vector<ExperimentArm> arms;
  const auto schemes = split_list(schemes_text);
  const auto reweights = split_list(reweights_text);
  if (!r_sweep && schemes.empty()) throw UsageError("--scheme list is empty");
  if (!r_sweep && reweights.empty()) throw UsageError("--reweight list is empty");
  for (const auto& s : schemes) {
    const auto scheme = parse_scheme(s);
    if (!scheme) throw UsageError("unknown scheme '" + s + "'");
    for (const auto& r : reweights) {
      const auto rw = parse_reweighting(r);
      if (!rw) throw UsageError("unknown reweighting '" + r + "'");
      arms.push_back({*scheme, *rw});
    }
  }
  QuerySelection selection;
  try {
    selection = QuerySelection::parse(queries_text);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  CommonFlags base = flags;
  base.reweight = "rw-ibcd";
  const SessionConfig config = base.session_config();

  const FeatureIndex index = load_index(flags.index);
  const SearchIndex search(index);
  const Oracle oracle = Oracle::from_search(search);
  const auto queries = select_queries(oracle, selection, config.seed);
  const std::string db_name = fs::path(flags.index).stem().string();

  if (!out_dir.empty()) fs::create_directories(out_dir);
  std::string summary;
  if (r_sweep) {
    summary += render_r_sweep(run_r_sweep(search, oracle, config, queries), db_name);
  }
  if (!arms.empty()) {
    const EvalReport report = run_experiment(search, oracle, config, arms, queries);
    if (!summary.empty()) summary += '\n';
    summary += render_summary(report, db_name);
    if (!out_dir.empty()) {
      std::ofstream records(fs::path(out_dir) / "records.jsonl");
      write_records(records, report);
    }
  }
  if (!out_dir.empty()) std::ofstream(fs::path(out_dir) / "summary.txt") << summary;
  std::cout << summary;
  return kExitOk;
}

int cmd_serve(const CommonFlags& flags, const std::string& host, int port,
              const std::string& images_root) {
  ServiceOptions options;
  options.defaults = flags.session_config();
  options.image_root = images_root;
  const FeatureIndex index = load_index(flags.index);
  const SearchIndex search(index);
  SessionService service(index, search, options);
  httplib::Server server;
  mount_routes(server, service);
  std::cerr << "serving " << index.size() << " images on http://" << host << ':' << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ':' << port << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation-assisted content-based image retrieval with relevance feedback"};
  app.require_subcommand(1);

  IndexBuildConfig build;
  std::string root;
  std::string out;
  auto* index_cmd = app.add_subcommand("index", "Build a feature index from an image tree");
  index_cmd->add_option("--root", root, "Directory with one subdirectory per category")->required();
  index_cmd->add_option("--out", out, "Index file to write")->required();
  index_cmd->add_option("--seed", build.seed, "k-means seed");
  index_cmd->add_option("--k", build.k, "Clusters per image")->check(CLI::Range(1, 8));
  std::size_t block = kDefaultBlockSize;
  index_cmd->add_option("--block", block, "Block edge in pixels")->check(CLI::Range(2, 256));
  index_cmd->add_option("--workers", build.workers, "Worker threads")->check(CLI::PositiveNumber);

  CommonFlags qflags;
  std::optional<ImageId> qid;
  std::string qimage;
  std::string qscheme = "wos";
  auto* query_cmd = app.add_subcommand("query", "One-shot retrieval without feedback");
  add_session_flags(query_cmd, qflags);
  query_cmd->add_option("--id", qid, "Indexed image id to query with");
  query_cmd->add_option("--image", qimage, "Image file to query with");
  query_cmd->add_option("--scheme", qscheme, "wos, ws, ws-inter, ws-union or ws-comb");

  CommonFlags eflags;
  std::string eschemes = "wos,ws-inter,ws-union,ws-comb";
  std::string ereweight = "rw-ibcd";
  std::string equeries = "all";
  std::string eout;
  bool r_sweep = false;
  auto* eval_cmd = app.add_subcommand("eval", "Oracle-feedback batch evaluation");
  add_session_flags(eval_cmd, eflags);
  eval_cmd->add_option("--scheme", eschemes, "Comma-separated schemes");
  eval_cmd->add_option("--reweight", ereweight, "Comma-separated: rw, rw-ibcd");
  eval_cmd->add_option("--queries", equeries, "all or sample:K");
  eval_cmd->add_option("--out", eout, "Directory for records.jsonl and summary.txt");
  eval_cmd->add_flag("--r-sweep", r_sweep, "Also report first-iteration WS efficiency for r=1..4");

  CommonFlags sflags;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string images_root;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP session service");
  add_session_flags(serve_cmd, sflags);
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--images-root", images_root, "Override the indexed image root");
  serve_cmd->add_option("--reweight", sflags.reweight, "rw or rw-ibcd");

  synthetic::DatasetConfig synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write the procedural test dataset");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--categories", synth.categories)->check(CLI::Range(1, 64));
  synth_cmd->add_option("--per-category", synth.per_category)->check(CLI::Range(1, 10000));
  synth_cmd->add_option("--size", synth.size)->check(CLI::Range(8, 4096));
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--min-share", synth.min_colour_share)->check(CLI::Range(0.0, 0.25));
  synth_cmd->add_option("--skew", synth.proportion_skew)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--object-min", synth.object_min)->check(CLI::Range(0.05, 0.5));
  synth_cmd->add_option("--object-max", synth.object_max)->check(CLI::Range(0.05, 0.5));
  synth_cmd->add_option("--background-colours", synth.background_colours)
      ->check(CLI::Range(1, 8));
  synth_cmd->add_option("--shade-prob", synth.shade_probability)->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*index_cmd) {
      build.block_h = build.block_w = block;
      return cmd_index(root, out, build);
    }
    if (*query_cmd) return cmd_query(qflags, qid, qimage, qscheme);
    if (*eval_cmd) return cmd_eval(eflags, eschemes, ereweight, equeries, eout, r_sweep);
    if (*serve_cmd) return cmd_serve(sflags, host, port, images_root);
    if (*synth_cmd) {
      synthetic::write_dataset(synth_out, synth);
      std::cout << "wrote " << synth.categories * synth.per_category << " images to " << synth_out
                << '\n';
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}
