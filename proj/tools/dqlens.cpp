// dqlens: run the service, build synthetic fixtures, and check sessions.
#include "dqlens/defect_lab.hpp"
#include "dqlens/error.hpp"
#include "dqlens/http_server.hpp"
#include "dqlens/register.hpp"
#include "dqlens/relation.hpp"
#include "dqlens/workbench.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path);
}

dqlens::RelationPtr read_relation(const std::string& path, char sep) {
  dqlens::LoadOptions opts;
  opts.separator = sep;
  return dqlens::load_relation(slurp(path), fs::path(path).stem().string(), opts);
}

std::vector<dqlens::RowId> read_rows(const std::string& path) {
  auto j = json::parse(slurp(path));
  if (j.is_object()) j = j.contains("injected_rows") ? j["injected_rows"] : j.at("rows");
  return j.get<std::vector<dqlens::RowId>>();
}

dqlens::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dqlens: visual data quality assessment service and fixture tools"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string config_file, listen, data_dir, static_dir;
  serve->add_option("--config", config_file, "JSON config file");
  serve->add_option("--listen", listen, "host:port (overrides config and environment)");
  serve->add_option("--data-dir", data_dir, "directory for logs, snapshots, sources and the workspace");
  serve->add_option("--static", static_dir, "directory of UI assets served at /");

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic fixture");
  std::size_t rows = 100000;
  std::uint64_t seed = 1;
  std::string schema_file, out_file;
  gen->add_option("--rows,-n", rows, "row count")->capture_default_str();
  gen->add_option("--seed", seed, "random seed")->capture_default_str();
  gen->add_option("--schema", schema_file, "schema JSON (default: employees)");
  gen->add_option("--out,-o", out_file, "output file (default stdout)");

  // inject
  auto* inj = app.add_subcommand("inject", "inject atypical tuples into a delimited file");
  std::string in_file, variant = "V1", truth_file, category;
  std::vector<std::string> targets, exclude_files;
  double rate = 0.0, magnitude = 8.0, superimposition = 0.5;
  char sep = ',';
  inj->add_option("--in,-i", in_file, "input file")->required();
  inj->add_option("--variant", variant, "V1, V2, V3 or V4")->capture_default_str();
  inj->add_option("--target", targets, "target attribute(s)")->required();
  inj->add_option("--category", category, "category attribute (V3)");
  inj->add_option("--rate", rate, "fraction of rows (default by variant)");
  inj->add_option("--magnitude", magnitude, "displacement in standard deviations")->capture_default_str();
  inj->add_option("--superimposition", superimposition, "V3 depth into the neighbour category")->capture_default_str();
  inj->add_option("--seed", seed, "random seed")->capture_default_str();
  inj->add_option("--exclude", exclude_files, "ground-truth files of earlier injections");
  inj->add_option("--out,-o", out_file, "output file")->required();
  inj->add_option("--truth", truth_file, "ground-truth JSON sidecar")->required();
  inj->add_option("--separator", sep, "field separator")->capture_default_str();

  // detect
  auto* det = app.add_subcommand("detect", "run an oracle detector");
  std::string method = "univariate", by;
  std::vector<std::string> attrs;
  double z = 4.5, quantile = 0.999;
  det->add_option("--in,-i", in_file, "input file")->required();
  det->add_option("--method", method, "univariate, category or joint")->capture_default_str();
  det->add_option("--attr", attrs, "attribute(s)")->required();
  det->add_option("--by", by, "category attribute (method category)");
  det->add_option("--z", z, "robust z threshold")->capture_default_str();
  det->add_option("--quantile", quantile, "chi-squared quantile (method joint)")->capture_default_str();
  det->add_option("--out,-o", out_file, "output file (default stdout)");
  det->add_option("--separator", sep, "field separator")->capture_default_str();

  // score
  auto* sc = app.add_subcommand("score", "score detected rows against ground truth");
  std::string detected_file;
  sc->add_option("--detected", detected_file, "JSON array or {\"rows\": [...]}")->required();
  sc->add_option("--truth", truth_file, "ground-truth JSON")->required();

  // replay
  auto* rep = app.add_subcommand("replay", "re-execute a session log and compare result digests");
  std::string log_file, sources_dir;
  bool keep_going = false;
  rep->add_option("--log", log_file, "session log (JSON lines)")->required();
  rep->add_option("--sources", sources_dir, "source store of the recording service")->required();
  rep->add_flag("--keep-going", keep_going, "report every step instead of stopping at the first mismatch");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      auto cfg = dqlens::load_service_config(config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file));
      if (!data_dir.empty()) cfg.data_dir = data_dir;
      if (!listen.empty()) {
        json j = {{"listen", listen}};
        auto parsed = dqlens::ServiceConfig::from_json(j);
        cfg.host = parsed.host;
        cfg.port = parsed.port;
      }
      dqlens::Workbench wb(cfg);
      dqlens::HttpServer server(wb, static_dir);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "dqlens listening on " << cfg.host << ":" << cfg.port << dqlens::kApiPrefix << "\n";
      if (!server.listen(cfg.host, cfg.port)) {
        std::cerr << "cannot listen on " << cfg.host << ":" << cfg.port << "\n";
        return 1;
      }
      return 0;
    }
    if (*gen) {
      auto schema = schema_file.empty() ? dqlens::SchemaSpec::employees(seed)
                                        : dqlens::schema_from_json(json::parse(slurp(schema_file)));
      if (!schema_file.empty() && gen->count("--seed")) schema.seed = seed;
      auto rel = dqlens::generate_base(schema, rows);
      write_out(out_file, dqlens::serialize_delimited(*rel, rel->options()));
      return 0;
    }
    if (*inj) {
      auto rel = read_relation(in_file, sep);
      dqlens::DefectSpec spec;
      spec.variant = dqlens::variant_from_string(variant);
      spec.target_attrs = targets;
      spec.magnitude = magnitude;
      spec.superimposition = superimposition;
      if (!category.empty()) spec.category_attr = category;
      spec.rate = rate > 0.0 ? rate : (spec.variant == dqlens::Variant::V1 ? 0.001 : 0.01);
      std::vector<dqlens::RowId> exclude;
      for (const auto& f : exclude_files) {
        auto more = read_rows(f);
        exclude.insert(exclude.end(), more.begin(), more.end());
      }
      auto result = dqlens::inject(*rel, spec, seed, exclude);
      write_out(out_file, dqlens::serialize_delimited(*result.relation, result.relation->options()));
      auto truth = dqlens::to_json(result.truth);
      truth["spec"] = dqlens::to_json(spec);
      truth["seed"] = seed;
      write_out(truth_file, truth.dump(2) + "\n");
      std::cerr << "injected " << result.truth.injected_rows.size() << " rows\n";
      return 0;
    }
    if (*det) {
      auto rel = read_relation(in_file, sep);
      json out;
      if (method == "univariate") {
        if (attrs.size() != 1) throw std::runtime_error("univariate detection takes one --attr");
        out = {{"rows", dqlens::detect_univariate(*rel, attrs[0], z)}};
      } else if (method == "category") {
        if (attrs.size() != 1 || by.empty()) throw std::runtime_error("category detection takes one --attr and --by");
        auto d = dqlens::detect_within_category(*rel, attrs[0], by, z);
        out = {{"rows", d.rows}, {"warnings", d.warnings}};
      } else if (method == "joint") {
        out = {{"rows", dqlens::detect_joint(*rel, attrs, quantile)}};
      } else {
        throw std::runtime_error("unknown method '" + method + "'");
      }
      write_out(out_file, out.dump() + "\n");
      return 0;
    }
    if (*sc) {
      auto s = dqlens::score(read_rows(detected_file), read_rows(truth_file));
      std::cout << dqlens::to_json(s).dump(2) << "\n";
      return 0;
    }
    if (*rep) {
      const auto entries = dqlens::parse_log(slurp(log_file));
      const auto scratch = fs::temp_directory_path() / ("dqlens-replay-" + std::to_string(::getpid()));
      dqlens::ServiceConfig cfg;
      cfg.data_dir = scratch;
      cfg.source_dir = sources_dir;
      cfg.restore_workspace = false;
      cfg.sync_log = false;
      dqlens::ReplayReport report;
      int rc = 0;
      {
        dqlens::Workbench wb(cfg);
        report = wb.replay(entries, false);
      }
      fs::remove_all(scratch);
      for (const auto& step : report.steps) {
        std::printf("%6llu %-16s %s%s%s\n", static_cast<unsigned long long>(step.seq),
                    std::string(dqlens::to_string(step.action)).c_str(), step.match ? "match" : "MISMATCH",
                    step.error.empty() ? "" : "  ", step.error.c_str());
        if (!step.match && !keep_going) break;
      }
      std::printf("%zu/%zu digests match\n", report.matched, report.steps.size());
      if (report.first_mismatch) {
        std::printf("first mismatch at seq %llu\n", static_cast<unsigned long long>(*report.first_mismatch));
        rc = 1;
      }
      return rc;
    }
  } catch (const dqlens::Error& e) {
    std::cerr << "error: " << dqlens::to_string(e.code()) << ": " << e.what() << "\n";
    if (!e.detail().is_null()) std::cerr << e.detail().dump(2) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
