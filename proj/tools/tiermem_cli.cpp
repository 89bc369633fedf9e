// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

// tiermem_cli: drives the memory engine over binary traces or synthetic
// stream specs and writes JSON-lines / CSV reports.
//
// Exit status: 0 success, 1 validation error, 2 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tiermem/bench.hpp"
#include "tiermem/errors.hpp"

namespace {

using namespace tiermem;

struct Options {
  std::string trace;
  std::string synth_spec;
  std::string config;
  std::string probes;
  std::string queries;
  std::string report;
  std::string variant;
  std::uint64_t seed = 0;
  bool serial = false;
  std::string lengths = "8,16,32,64,128";
  std::optional<std::uint64_t> frame;
  std::size_t bins = 20;
  double jitter = 0.0;
};

// Everything a subcommand needs about where frames come from.
struct Input {
  std::size_t dim = 0;
  std::optional<StreamSpec> spec;
  std::vector<TraceFrame> frames;  // synthetic frames, or the whole trace when loaded eagerly
  std::unique_ptr<std::ifstream> file;
  std::unique_ptr<TraceReader> reader;
  nlohmann::json source;

  FrameSource stream() {
    if (reader) return frames_from(*reader);
    return frames_from(frames);
  }
};

Input open_input(const Options& o, bool eager) {
  if (o.trace.empty() == o.synth_spec.empty()) {
    throw ValidationError("exactly one of --trace or --synth-spec is required");
  }
  Input in;
  if (!o.synth_spec.empty()) {
    in.spec = StreamSpec::load(o.synth_spec);
    in.dim = in.spec->dim;
    in.frames = generate_stream(*in.spec);
    in.source = {{"synth_spec", in.spec->to_json()}};
    return in;
  }
  in.source = {{"trace", o.trace}};
  if (eager) {
    std::uint32_t dim = 0;
    in.frames = read_trace_file(o.trace, &dim);
    in.dim = dim;
    return in;
  }
  in.file = std::make_unique<std::ifstream>(o.trace, std::ios::binary);
  if (!*in.file) throw IoError("cannot open trace " + o.trace);
  in.reader = std::make_unique<TraceReader>(*in.file);
  in.dim = in.reader->dim();
  return in;
}

ProbeBank load_bank(const Options& o, const Input& in) {
  if (!o.probes.empty()) return ProbeBank::load(o.probes);
  if (in.spec) return aligned_probe_bank(*in.spec);
  throw ValidationError("--probes is required with --trace");
}

RunContext make_context(const Options& o, const Input& in) {
  RunContext ctx;
  ctx.config = o.config.empty() ? TierConfig{} : TierConfig::load(o.config);
  ctx.config.validate();
  ctx.dim = in.dim;
  ctx.seed = o.seed;
  ctx.exec = o.serial ? Exec::serial : Exec::parallel;
  ctx.source = in.source;
  return ctx;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("failed writing to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

std::vector<QuerySpec> require_queries(const Options& o, std::size_t dim) {
  if (o.queries.empty()) throw ValidationError("--queries is required");
  return load_queries(o.queries, dim);
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v == 0) throw ValidationError("--lengths: bad entry '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ValidationError("--lengths: empty list");
  return out;
}

void cmd_synth(const Options& o) {
  if (o.synth_spec.empty()) throw ValidationError("synth: --synth-spec is required");
  if (o.trace.empty()) throw ValidationError("synth: --trace output path is required");
  const StreamSpec spec = StreamSpec::load(o.synth_spec);
  const auto frames = generate_stream(spec);
  write_trace_file(o.trace, static_cast<std::uint32_t>(spec.dim), frames);
  if (!o.queries.empty()) {
    std::string lines;
    for (std::size_t e = 0; e < spec.events.size(); ++e) {
      lines += query_for_event(spec, e, o.jitter, o.seed + e).to_json().dump() + "\n";
    }
    write_text(o.queries, lines);
  }
  if (!o.probes.empty()) write_text(o.probes, aligned_probe_bank(spec).to_json().dump(2) + "\n");
  if (!o.report.empty()) {
    nlohmann::json summary = {{"type", "synth"},
                              {"spec", spec.to_json()},
                              {"frames", frames.size()},
                              {"trace", o.trace}};
    write_text(o.report, summary.dump() + "\n");
  }
}

void cmd_ingest(const Options& o) {
  Input in = open_input(o, false);
  const ProbeBank bank = load_bank(o, in);
  const auto ctx = make_context(o, in);
  write_text(o.report, run_ingest(in.stream(), ctx, bank).to_jsonl());
}

void cmd_replay(const Options& o) {
  const Variant variant = Variant::parse(o.variant);
  Input in = open_input(o, false);
  const ProbeBank bank = load_bank(o, in);
  const auto ctx = make_context(o, in);
  const auto queries = require_queries(o, in.dim);
  write_text(o.report, run_query_replay(in.stream(), queries, ctx, bank, variant).to_jsonl());
}

void cmd_oracle(const Options& o) {
  Input in = open_input(o, true);
  const auto queries = require_queries(o, in.dim);
  write_text(o.report, run_oracle(in.frames, queries).to_jsonl());
}

void cmd_sweep(const Options& o) {
  if (o.synth_spec.empty()) throw ValidationError("sweep: --synth-spec is required");
  const auto lengths = parse_lengths(o.lengths);
  Input in = open_input(o, true);
  const ProbeBank bank = load_bank(o, in);
  const auto ctx = make_context(o, in);
  write_text(o.report, growth_csv(run_growth_sweep(lengths, *in.spec, ctx, bank)));
}

void cmd_hist(const Options& o) {
  Input in = open_input(o, false);
  const ProbeBank bank = load_bank(o, in);
  const auto ctx = make_context(o, in);
  if (o.bins == 0) throw ValidationError("--bins must be positive");
  const auto h = emit_score_histograms(in.stream(), ctx, bank, o.frame, o.bins);
  auto summary = h.summary();
  summary["type"] = "hist";
  if (!o.report.empty() && o.report != "-") {
    write_text(o.report + ".frame.csv", h.frame_level.to_csv());
    write_text(o.report + ".token.csv", h.token_level.to_csv());
  }
  write_text(o.report, summary.dump() + "\n");
  if (in.spec && !in.spec->events.empty() && !h.right_skewed()) {
    throw ValidationError("hist: token-level scores are not right-skewed");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiermem_cli: tiered streaming memory harness"};
  app.require_subcommand(1);
  Options o;

  auto add_source = [&](CLI::App* sub) {
    sub->add_option("--trace", o.trace, "binary trace file");
    sub->add_option("--synth-spec", o.synth_spec, "synthetic stream spec (JSON)");
  };
  auto add_common = [&](CLI::App* sub) {
    add_source(sub);
    sub->add_option("--config", o.config, "tier config (JSON)");
    sub->add_option("--probes", o.probes, "probe bank (JSON)");
    sub->add_option("--report", o.report, "report path (default stdout)");
    sub->add_option("--seed", o.seed, "seed for randomized variants");
    sub->add_flag("--serial", o.serial, "use the serial kernels");
  };

  auto* synth = app.add_subcommand("synth", "generate a trace from a stream spec");
  add_source(synth);
  synth->add_option("--queries", o.queries, "write one query per planted event here");
  synth->add_option("--probes", o.probes, "write the event-aligned probe bank here");
  synth->add_option("--report", o.report, "summary path");
  synth->add_option("--seed", o.seed, "query jitter seed");
  synth->add_option("--jitter", o.jitter, "relative query noise");

  auto* ingest = app.add_subcommand("ingest", "ingest a stream and report tier occupancy");
  add_common(ingest);

  auto* replay = app.add_subcommand("replay", "pseudo-streaming query replay");
  add_common(replay);
  replay->add_option("--queries", o.queries, "queries (JSON lines)");
  replay->add_option("--variant", o.variant, "gate=..,prior=..,stage=..");

  auto* oracle = app.add_subcommand("oracle", "brute-force ranking over uncompressed frames");
  add_source(oracle);
  oracle->add_option("--queries", o.queries, "queries (JSON lines)");
  oracle->add_option("--report", o.report, "report path (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "retained tokens across stream lengths (CSV)");
  add_common(sweep);
  sweep->add_option("--lengths", o.lengths, "comma-separated ascending frame counts");

  auto* hist = app.add_subcommand("hist", "frame- and token-level score histograms");
  add_common(hist);
  hist->add_option("--frame", o.frame, "frame index for the token-level histogram");
  hist->add_option("--bins", o.bins, "bin count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) cmd_synth(o);
    else if (ingest->parsed()) cmd_ingest(o);
    else if (replay->parsed()) cmd_replay(o);
    else if (oracle->parsed()) cmd_oracle(o);
    else if (sweep->parsed()) cmd_sweep(o);
    else if (hist->parsed()) cmd_hist(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
