// Copyright 2026 The clinidedup Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: one subcommand per pipeline stage plus `run`.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clinidedup/clinidedup.hpp"

namespace cd = clinidedup;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw cd::DataError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cd::DataError("cannot read " + path);
  return in;
}

// Writes to `path`, or stdout when it is empty or "-".
void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  auto out = open_out(path);
  out << text;
}

cd::Corpus load_normalized(const std::string& path, unsigned threads) {
  auto loaded = cd::load_corpus(path);
  return cd::normalize_corpus(loaded.corpus, threads);
}

cd::DedupConfig config_arg(const std::string& s) {
  auto c = cd::parse_config(s);
  if (!c) throw cd::ConfigError("unknown configuration: " + s + " (none, wn, wnnr, wnbn)");
  return *c;
}

cd::BnRule bn_rule_arg(const std::string& s) {
  auto r = cd::parse_bn_rule(s);
  if (!r) throw cd::ConfigError("unknown bn rule: " + s + " (drop-all, keep-first)");
  return *r;
}

cd::PplMode mode_arg(const std::string& s) {
  auto m = cd::parse_ppl_mode(s);
  if (!m) throw cd::ConfigError("unknown ppl mode: " + s + " (last-token, full-sequence)");
  return *m;
}

cd::Relevance sample_target(const std::string& s) {
  try {
    return cd::parse_label(s, 0);
  } catch (const cd::DataError&) {
    throw cd::ConfigError("unknown --sample-label: " + s + " (relevant, not_relevant)");
  }
}

void log_k(std::size_t k) { std::cerr << "min match length k=" << k << " (bytes of normalized text)\n"; }

// Copies `value` into `target` only when the option was given.
template <class T>
void override_if(const CLI::Option* opt, T& target, const T& value) {
  if (opt->count() > 0) target = value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect, characterize and remove duplicated text in clinical note corpora."};
  app.require_subcommand(0, 1);
  app.fallthrough();
  unsigned threads = 1;
  std::string abbrev_path;
  bool version = false;
  bool dump_patterns = false;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--abbreviations", abbrev_path, "Abbreviation list (one per line, # comments)");
  app.add_flag("--version", version, "Print tool and format versions");
  app.add_flag("--dump-patterns", dump_patterns, "Print the date/time normalization patterns");

  std::string in_path, out_path, clusters_path, labels_path, lexicon_path;
  std::string config_name = "wnbn", bn_rule = "drop-all";
  std::uint64_t seed = 42;

  auto* ingest = app.add_subcommand("ingest", "Validate, canonicalize and normalize a corpus");
  std::string rejects_path;
  bool lenient = false;
  ingest->add_option("-i,--input", in_path, "Corpus JSONL")->required();
  ingest->add_option("-o,--output", out_path, "Normalized corpus JSONL")->required();
  ingest->add_flag("--lenient", lenient, "Skip malformed lines instead of failing");
  ingest->add_option("--rejects", rejects_path, "Write skipped lines as JSONL");

  auto* dedup = app.add_subcommand("dedup", "Find within-note and between-note duplicates");
  std::string out_dir;
  std::size_t k = 100, min_chars = 5, wn_min_chars = 5;
  dedup->add_option("-i,--input", in_path, "Corpus JSONL")->required();
  dedup->add_option("-o,--out-dir", out_dir, "Output directory")->required();
  dedup->add_option("--min-match-len", k, "Minimum shared substring length k (bytes)")->check(CLI::PositiveNumber);
  dedup->add_option("--min-sentence-chars", min_chars, "Keep between-note sentences longer than this");
  dedup->add_option("--wn-min-chars", wn_min_chars, "Ignore within-note sentences this short or shorter");

  auto* classify = app.add_subcommand("classify", "Label between-note clusters by clinical relevance");
  std::string labels_out, batch_out, gold_path, metrics_out, sample_label = "not_relevant";
  bool no_lexicon = false, dump_lexicon = false;
  long long sample_n = 0;
  classify->add_option("-c,--clusters", clusters_path, "Clusters JSONL");
  classify->add_option("-o,--output", out_path, "Labeled clusters JSONL");
  classify->add_option("--lexicon", lexicon_path, "Topic lexicon JSON (default: built-in)");
  classify->add_flag("--no-lexicon", no_lexicon, "Do not run the rule classifier");
  classify->add_flag("--dump-lexicon", dump_lexicon, "Print the active lexicon and exit");
  classify->add_option("--labels", labels_path, "External labels TSV, applied after the rule classifier");
  classify->add_option("--labels-out", labels_out, "Write labels TSV");
  classify->add_option("--sample", sample_n, "Draw an annotation batch of this many clusters");
  classify->add_option("--sample-label", sample_label, "Predicted label to sample from");
  classify->add_option("--batch-out", batch_out, "Annotation batch TSV (default stdout)");
  classify->add_option("--seed", seed, "Sampling seed");
  classify->add_option("--gold", gold_path, "Annotated batch TSV to evaluate predictions against");
  classify->add_option("--metrics-out", metrics_out, "Evaluation metrics JSON (default stdout)");

  auto* emit = app.add_subcommand("emit", "Write one deduplication configuration");
  std::string reduction_out;
  emit->add_option("-i,--input", in_path, "Corpus JSONL")->required();
  emit->add_option("-c,--clusters", clusters_path, "Clusters JSONL")->required();
  emit->add_option("--labels", labels_path, "Labels TSV");
  emit->add_option("--config", config_name, "none, wn, wnnr or wnbn");
  emit->add_option("--bn-rule", bn_rule, "drop-all or keep-first");
  emit->add_option("-o,--output", out_path, "Output corpus JSONL")->required();
  emit->add_option("--reduction", reduction_out, "Reduction report JSON (default stdout)");

  auto* stats = app.add_subcommand("stats", "Duplication statistics for a configuration");
  std::string emitted_path, group_by = "note_type", filter = "all";
  stats->add_option("-i,--input", in_path, "Analysed corpus JSONL")->required();
  stats->add_option("-c,--clusters", clusters_path, "Clusters JSONL")->required();
  stats->add_option("--emitted", emitted_path, "Corpus emitted for --config (default: emit in memory)");
  stats->add_option("--config", config_name, "none, wn, wnnr or wnbn");
  stats->add_option("--bn-rule", bn_rule, "drop-all or keep-first");
  stats->add_option("--group-by", group_by, "Copy-forward grouping: note_type or patient");
  stats->add_option("--filter", filter, "Copy-forward clusters: all, wn, bn, relevant, not_relevant");
  stats->add_option("-o,--output", out_path, "Stats JSON (default stdout)");

  auto* ppl = app.add_subcommand("ppl", "Perplexity and information content");
  std::string train_path, eval_path, model_path, save_model, scores_path, instances_out, mode = "last-token";
  int order = 3;
  double k_smooth = 0.1, baseline = 0.0;
  std::size_t max_len = 128;
  ppl->add_option("--train", train_path, "Training corpus JSONL");
  ppl->add_option("--model", model_path, "Saved n-gram model JSON");
  ppl->add_option("--save-model", save_model, "Write the trained model");
  ppl->add_option("--eval", eval_path, "Evaluation corpus JSONL");
  ppl->add_option("--scores", scores_path, "JSONL of {instance_id, log_prob} scored by an external model");
  ppl->add_option("--dump-instances", instances_out, "Write evaluation instances as JSONL");
  ppl->add_option("--mode", mode, "last-token or full-sequence");
  ppl->add_option("--order", order, "n-gram order");
  ppl->add_option("--k", k_smooth, "Add-k smoothing constant");
  ppl->add_option("--max-len", max_len, "Instance length in tokens");
  auto* baseline_opt = ppl->add_option("--relative-to", baseline, "Also report relative PPL against this baseline PPL");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted duplicates");
  cd::SyntheticProfile profile;
  std::string sidecar_path;
  synth->add_option("--patients", profile.n_patients, "Number of patients")->check(CLI::PositiveNumber);
  synth->add_option("--notes-per-patient", profile.notes_per_patient, "Notes per patient")->check(CLI::PositiveNumber);
  synth->add_option("--min-filler", profile.min_filler, "Minimum unique sentences per note");
  synth->add_option("--max-filler", profile.max_filler, "Maximum unique sentences per note");
  synth->add_option("--wn-rate", profile.wn_rate, "Probability a note repeats a sentence");
  synth->add_option("--copy-forward-rate", profile.copy_forward_rate, "Probability a note copies from the previous one");
  synth->add_option("--boilerplate-rate", profile.boilerplate_rate, "Probability a note carries boilerplate");
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("-o,--output", out_path, "Corpus JSONL")->required();
  synth->add_option("--sidecar", sidecar_path, "Planted duplicates JSONL");

  auto* run = app.add_subcommand("run", "Full pipeline");
  std::string config_file;
  cd::PipelineConfig flags;  // values of flags given on the command line
  std::vector<std::string> config_names;
  std::string run_mode;
  run->add_option("--config-file", config_file, "JSON file mirroring the pipeline settings");
  auto* r_input = run->add_option("-i,--input", flags.corpus_path, "Corpus JSONL");
  auto* r_workdir = run->add_option("-w,--workdir", flags.workdir, "Output directory");
  auto* r_lexicon = run->add_option("--lexicon", flags.lexicon_path, "Topic lexicon JSON");
  auto* r_labels = run->add_option("--labels", flags.labels_path, "External labels TSV");
  auto* r_no_lex = run->add_flag("--no-lexicon", "Do not run the rule classifier");
  auto* r_lenient = run->add_flag("--lenient", "Skip malformed corpus lines");
  auto* r_k = run->add_option("--min-match-len", flags.k, "Minimum shared substring length k (bytes)");
  auto* r_min = run->add_option("--min-sentence-chars", flags.min_sentence_chars, "Between-note sentence filter");
  auto* r_wn = run->add_option("--wn-min-chars", flags.wn_min_sentence_chars, "Within-note sentence filter");
  auto* r_cfgs = run->add_option("--configs", config_names, "Configurations to emit, comma separated")->delimiter(',');
  auto* r_bn = run->add_option("--bn-rule", bn_rule, "drop-all or keep-first");
  auto* r_no_red = run->add_flag("--no-redundancy", "Skip the perplexity stage");
  auto* r_order = run->add_option("--order", flags.ngram_order, "n-gram order");
  auto* r_ks = run->add_option("--k", flags.k_smooth, "Add-k smoothing constant");
  auto* r_len = run->add_option("--max-len", flags.max_len, "Instance length in tokens");
  auto* r_mode = run->add_option("--mode", run_mode, "last-token or full-sequence");
  auto* r_seed = run->add_option("--seed", flags.seed, "Seed for every random choice");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(cd::ExitCode::kConfig);
  }

  try {
    if (version) {
      std::cout << "clinidedup " << cd::kToolVersion << " (output format " << cd::kFormatVersion
                << ", model format 1)\n";
      return 0;
    }
    if (dump_patterns) {
      std::cout << cd::dump_patterns();
      return 0;
    }
    const cd::Abbreviations abbrevs =
        abbrev_path.empty() ? cd::Abbreviations::defaults() : cd::Abbreviations::load(abbrev_path);

    if (ingest->parsed()) {
      cd::LoadOptions lo;
      lo.lenient = lenient;
      const auto loaded = cd::load_corpus(in_path, lo);
      if (!loaded.errors.empty()) {
        std::cerr << cd::format_line_errors(loaded.errors);
        if (!rejects_path.empty()) {
          auto out = open_out(rejects_path);
          cd::write_line_errors(loaded.errors, out);
        }
      }
      cd::write_corpus(cd::normalize_corpus(loaded.corpus, threads), out_path);
      std::cerr << loaded.corpus.notes.size() << " notes, " << loaded.errors.size() << " rejected lines\n";
    } else if (dedup->parsed()) {
      log_k(k);
      const cd::Corpus corpus = load_normalized(in_path, threads);
      const auto det = cd::detect_duplicates(corpus, k, min_chars, wn_min_chars, threads, abbrevs);
      const std::filesystem::path dir(out_dir);
      std::filesystem::create_directories(dir);
      {
        auto out = open_out((dir / "duplicates.tsv").string());
        cd::write_duplicates_tsv(det.between_note, out);
      }
      {
        auto out = open_out((dir / "within_note.tsv").string());
        cd::write_duplicates_tsv(cd::sentences_of(det.within_note), out);
      }
      {
        auto out = open_out((dir / "clusters.jsonl").string());
        cd::write_clusters(det.clusters.clusters, out);
      }
      std::cerr << det.within_note.size() << " within-note occurrences, " << det.between_note.size()
                << " between-note sentences, " << det.clusters.clusters.size() << " clusters, "
                << det.clusters.orphans.size() << " orphan sentences\n";
    } else if (classify->parsed()) {
      const cd::TopicLexicon lex = lexicon_path.empty() ? cd::default_lexicon() : cd::load_lexicon(lexicon_path);
      if (dump_lexicon) {
        std::cout << cd::lexicon_to_json(lex) << "\n";
        return 0;
      }
      if (clusters_path.empty()) throw cd::ConfigError("classify needs --clusters");
      auto clusters = cd::load_clusters(clusters_path);
      if (!no_lexicon) cd::classify_clusters(clusters, lex, threads);
      if (!labels_path.empty()) {
        const auto report = cd::apply_external_labels(clusters, labels_path);
        std::cerr << report.updated << " labels applied, " << report.unmatched.size() << " unmatched\n";
      }
      if (!out_path.empty()) {
        auto out = open_out(out_path);
        cd::write_clusters(clusters, out);
      }
      if (!labels_out.empty()) {
        auto out = open_out(labels_out);
        cd::write_labels_tsv(clusters, out);
      }
      if (sample_n != 0) {
        const auto batch = cd::bootstrap_sample(clusters, sample_n, sample_target(sample_label), seed);
        std::ostringstream os;
        cd::write_annotation_batch(batch, os);
        write_text(batch_out, os.str());
      }
      if (!gold_path.empty()) {
        auto in = open_in(gold_path);
        const auto gold = cd::labels_by_cluster(cd::read_annotation_gold(in));
        std::map<std::string, cd::Relevance> predicted;
        for (const auto& c : clusters) {
          if (gold.count(c.cluster_id)) predicted[c.cluster_id] = c.relevance.label;
        }
        write_text(metrics_out, cd::dump_json(cd::metrics_to_json(cd::evaluate_classifier(predicted, gold))));
      }
    } else if (emit->parsed()) {
      const cd::Corpus corpus = load_normalized(in_path, threads);
      auto clusters = cd::load_clusters(clusters_path);
      if (!labels_path.empty()) cd::apply_external_labels(clusters, labels_path);
      const cd::DedupPolicy policy{config_arg(config_name), bn_rule_arg(bn_rule)};
      const cd::Corpus out = cd::emit_config(corpus, clusters, policy, threads, abbrevs);
      cd::write_corpus(out, out_path);
      write_text(reduction_out, cd::dump_json(cd::reduction_to_json(cd::reduction_report(corpus, out, threads, abbrevs))));
    } else if (stats->parsed()) {
      const cd::Corpus corpus = load_normalized(in_path, threads);
      const auto clusters = cd::load_clusters(clusters_path);
      const auto cfg = config_arg(config_name);
      const cd::Corpus emitted =
          emitted_path.empty()
              ? cd::emit_config(corpus, clusters, cd::DedupPolicy{cfg, bn_rule_arg(bn_rule)}, threads, abbrevs)
              : load_normalized(emitted_path, threads);
      cd::GroupBy gb = cd::GroupBy::kNoteType;
      if (group_by == "patient") {
        gb = cd::GroupBy::kPatient;
      } else if (group_by != "note_type") {
        throw cd::ConfigError("unknown --group-by: " + group_by);
      }
      static const std::map<std::string, cd::ClusterFilter> kFilters = {
          {"all", cd::ClusterFilter::kAll},
          {"wn", cd::ClusterFilter::kWithinNote},
          {"bn", cd::ClusterFilter::kBetweenNote},
          {"relevant", cd::ClusterFilter::kRelevant},
          {"not_relevant", cd::ClusterFilter::kNotRelevant}};
      const auto f = kFilters.find(filter);
      if (f == kFilters.end()) throw cd::ConfigError("unknown --filter: " + filter);
      cd::ordered_json o = cd::dup_stats_to_json(cd::corpus_dup_stats(corpus, clusters, cfg, emitted, threads, abbrevs));
      o["copy_forward"] = cd::group_stats_to_json(cd::copy_forward_stats(clusters, corpus, gb, f->second));
      write_text(out_path, cd::dump_json(o));
    } else if (ppl->parsed()) {
      cd::PplResult result;
      if (!scores_path.empty()) {
        auto in = open_in(scores_path);
        result = cd::perplexity_from_log_probs(in);
      } else {
        if (eval_path.empty()) throw cd::ConfigError("ppl needs --eval (or --scores)");
        if (train_path.empty() == model_path.empty()) throw cd::ConfigError("ppl needs exactly one of --train, --model");
        const cd::NgramModel model =
            model_path.empty() ? cd::train_ngram(load_normalized(train_path, threads), order, k_smooth, threads, abbrevs)
                               : cd::NgramModel::load(model_path);
        if (!save_model.empty()) model.save(save_model);
        const auto instances = cd::build_instances(load_normalized(eval_path, threads), max_len, threads, abbrevs);
        if (!instances_out.empty()) {
          auto out = open_out(instances_out);
          for (const auto& inst : instances) {
            cd::ordered_json j;
            j["instance_id"] = inst.instance_id;
            j["tokens"] = inst.tokens;
            j["at_note_start"] = inst.at_note_start;
            out << j.dump() << '\n';
          }
        }
        result = cd::perplexity(model, instances, mode_arg(mode), threads);
      }
      cd::ordered_json o = cd::ppl_to_json(result);
      if (baseline_opt->count() > 0) o["relative_ppl"] = cd::relative_ppl(result.ppl, baseline);
      std::cout << cd::dump_json(o);
    } else if (synth->parsed()) {
      const auto s = cd::generate_synthetic_corpus(profile, seed);
      cd::write_corpus(s.corpus, out_path);
      if (!sidecar_path.empty()) {
        auto out = open_out(sidecar_path);
        cd::write_planted(s.planted, out);
      }
      std::cerr << s.corpus.notes.size() << " notes, " << s.planted.size() << " planted duplicate sentences\n";
    } else if (run->parsed()) {
      cd::PipelineConfig pc;
      if (!config_file.empty()) pc = cd::load_pipeline_config(config_file);
      override_if(r_input, pc.corpus_path, flags.corpus_path);
      override_if(r_workdir, pc.workdir, flags.workdir);
      override_if(r_lexicon, pc.lexicon_path, flags.lexicon_path);
      override_if(r_labels, pc.labels_path, flags.labels_path);
      override_if(app.get_option("--abbreviations"), pc.abbreviations_path, abbrev_path);
      override_if(r_no_lex, pc.use_lexicon, false);
      override_if(r_lenient, pc.lenient, true);
      override_if(r_no_red, pc.redundancy, false);
      override_if(r_k, pc.k, flags.k);
      override_if(r_min, pc.min_sentence_chars, flags.min_sentence_chars);
      override_if(r_wn, pc.wn_min_sentence_chars, flags.wn_min_sentence_chars);
      override_if(r_order, pc.ngram_order, flags.ngram_order);
      override_if(r_ks, pc.k_smooth, flags.k_smooth);
      override_if(r_len, pc.max_len, flags.max_len);
      override_if(r_seed, pc.seed, flags.seed);
      if (r_cfgs->count() > 0) {
        pc.configs.clear();
        for (const auto& n : config_names) pc.configs.push_back(config_arg(n));
      }
      if (r_bn->count() > 0) pc.bn_rule = bn_rule_arg(bn_rule);
      if (r_mode->count() > 0) pc.ppl_mode = mode_arg(run_mode);
      if (app.get_option("--threads")->count() > 0) pc.threads = threads;
      log_k(pc.k);
      const auto manifest = cd::run_pipeline(pc);
      std::cerr << "wrote " << manifest.at("outputs").size() << " outputs to " << pc.workdir << "\n";
    } else {
      std::cout << app.help();
    }
    return 0;
  } catch (const cd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(cd::ExitCode::kInternal);
  }
}
