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


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "clinidedup/clinidedup.hpp"

namespace cd = clinidedup;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("clinidedup_pipeline_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

std::string write_synthetic(const TempDir& dir, cd::SyntheticProfile profile = {}, std::uint64_t seed = 42,
                            const std::string& name = "corpus.jsonl") {
  const auto syn = cd::generate_synthetic_corpus(profile, seed);
  const auto path = dir / name;
  cd::write_corpus(syn.corpus, path);
  return path;
}

cd::PipelineConfig small_config(const std::string& corpus, const std::string& workdir) {
  cd::PipelineConfig c;
  c.corpus_path = corpus;
  c.workdir = workdir;
  return c;
}

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  TempDir tmp;
  const std::string out = tmp / "stdout.txt";
  const std::string cmd = std::string(CLINIDEDUP_CLI) + " " + args + " >" + out + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  return r;
}

}  // namespace

TEST(Pipeline, WritesEveryOutputAndVerifiableManifest) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  const auto manifest = cd::run_pipeline(small_config(corpus, dir / "out"));
  const auto files = read_dir(dir.path() / "out");
  for (const char* name : {"duplicates.tsv", "within_note.tsv", "clusters.jsonl", "labels.tsv", "reduction.json",
                           "copy_forward.json", "redundancy.json", "manifest.json"}) {
    EXPECT_TRUE(files.count(name)) << name;
  }
  for (auto c : cd::kAllConfigs) {
    EXPECT_TRUE(files.count(cd::corpus_file_name(c)));
    EXPECT_TRUE(files.count(cd::stats_file_name(c)));
  }
  for (const auto& [name, _] : files) EXPECT_EQ(name.find(".partial"), std::string::npos) << name;
  EXPECT_EQ(manifest["tool"], "clinidedup");
  EXPECT_EQ(manifest["seed"], 42);
  EXPECT_EQ(manifest["input"]["n_notes"], 200);
  EXPECT_EQ(manifest["input"]["sha256"], cd::sha256_file_hex(corpus));
  EXPECT_EQ(manifest["outputs"].size(), files.size() - 1);
  EXPECT_TRUE(cd::verify_manifest(dir.path() / "out").empty());

  // Tampering is detected.
  { std::ofstream(dir.path() / "out" / "labels.tsv", std::ios::app) << "x"; }
  EXPECT_EQ(cd::verify_manifest(dir.path() / "out"), std::vector<std::string>{"labels.tsv"});
}

TEST(Pipeline, DeterministicAcrossRunsAndThreads) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  std::map<std::string, std::string> first;
  for (unsigned threads : {1u, 4u, 8u, 1u}) {
    auto cfg = small_config(corpus, dir / ("out" + std::to_string(threads) + "_" + std::to_string(first.size())));
    cfg.threads = threads;
    cd::run_pipeline(cfg);
    const auto files = read_dir(cfg.workdir);
    if (first.empty()) {
      first = files;
    } else {
      EXPECT_EQ(files, first) << "threads " << threads;
    }
  }
}

TEST(Pipeline, SeedChangesOnlySeededOutputs) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  auto a = small_config(corpus, dir / "a");
  auto b = small_config(corpus, dir / "b");
  b.seed = 7;
  cd::run_pipeline(a);
  cd::run_pipeline(b);
  EXPECT_EQ(read_file(fs::path(a.workdir) / "clusters.jsonl"), read_file(fs::path(b.workdir) / "clusters.jsonl"));
  EXPECT_NE(read_file(fs::path(a.workdir) / "redundancy.json"), read_file(fs::path(b.workdir) / "redundancy.json"));
}

TEST(Pipeline, WnnrWithoutLabelSourceFailsBeforeWork) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  auto cfg = small_config(corpus, dir / "never");
  cfg.use_lexicon = false;
  EXPECT_THROW(cd::run_pipeline(cfg), cd::ConfigError);
  EXPECT_FALSE(fs::exists(cfg.workdir));
  cfg.configs = {cd::DedupConfig::kNone, cd::DedupConfig::kWN, cd::DedupConfig::kWNBN};
  EXPECT_NO_THROW(cd::run_pipeline(cfg));
}

TEST(Pipeline, StatsEqualManualComposition) {
  TempDir dir;
  cd::SyntheticProfile profile;
  profile.n_patients = 6;
  const auto corpus_path = write_synthetic(dir, profile, 5);
  auto cfg = small_config(corpus_path, dir / "out");
  cfg.k = 60;
  cd::run_pipeline(cfg);

  const auto corpus = cd::normalize_corpus(cd::load_corpus(corpus_path).corpus);
  auto clusters = cd::detect_duplicates(corpus, 60, 5, 5).clusters.clusters;
  cd::classify_clusters(clusters, cd::default_lexicon());
  for (auto c : cd::kAllConfigs) {
    const auto emitted = cd::emit_config(corpus, clusters, {c});
    const auto stats = cd::corpus_dup_stats(corpus, clusters, c, emitted);
    EXPECT_EQ(read_file(fs::path(cfg.workdir) / cd::stats_file_name(c)), cd::dump_json(cd::dup_stats_to_json(stats)));
    std::ostringstream os;
    cd::write_corpus(emitted, os);
    EXPECT_EQ(read_file(fs::path(cfg.workdir) / cd::corpus_file_name(c)), os.str());
  }
  std::ostringstream cl;
  cd::write_clusters(clusters, cl);
  EXPECT_EQ(read_file(fs::path(cfg.workdir) / "clusters.jsonl"), cl.str());
}

TEST(Pipeline, FailedStageLeavesPartialOutputs) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  { std::ofstream(dir / "labels.tsv") << "abc\t\tperhaps\n"; }
  auto cfg = small_config(corpus, dir / "out");
  cfg.labels_path = dir / "labels.tsv";
  try {
    cd::run_pipeline(cfg);
    FAIL() << "expected failure";
  } catch (const cd::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("stage classify"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(fs::exists(fs::path(cfg.workdir) / "duplicates.tsv.partial"));
  EXPECT_FALSE(fs::exists(fs::path(cfg.workdir) / "duplicates.tsv"));
  EXPECT_FALSE(fs::exists(fs::path(cfg.workdir) / "manifest.json"));
}

TEST(Pipeline, LenientRunRecordsRejectedLines) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  { std::ofstream(corpus, std::ios::app) << "{not json\n{\"note_id\":\"x\"}\n"; }
  auto cfg = small_config(corpus, dir / "strict");
  EXPECT_THROW(cd::run_pipeline(cfg), cd::DataError);
  cfg.workdir = dir / "lenient";
  cfg.lenient = true;
  const auto m = cd::run_pipeline(cfg);
  EXPECT_EQ(m["input"]["rejected_lines"], 2);
  EXPECT_TRUE(fs::exists(fs::path(cfg.workdir) / "rejected_lines.jsonl"));
}

TEST(Pipeline, ExternalLabelsDriveWnnr) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  // Label every between-note cluster relevant: WNNR then equals WN.
  auto probe = small_config(corpus, dir / "probe");
  cd::run_pipeline(probe);
  auto clusters = cd::load_clusters((fs::path(probe.workdir) / "clusters.jsonl").string());
  {
    std::ofstream out(dir / "labels.tsv");
    for (const auto& c : clusters) {
      if (c.between_notes()) out << c.cluster_id << "\t\trelevant\t1\n";
    }
  }
  auto cfg = small_config(corpus, dir / "out");
  cfg.use_lexicon = false;
  cfg.labels_path = dir / "labels.tsv";
  cfg.redundancy = false;
  cd::run_pipeline(cfg);
  EXPECT_EQ(read_file(fs::path(cfg.workdir) / "corpus_WNNR.jsonl"), read_file(fs::path(cfg.workdir) / "corpus_WN.jsonl"));
  EXPECT_FALSE(fs::exists(fs::path(cfg.workdir) / "redundancy.json"));
}

TEST(Pipeline, RedundancyReportShape) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  auto cfg = small_config(corpus, dir / "out");
  cd::run_pipeline(cfg);
  const auto j = cd::json::parse(read_file(fs::path(cfg.workdir) / "redundancy.json"));
  ASSERT_EQ(j["results"].size(), 16u);
  for (const auto& row : j["results"]) {
    ASSERT_FALSE(row["ppl"].is_null());
    EXPECT_GE(row["ppl"].get<double>(), 1.0);
    if (row["train"] != "NONE") continue;
    EXPECT_EQ(row["relative_ppl"].get<double>(), 0.0);
  }
}

TEST(Config, JsonOverlay) {
  const auto j = cd::json::parse(R"({"k": 50, "configs": ["none", "wnbn"], "bn_rule": "keep-first",
                                     "ppl_mode": "full-sequence", "seed": 3, "corpus": "c.jsonl"})");
  const auto c = cd::config_from_json(j);
  EXPECT_EQ(c.k, 50u);
  EXPECT_EQ(c.configs, (std::vector<cd::DedupConfig>{cd::DedupConfig::kNone, cd::DedupConfig::kWNBN}));
  EXPECT_EQ(c.bn_rule, cd::BnRule::kKeepFirstGlobal);
  EXPECT_EQ(c.ppl_mode, cd::PplMode::kFullSequence);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.corpus_path, "c.jsonl");
  EXPECT_EQ(c.ngram_order, 3);  // untouched default
}

TEST(Config, Errors) {
  EXPECT_THROW(cd::config_from_json(cd::json::parse(R"({"unknown": 1})")), cd::ConfigError);
  EXPECT_THROW(cd::config_from_json(cd::json::parse(R"({"k": "big"})")), cd::ConfigError);
  EXPECT_THROW(cd::config_from_json(cd::json::parse(R"({"configs": ["all"]})")), cd::ConfigError);
  EXPECT_THROW(cd::config_from_json(cd::json::parse(R"({"bn_rule": "some"})")), cd::ConfigError);
  EXPECT_THROW(cd::config_from_json(cd::json::parse("[1]")), cd::ConfigError);
  EXPECT_THROW(cd::load_pipeline_config("/nonexistent/config.json"), cd::ConfigError);
  cd::PipelineConfig c;
  EXPECT_THROW(cd::validate(c), cd::ConfigError);
  c.corpus_path = "x";
  c.workdir = "y";
  EXPECT_NO_THROW(cd::validate(c));
  c.k = 0;
  EXPECT_THROW(cd::validate(c), cd::ConfigError);
}

TEST(Config, EffectiveConfigIgnoresThreadsAndWorkdir) {
  cd::PipelineConfig a, b;
  a.workdir = "one";
  b.workdir = "two";
  b.threads = 8;
  EXPECT_EQ(cd::effective_config(a), cd::effective_config(b));
  b.k = 99;
  EXPECT_NE(cd::effective_config(a), cd::effective_config(b));
}

TEST(Synthetic, FullBoilerplateMeansEveryNoteHasDuplicates) {
  cd::SyntheticProfile p;
  p.n_patients = 5;
  p.notes_per_patient = 4;
  p.boilerplate_rate = 1.0;
  p.copy_forward_rate = 0.0;
  p.wn_rate = 0.0;
  const auto syn = cd::generate_synthetic_corpus(p, 3);
  auto clusters = cd::detect_duplicates(syn.corpus, 100, 5, 5).clusters.clusters;
  const auto emitted = cd::emit_config(syn.corpus, clusters, {cd::DedupConfig::kWNBN});
  EXPECT_DOUBLE_EQ(cd::corpus_dup_stats(syn.corpus, clusters, cd::DedupConfig::kWNBN, emitted).pct_notes_with_dup, 100.0);
}

TEST(Synthetic, SeededAndValid) {
  const auto a = cd::generate_synthetic_corpus({}, 1);
  const auto b = cd::generate_synthetic_corpus({}, 1);
  const auto c = cd::generate_synthetic_corpus({}, 2);
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_NE(a.corpus, c.corpus);
  std::ostringstream os;
  cd::write_corpus(a.corpus, os);
  std::istringstream is(os.str());
  EXPECT_EQ(cd::parse_corpus(is).corpus, a.corpus);
  // Generator output is already normalized.
  EXPECT_EQ(cd::normalize_corpus(a.corpus), a.corpus);
  cd::SyntheticProfile bad;
  bad.n_patients = 0;
  EXPECT_THROW(cd::generate_synthetic_corpus(bad, 1), cd::ConfigError);
}

TEST(Cli, VersionAndPatterns) {
  const auto v = cli("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(std::string(cd::kToolVersion)), std::string::npos);
  const auto p = cli("--dump-patterns");
  EXPECT_EQ(p.code, 0);
  EXPECT_NE(p.out.find("[DATE]"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  { std::ofstream(dir / "bad.json") << R"({"bogus": true})"; }
  EXPECT_EQ(cli("run --config-file " + (dir / "bad.json") + " -i " + corpus + " -w " + (dir / "o1")).code, 2);
  EXPECT_EQ(cli("run --no-such-flag").code, 2);
  EXPECT_EQ(cli("run -i " + corpus + " -w " + (dir / "o2") + " --no-lexicon").code, 2);
  const auto missing = cli("run -i " + (dir / "missing.jsonl") + " -w " + (dir / "o3"));
  EXPECT_EQ(missing.code, 3);
  EXPECT_NE(missing.out.find("stage ingest"), std::string::npos);
  EXPECT_EQ(cli("ingest -i " + (dir / "missing.jsonl") + " -o " + (dir / "x.jsonl")).code, 3);
}

TEST(Cli, RunMatchesLibrary) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  const auto r = cli("run -i " + corpus + " -w " + (dir / "cli") + " --threads 4 --seed 42");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("bytes of normalized text"), std::string::npos);
  cd::run_pipeline(small_config(corpus, dir / "lib"));
  EXPECT_EQ(read_dir(dir.path() / "cli"), read_dir(dir.path() / "lib"));
}

TEST(Cli, ConfigFileAndOverrides) {
  TempDir dir;
  const auto corpus = write_synthetic(dir);
  {
    std::ofstream(dir / "cfg.json") << R"({"corpus": ")" << corpus << R"(", "configs": ["none", "wn"], "redundancy": false})";
  }
  const auto r = cli("run --config-file " + (dir / "cfg.json") + " -w " + (dir / "out") + " --min-match-len 80");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto m = cd::json::parse(read_file(dir.path() / "out" / "manifest.json"));
  EXPECT_EQ(m["config"]["k"], 80);
  EXPECT_EQ(m["config"]["configs"].size(), 2u);
  EXPECT_FALSE(fs::exists(dir.path() / "out" / "redundancy.json"));
}

TEST(Cli, StagewiseCommandsCompose) {
  TempDir dir;
  const auto synth = cli("synth --patients 4 --notes-per-patient 5 --seed 9 -o " + (dir / "s.jsonl") + " --sidecar " +
                         (dir / "planted.jsonl"));
  ASSERT_EQ(synth.code, 0) << synth.out;
  cd::SyntheticProfile p;
  p.n_patients = 4;
  p.notes_per_patient = 5;
  std::ostringstream expect;
  cd::write_corpus(cd::generate_synthetic_corpus(p, 9).corpus, expect);
  EXPECT_EQ(read_file(dir / "s.jsonl"), expect.str());

  ASSERT_EQ(cli("ingest -i " + (dir / "s.jsonl") + " -o " + (dir / "norm.jsonl")).code, 0);
  ASSERT_EQ(cli("dedup -i " + (dir / "norm.jsonl") + " -o " + (dir / "d")).code, 0);
  ASSERT_EQ(cli("classify -c " + (dir / "d") + "/clusters.jsonl -o " + (dir / "labeled.jsonl")).code, 0);
  const auto e = cli("emit -i " + (dir / "norm.jsonl") + " -c " + (dir / "labeled.jsonl") + " --config wnnr -o " +
                     (dir / "wnnr.jsonl") + " --reduction " + (dir / "red.json"));
  ASSERT_EQ(e.code, 0) << e.out;
  const auto s = cli("stats -i " + (dir / "norm.jsonl") + " -c " + (dir / "labeled.jsonl") + " --config wnnr -o " +
                     (dir / "stats.json"));
  ASSERT_EQ(s.code, 0) << s.out;

  // Same as the library composition.
  const auto corpus = cd::load_corpus(dir / "norm.jsonl").corpus;
  auto clusters = cd::detect_duplicates(corpus, 100, 5, 5).clusters.clusters;
  cd::classify_clusters(clusters, cd::default_lexicon());
  const auto wnnr = cd::emit_config(corpus, clusters, {cd::DedupConfig::kWNNR});
  std::ostringstream os;
  cd::write_corpus(wnnr, os);
  EXPECT_EQ(read_file(dir / "wnnr.jsonl"), os.str());
  auto stats_json = cd::json::parse(read_file(dir / "stats.json"));
  EXPECT_TRUE(stats_json.contains("copy_forward"));
  stats_json.erase("copy_forward");
  EXPECT_EQ(stats_json,
            cd::json::parse(cd::dump_json(cd::dup_stats_to_json(
                cd::corpus_dup_stats(corpus, clusters, cd::DedupConfig::kWNNR, wnnr)))));

  const auto ppl = cli("ppl --train " + (dir / "wnnr.jsonl") + " --eval " + (dir / "norm.jsonl") + " --order 2");
  ASSERT_EQ(ppl.code, 0) << ppl.out;
  EXPECT_NE(ppl.out.find("information_content"), std::string::npos);
  EXPECT_EQ(cli("ppl --eval " + (dir / "norm.jsonl")).code, 2);
}
