#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dsc/config.hpp"
#include "dsc/dataset.hpp"
#include "support/toy_data.hpp"

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

CommandResult run_cli(const std::string& args, const fs::path& scratch,
                      const std::string& env = "") {
  const fs::path out = scratch / "stdout.txt";
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") +
                          std::string(DSC_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

// 40 tiny images, desk-like network at 32x32, 2-epoch hybrid schedule.
std::string quick_config_json(const std::string& out_dir) {
  return R"({
  "dataset": {"root": "data"},
  "network": {"spec": {
    "name": "desk32",
    "input_h": 32, "input_w": 32, "input_c": 3,
    "stem_filters": 8, "stem_stride": 2,
    "stages": [
      {"expansion_factor": 1, "out_channels": 8, "repeat": 1, "stride": 1},
      {"expansion_factor": 6, "out_channels": 16, "repeat": 1, "stride": 2}
    ],
    "head_channels": 32, "num_classes": 5
  }},
  "split": {"train_fraction": 0.8},
  "train": {
    "batch_size": 16,
    "schedule": [
      {"optimizer": "sgd", "epochs": 1, "learning_rate": 0.01, "momentum": 0.9},
      {"optimizer": "adam", "epochs": 1}
    ]
  },
  "seed": 77,
  "output_dir": ")" + out_dir + R"("
})";
}

struct CliFixture {
  fs::path dir;
  CliFixture() {
    dir = dsc_test::make_temp_dir("cli");
    dsc_test::write_toy_dataset(dir / "data", 40, 12, 99);
    write_file(dir / "run.json", quick_config_json("out"));
  }
  ~CliFixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("cli train/evaluate/predict/inspect round trip") {
  CliFixture fx;

  // --- train ---
  CommandResult train =
      run_cli("train --config " + (fx.dir / "run.json").string(), fx.dir);
  INFO(train.out, train.err);
  REQUIRE(train.exit_code == 0);
  const fs::path out_dir = fx.dir / "out";
  CHECK(fs::exists(out_dir / "model.dsqc"));
  CHECK(fs::exists(out_dir / "history.csv"));
  CHECK(fs::exists(out_dir / "report.txt"));
  CHECK(fs::exists(out_dir / "confusion.csv"));
  CHECK(fs::exists(out_dir / "roc.csv"));

  // history shows the optimizer switching after the first segment
  const std::string history = slurp(out_dir / "history.csv");
  CHECK(history.find("1,sgd,") != std::string::npos);
  CHECK(history.find("2,adam,") != std::string::npos);

  // --- determinism: identical run into another directory ---
  write_file(fx.dir / "run2.json", quick_config_json("out2"));
  CommandResult train2 =
      run_cli("train --config " + (fx.dir / "run2.json").string(), fx.dir);
  REQUIRE(train2.exit_code == 0);
  CHECK(slurp(fx.dir / "out2" / "history.csv") == history);
  CHECK(slurp(fx.dir / "out2" / "model.dsqc") ==
        slurp(out_dir / "model.dsqc"));

  // --- evaluate the checkpoint on the validation slice via a manifest ---
  {
    dsc::RunConfig cfg = dsc::load_run_config(fx.dir / "run.json");
    dsc::ScanResult scan = dsc::scan_dataset(cfg.dataset_root);
    dsc::DatasetSplit split = dsc::split_dataset(scan.samples, cfg.split);
    std::ofstream manifest(fx.dir / "val.tsv");
    for (const auto& s : split.validation) {
      manifest << s.image_path.string() << '\t' << s.class_name << '\n';
    }
  }
  CommandResult eval = run_cli(
      "evaluate --checkpoint " + (out_dir / "model.dsqc").string() +
          " --manifest " + (fx.dir / "val.tsv").string() + " --out " +
          (fx.dir / "eval_out").string(),
      fx.dir);
  INFO(eval.out, eval.err);
  REQUIRE(eval.exit_code == 0);

  // report accuracy equals the final val accuracy from fit (same code path)
  const std::string report = slurp(fx.dir / "eval_out" / "report.txt");
  std::string fit_val_acc;
  {
    // last history row: epoch,optimizer,train_acc,train_loss,val_acc,val_loss
    std::istringstream hs(history);
    std::string line, last;
    std::getline(hs, line);  // header
    while (std::getline(hs, line)) {
      if (!line.empty()) last = line;
    }
    std::istringstream ls(last);
    std::string cell;
    for (int i = 0; i < 5; ++i) std::getline(ls, cell, ',');
    fit_val_acc = cell;
  }
  CHECK(report.find("accuracy: " + fit_val_acc) != std::string::npos);

  // --- predict on one good image and one bad path ---
  const fs::path good = fx.dir / "data" / "blight" / "img_0000.ppm";
  CommandResult pred = run_cli(
      "predict --checkpoint " + (out_dir / "model.dsqc").string() + " " +
          good.string() + " --dump-features " + (fx.dir / "feats").string(),
      fx.dir);
  INFO(pred.out, pred.err);
  REQUIRE(pred.exit_code == 0);
  CHECK(pred.out.find(good.string()) == 0);
  CHECK(fs::exists(fx.dir / "feats" / "img_0000.dsqt"));

  CommandResult mixed = run_cli(
      "predict --checkpoint " + (out_dir / "model.dsqc").string() + " " +
          good.string() + " " + (fx.dir / "nope.ppm").string(),
      fx.dir);
  CHECK(mixed.exit_code == 1);
  CHECK(mixed.out.find("error") != std::string::npos);
  CHECK(mixed.out.find("mean per-image time") != std::string::npos);

  // --- evaluate is idempotent: identical report bytes on a second run ---
  CommandResult eval2 = run_cli(
      "evaluate --checkpoint " + (out_dir / "model.dsqc").string() +
          " --manifest " + (fx.dir / "val.tsv").string() + " --out " +
          (fx.dir / "eval_out2").string(),
      fx.dir);
  REQUIRE(eval2.exit_code == 0);
  CHECK(slurp(fx.dir / "eval_out2" / "report.txt") == report);
  CHECK(slurp(fx.dir / "eval_out2" / "confusion.csv") ==
        slurp(fx.dir / "eval_out" / "confusion.csv"));

  // --- inspect the checkpoint and the fidelity preset ---
  CommandResult inspect = run_cli(
      "inspect --checkpoint " + (out_dir / "model.dsqc").string(), fx.dir);
  REQUIRE(inspect.exit_code == 0);
  CHECK(inspect.out.find("(None, 5)") != std::string::npos);
  CHECK(inspect.out.find("Total params:") != std::string::npos);

  CommandResult fidelity = run_cli("inspect --preset fidelity-b3", fx.dir);
  REQUIRE(fidelity.exit_code == 0);
  CHECK(fidelity.out.find("Trainable params: 7685") != std::string::npos);
  CHECK(fidelity.out.find("(None, 150, 150, 40)") != std::string::npos);
}

TEST_CASE("cli seed override and the default output directory variable") {
  CliFixture fx;

  // --seed changes every stream: the history must differ from the seed-77 run
  CommandResult base =
      run_cli("train --config " + (fx.dir / "run.json").string() + " --out " +
                  (fx.dir / "base").string(),
              fx.dir);
  REQUIRE(base.exit_code == 0);
  CommandResult reseeded =
      run_cli("train --config " + (fx.dir / "run.json").string() +
                  " --seed 123 --out " + (fx.dir / "reseeded").string(),
              fx.dir);
  REQUIRE(reseeded.exit_code == 0);
  CHECK(slurp(fx.dir / "base" / "history.csv") !=
        slurp(fx.dir / "reseeded" / "history.csv"));

  // DSC_OUT_DIR supplies the output directory when --out is absent
  {
    dsc::RunConfig cfg = dsc::load_run_config(fx.dir / "run.json");
    dsc::ScanResult scan = dsc::scan_dataset(cfg.dataset_root);
    dsc::DatasetSplit split = dsc::split_dataset(scan.samples, cfg.split);
    std::ofstream manifest(fx.dir / "val.tsv");
    for (const auto& s : split.validation) {
      manifest << s.image_path.string() << '\t' << s.class_name << '\n';
    }
  }
  const fs::path env_out = fx.dir / "env_out";
  CommandResult eval = run_cli(
      "evaluate --checkpoint " + (fx.dir / "base" / "model.dsqc").string() +
          " --manifest " + (fx.dir / "val.tsv").string(),
      fx.dir, "DSC_OUT_DIR=" + env_out.string());
  REQUIRE(eval.exit_code == 0);
  CHECK(fs::exists(env_out / "report.txt"));
}

TEST_CASE("cli error paths map onto the documented exit codes") {
  CliFixture fx;

  // malformed config: exit 2 with a line-numbered diagnostic
  write_file(fx.dir / "broken.json", "{\n  \"dataset\": {\n");
  CommandResult broken =
      run_cli("train --config " + (fx.dir / "broken.json").string(), fx.dir);
  CHECK(broken.exit_code == 2);
  CHECK(broken.err.find("line") != std::string::npos);

  // unknown key: exit 2 naming the key
  write_file(fx.dir / "unknown.json",
             R"({"dataset": {"root": "data"}, "network": {"preset": "desk"},
                 "train": {"schedule": [{"optimizer": "adam", "epochs": 1}]},
                 "surprise": 1})");
  CommandResult unknown =
      run_cli("train --config " + (fx.dir / "unknown.json").string(), fx.dir);
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.err.find("surprise") != std::string::npos);

  // missing flag: exit 2
  CommandResult noflag = run_cli("train", fx.dir);
  CHECK(noflag.exit_code == 2);

  // train, then evaluate against a wrong-class-count dataset: exit 4
  CommandResult train =
      run_cli("train --config " + (fx.dir / "run.json").string(), fx.dir);
  REQUIRE(train.exit_code == 0);
  const fs::path three = fx.dir / "three";
  for (const char* c : {"a", "b", "c"}) {
    fs::create_directories(three / c);
    std::error_code ec;
    fs::copy_file(fx.dir / "data" / "blight" / "img_0000.ppm",
                  three / c / "x.ppm", ec);
  }
  CommandResult wrong = run_cli(
      "evaluate --checkpoint " + (fx.dir / "out" / "model.dsqc").string() +
          " --data " + three.string(),
      fx.dir);
  CHECK(wrong.exit_code == 4);

  // empty dataset dir: exit 5
  const fs::path empty = fx.dir / "empty";
  fs::create_directories(empty);
  CommandResult none = run_cli(
      "evaluate --checkpoint " + (fx.dir / "out" / "model.dsqc").string() +
          " --data " + empty.string(),
      fx.dir);
  CHECK(none.exit_code == 5);

  // unreadable checkpoint: exit 4
  CommandResult badckpt = run_cli(
      "inspect --checkpoint " + (fx.dir / "missing.dsqc").string(), fx.dir);
  CHECK(badckpt.exit_code == 4);

  // numeric blow-up during training: exit 3 with epoch/batch context
  write_file(fx.dir / "explode.json", R"({
    "dataset": {"root": "data"}, "network": {"preset": "desk"},
    "train": {"batch_size": 16, "schedule": [
      {"optimizer": "sgd", "epochs": 2, "learning_rate": 1e30, "momentum": 0.0}
    ]},
    "seed": 3, "output_dir": "boom"})");
  CommandResult boom =
      run_cli("train --config " + (fx.dir / "explode.json").string(), fx.dir);
  CHECK(boom.exit_code == 3);
  CHECK(boom.err.find("epoch") != std::string::npos);
}
