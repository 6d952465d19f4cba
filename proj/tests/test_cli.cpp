#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return AMDCN_CLI_PATH; }

int run(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_capture(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >" + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    (void)rc;
    std::ifstream f(log);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

struct TempTree {
    fs::path root;
    TempTree() : root(fs::temp_directory_path() / "amdcn_cli_test") {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    std::string operator/(const char* leaf) const { return (root / leaf).string(); }
};

} // namespace

TEST_CASE("cli: synth writes a reproducible dataset tree") {
    TempTree tmp;
    const std::string args = "synth --images 4 --size 24x24 --counts 1:4 --radius 1.5:3 --seed 11 --out ";
    CHECK(run(args + (tmp / "a")) == 0);
    CHECK(fs::exists(tmp.root / "a" / "img_0003.pgm"));
    CHECK(fs::exists(tmp.root / "a" / "img_0003.ann"));
    CHECK(fs::exists(tmp.root / "a" / "img_0003.pmap"));
    CHECK(fs::exists(tmp.root / "a" / "manifest.json"));
    CHECK(fs::exists(tmp.root / "a" / "run_manifest.json"));

    // refuses to clobber without --force
    CHECK(run(args + (tmp / "a")) == 2);

    // identical rerun elsewhere: hash-equal files
    CHECK(run(args + (tmp / "b")) == 0);
    for (const auto& entry : fs::directory_iterator(tmp.root / "a")) {
        CHECK(slurp(entry.path()) == slurp(tmp.root / "b" / entry.path().filename()));
    }
}

TEST_CASE("cli: bad arguments exit with the usage code") {
    TempTree tmp;
    CHECK(run("synth --counts 20:5 --out " + (tmp / "x")) == 1);
    CHECK(run("synth --size 64 --out " + (tmp / "x")) == 1);
    CHECK(run("definitely-not-a-command") == 1);
    CHECK(run("train") == 1); // missing required --data
}

TEST_CASE("cli: train/eval/predict round trip on a tiny dataset") {
    TempTree tmp;
    REQUIRE(run("synth --images 6 --size 24x24 --counts 1:4 --radius 1.5:3 --seed 3 --out " +
                (tmp / "ds")) == 0);

    CHECK(run("train --data " + (tmp / "ds") + " --out " + (tmp / "run") +
              " --columns 2 --feature-maps 2 --epochs 1 --batch 3 --seed 1 --deterministic") == 0);
    CHECK(fs::exists(tmp.root / "run" / "checkpoint.bin"));
    CHECK(fs::exists(tmp.root / "run" / "report.txt"));
    CHECK(fs::exists(tmp.root / "run" / "run_manifest.json"));
    const std::string train_report = slurp(tmp.root / "run" / "report.txt");
    CHECK(train_report.find("epoch0_loss:") != std::string::npos);
    CHECK(train_report.find("config_fingerprint:") != std::string::npos);

    // columns out of range is a usage error
    CHECK(run("train --data " + (tmp / "ds") + " --out " + (tmp / "r2") + " --columns 6") == 1);

    const std::string eval_out = run_capture("eval --checkpoint " + (tmp / "run") + "/checkpoint.bin" +
                                                 " --data " + (tmp / "ds") + " --out " + (tmp / "ev"),
                                             tmp.root / "eval.log");
    CHECK(eval_out.find("mae:") != std::string::npos);
    CHECK(eval_out.find("game3:") != std::string::npos);
    CHECK(eval_out.find("baseline_mae:") != std::string::npos);
    const std::string report = slurp(tmp.root / "ev" / "report.txt");
    for (const char* key : {"mae:", "game0:", "game1:", "game2:", "game3:", "images:", "seconds:"}) {
        CHECK(report.find(key) != std::string::npos);
    }
    CHECK(report.find("baseline") == std::string::npos); // report keys are exactly the schema

    // fingerprint mismatch: checkpoint trained with 2 columns, requested 3
    CHECK(run("eval --checkpoint " + (tmp / "run") + "/checkpoint.bin --data " + (tmp / "ds") +
              " --columns 3 --aggregator on") == 2);

    const std::string pred_out = run_capture("predict --checkpoint " + (tmp / "run") +
                                                 "/checkpoint.bin --image " + (tmp / "ds") +
                                                 "/img_0000.pgm --out " + (tmp / "map.pgm"),
                                             tmp.root / "pred.log");
    CHECK(pred_out.find("count:") != std::string::npos);
    CHECK(fs::exists(tmp.root / "map.pgm"));
    // output map has the input's dimensions
    std::ifstream pgm(tmp.root / "map.pgm", std::ios::binary);
    std::string magic, dims;
    std::getline(pgm, magic);
    std::getline(pgm, dims);
    CHECK(magic == "P5");
    CHECK(dims == "24 24");

    CHECK(run("predict --checkpoint " + (tmp / "run") + "/checkpoint.bin --image " + (tmp / "nope.pgm") +
              " --out " + (tmp / "m2.pgm")) == 2);
}

TEST_CASE("cli: regime without the data it needs is a data error") {
    TempTree tmp;
    REQUIRE(run("synth --images 3 --size 16x16 --counts 1:2 --radius 1.5:2.5 --seed 2 --out " +
                (tmp / "ds")) == 0);
    // strip the perspective maps, then ask for perspective supervision
    for (const auto& entry : fs::directory_iterator(tmp.root / "ds")) {
        if (entry.path().extension() == ".pmap") fs::remove(entry.path());
    }
    CHECK(run("train --data " + (tmp / "ds") + " --out " + (tmp / "run") +
              " --columns 1 --feature-maps 2 --epochs 1 --regime worldexpo-perspective") == 2);
}

TEST_CASE("cli: exploding training aborts with the numerical exit code") {
    TempTree tmp;
    REQUIRE(run("synth --images 6 --size 16x16 --counts 1:3 --radius 1.5:2.5 --seed 5 --out " +
                (tmp / "ds")) == 0);
    // an absurd learning rate overflows the head activations on the second step
    CHECK(run("train --data " + (tmp / "ds") + " --out " + (tmp / "run") +
              " --columns 2 --aggregator off --feature-maps 2 --epochs 2 --batch 3 --lr 1e106") == 3);
}

TEST_CASE("cli: ablate emits a sorted table and a plot") {
    TempTree tmp;
    REQUIRE(run("synth --images 4 --size 16x16 --counts 1:3 --radius 1.5:2.5 --seed 9 --out " +
                (tmp / "ds")) == 0);
    CHECK(run("ablate --data " + (tmp / "ds") + " --out " + (tmp / "abl") +
              " --columns 2,1 --epochs 1 --feature-maps 2 --seed 4 --deterministic") == 0);
    const std::string table = slurp(tmp.root / "abl" / "ablation.csv");
    CHECK(table.rfind("columns,aggregator,mae,seconds\n", 0) == 0);
    const auto p1 = table.find("1,off,");
    const auto p2 = table.find("1,on,");
    const auto p3 = table.find("2,off,");
    const auto p4 = table.find("2,on,");
    CHECK(p1 != std::string::npos);
    CHECK(p1 < p2);
    CHECK(p2 < p3);
    CHECK(p3 < p4);
    CHECK(fs::exists(tmp.root / "abl" / "ablation.ppm"));
    CHECK(fs::file_size(tmp.root / "abl" / "ablation.ppm") > 1000);
    CHECK(fs::exists(tmp.root / "abl" / "run_manifest.json"));
}
